#pragma once

#include "chns/grid.hpp"
#include "chns/linear_solver.hpp"
#include "chns/potentials.hpp"

#include <cstdint>
#include <vector>

namespace chns {

struct EquilibriumResult {
    ScalarField phi_inf;
    ScalarField sigma_inf;
    double energy = 0.0;      ///< F(φ∞, σ∞)
    double residual = 0.0;    ///< solver-specific stationarity measure (see each solver)
    double separation = 0.0;  ///< 1 - ||φ∞||∞
    int iterations = 0;
    bool converged = false;
};

/// Zero-mean part of -Δφ + Ψ'(φ) - χσ + β N(φ - φ̄) in L², and ||∇(σ - χφ)||.
struct StationaryResidual {
    double r1 = 0.0;
    double r2 = 0.0;
};

StationaryResidual stationary_residual(const ScalarField& phi, const ScalarField& sigma,
                                       const PhysParams& params, const PotentialSpec& potential,
                                       const LinearSolveConfig& linear = {});

struct ChoFlowOptions {
    double gamma = 0.1;
    double dt = 0.05;
    double tol = 1e-8;          ///< on ||∇μ|| + ||∇(σ - χφ)||
    int max_steps = 100000;
    double S = -1.0;            ///< negative selects default_stabilization
    LinearSolveConfig linear{SolverMethod::ConjugateGradient, 1e-12, 0};
};

/// Viscous Cahn–Hilliard–Oono flow with the fluid switched off and α = 0,
/// run until ||∇μ|| + ||∇(σ - χφ)|| < tol. `residual` holds that sum.
/// A step that would raise the free energy is repeated with doubled S;
/// SolverError once S has grown 64-fold and F still increases.
EquilibriumResult cho_flow(const ScalarField& phi0, const ScalarField& sigma0, const PhysParams& params,
                           const PotentialSpec& potential, const ChoFlowOptions& opts = {});

struct ReducedOptions {
    double tol = 1e-10;         ///< on the zero-mean L² residual of the reduced equation
    int max_iter = 20000;
    LinearSolveConfig linear{SolverMethod::ConjugateGradient, 1e-12, 0};
};

/// Solves -Δφ + Ψ'(φ) - mean(Ψ'(φ)) - χ²(φ - φ̄) + β N(φ - φ̄) = 0 with
/// mean(φ) = m1 by preconditioned nonlinear conjugate gradients on F̃ with
/// Armijo backtracking, then sets σ = χφ + (m2 - χ m1). `residual` is the
/// L² norm of the reduced equation.
EquilibriumResult reduced_equilibrium(const ScalarField& phi_guess, double m1, double m2,
                                      const PhysParams& params, const PotentialSpec& potential,
                                      const ReducedOptions& opts = {});

struct MinimizeOptions {
    int n_starts = 4;
    std::uint64_t seed = 1;
    double amplitude = 0.1;
    int smoothing_passes = 2;
    ChoFlowOptions flow;
    /// Worker threads; 0 reads CHNS_THREADS, falling back to the hardware count.
    unsigned threads = 0;
};

struct MinimizeResult {
    EquilibriumResult best;
    std::size_t best_index = 0;
    std::vector<EquilibriumResult> candidates;  ///< in start order; start 0 is uniform
};

/// Random start: i.i.d. uniform perturbations of the given amplitude,
/// smoothed by passes of (I - h²Δ)⁻¹, shifted to mean m.
ScalarField random_start(const Grid& grid, double m, double amplitude, int smoothing_passes, std::uint64_t seed,
                         const LinearSolveConfig& linear = {});

/// Multi-start minimization of F over fields with means (m1, m2): cho_flow
/// from the uniform state and n_starts - 1 random starts, run concurrently.
/// Non-converged candidates are kept in the list but never selected.
/// Throws SolverError if no candidate converges.
MinimizeResult minimize_energy(const Grid& grid, double m1, double m2, const PhysParams& params,
                               const PotentialSpec& potential, const MinimizeOptions& opts = {});

/// Worker count from CHNS_THREADS (positive integer) or the hardware.
unsigned worker_threads();

} // namespace chns
