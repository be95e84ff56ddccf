#pragma once

#include "chns/grid.hpp"
#include "chns/linear_solver.hpp"

namespace chns {

// Sign convention: A = -Δ with homogeneous Neumann closure (ghost cell
// mirrors the first interior cell), so A is symmetric positive semidefinite
// with the constants as kernel. All stencils are built from the MAC pair
// (gradient, divergence), which are negative adjoints of each other.

/// Δf (returns -A f). Five-point (2D) / seven-point (3D) stencil.
ScalarField laplacian_neumann(const ScalarField& f);

/// Raw kernels on flat arrays, used inside solvers.
void apply_neg_laplacian(const Grid& g, std::span<const double> in, std::span<double> out);
std::vector<double> neg_laplacian_diagonal(const Grid& g);

/// The inverse Neumann Laplacian: u with mean(u) = 0 and -Δu = f.
/// Throws NotZeroMean when |mean(f)| exceeds 1e-10 times the RMS of f.
/// `guess` (optional) warm-starts the iteration.
ScalarField inv_neumann_laplacian(const ScalarField& f, const LinearSolveConfig& cfg = {},
                                  const ScalarField* guess = nullptr, SolveStats* stats = nullptr);

/// β N(φ - φ̄) for arbitrary φ; the mean is removed twice so rounding
/// residue of a large mean never trips the zero-mean check.
ScalarField nonlocal_potential(const ScalarField& phi, double beta, const LinearSolveConfig& cfg = {});

/// ||f||_{V0'} = ||∇ N f||, for zero-mean f.
double norm_v0_dual(const ScalarField& f, const LinearSolveConfig& cfg = {});

/// (||f - f̄||_{V0'}^2 + |f̄|^2)^{1/2}, the (H^1)' norm.
double norm_h1_dual(const ScalarField& f, const LinearSolveConfig& cfg = {});

/// Solves (shift I + scale A) u = rhs with shift > 0, scale >= 0.
/// The mean is propagated exactly: mean(u) = mean(rhs) / shift.
ScalarField solve_screened(const ScalarField& rhs, double shift, double scale,
                           const LinearSolveConfig& cfg = {}, const ScalarField* guess = nullptr);

/// Center-to-face gradient; boundary-normal faces are zero.
VectorField gradient(const ScalarField& f);

/// Face-to-center divergence.
ScalarField divergence(const VectorField& u);

/// ||∇f||^2 evaluated on faces, consistent with (A f, f).
double grad_norm_sq(const ScalarField& f);

/// Discrete Leray projection u - ∇q with Δq = div u. When `potential` is
/// given it receives q (zero mean).
VectorField leray_project(const VectorField& u, const LinearSolveConfig& cfg = {},
                          ScalarField* potential = nullptr);

/// Conservative transport div(u f) with face values of f by centered averaging.
ScalarField convect(const VectorField& u, const ScalarField& f);

/// Conservative momentum transport div(u ⊗ u) on the MAC grid. Kinetic
/// energy neutral, (div(u ⊗ u), u) = 0, whenever div u = 0.
VectorField momentum_convect(const VectorField& u);

/// Face-pair quantity (v · ∇f) μ integrated over the domain: Σ_faces v ∇f μ̂.
double advective_work(const VectorField& v, const ScalarField& f, const ScalarField& mu);

/// Viscosities sampled where the discrete strain lives: cell centers for
/// normal components, edges (face in two axes) for shear components.
struct ViscosityStencil {
    Grid grid;
    std::vector<double> center;
    std::array<std::vector<double>, 3> edge;  ///< pairs (0,1), (0,2), (1,2)

    static ViscosityStencil from_cells(const ScalarField& nu);
};

/// K u = -div(2 ν D u) with no-slip ghost closure. Symmetric positive
/// definite on interior faces; boundary faces map to zero.
VectorField viscous_apply(const VectorField& u, const ViscosityStencil& nu);

/// ∫ 2 ν |D u|^2 in the quadrature that makes (K u, u) equal to it exactly.
double viscous_dissipation(const VectorField& u, const ViscosityStencil& nu);

/// ||∇u||^2 summed over components, same edge quadrature as the strain.
double velocity_grad_norm_sq(const VectorField& u);

/// Solves (I + dt K) u = rhs by Jacobi-preconditioned CG.
VectorField momentum_viscous_solve(const VectorField& rhs, const ScalarField& nu, double dt,
                                   const LinearSolveConfig& cfg = {},
                                   const VectorField* guess = nullptr);

} // namespace chns
