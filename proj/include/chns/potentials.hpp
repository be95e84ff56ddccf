#pragma once

#include "chns/grid.hpp"
#include "chns/linear_solver.hpp"

#include <atomic>
#include <cstdint>

namespace chns {

enum class PotentialKind { FloryHuggins, Quartic };

/// Bulk free energy density.
///
/// FloryHuggins: Ψ(r) = θ/2 [(1-r)ln(1-r) + (1+r)ln(1+r)] + θ0/2 (1 - r²), which
/// splits as Ψ = Ψ0 - θ0/2 r² + θ0/2 with convex Ψ0, Ψ0'' >= θ.
/// Quartic: Ψ(r) = (1 - r²)² / 4.
struct PotentialSpec {
    PotentialKind kind = PotentialKind::Quartic;
    double theta = 1.0;
    double theta0 = 2.0;
    double clip_delta = 1e-9;  ///< FloryHuggins arguments are clamped to [-1+δ, 1-δ]

    void validate() const;

    static PotentialSpec quartic() { return {}; }
    static PotentialSpec flory_huggins(double theta, double theta0, double clip_delta = 1e-9) {
        return {PotentialKind::FloryHuggins, theta, theta0, clip_delta};
    }
};

/// Counts evaluations whose argument had to be clamped away from ±1.
/// Shared across threads by reference; increments are atomic.
class ClipCounter {
public:
    void record() { count_.fetch_add(1, std::memory_order_relaxed); }
    std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }
    void reset() { count_.store(0, std::memory_order_relaxed); }

private:
    std::atomic<std::uint64_t> count_{0};
};

double psi(const PotentialSpec& spec, double r, ClipCounter* clips = nullptr);
double psi_prime(const PotentialSpec& spec, double r, ClipCounter* clips = nullptr);
double psi_double_prime(const PotentialSpec& spec, double r, ClipCounter* clips = nullptr);

/// Convex part of the Flory–Huggins potential: Ψ0'(r) = θ artanh(r), Ψ0''(r) = θ / (1 - r²).
double psi0_prime(const PotentialSpec& spec, double r, ClipCounter* clips = nullptr);
double psi0_double_prime(const PotentialSpec& spec, double r, ClipCounter* clips = nullptr);

/// Pointwise Ψ'(φ) over a field.
ScalarField psi_prime(const PotentialSpec& spec, const ScalarField& phi, ClipCounter* clips = nullptr);

/// Positive root of Ψ'(r) = 0 for FloryHuggins (the pure-phase value r_b with
/// θ artanh(r_b) = θ0 r_b); 1 for Quartic.
double binodal_value(const PotentialSpec& spec);

/// Model coefficients. ε is fixed to 1; θ and θ0 belong to PotentialSpec.
struct PhysParams {
    double nu1 = 1.0;
    double nu2 = 1.0;
    double chi = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double c0 = 0.0;
    double gamma = 0.0;

    void validate() const;
};

/// Width of the quadratic blend that rounds the clamp corners at ±1 in ν.
inline constexpr double kViscosityCornerWidth = 0.05;

/// ν(r) = ν1 (1 + r̂)/2 + ν2 (1 - r̂)/2 with r̂ a C¹ clamp of r to [-1, 1].
double viscosity(const PhysParams& params, double r);
ScalarField viscosity(const PhysParams& params, const ScalarField& phi);

/// h_k: clamps r to [-k, k].
double cutoff_hk(double k, double r);

struct RegularizeReport {
    int newton_iterations = 0;
    double residual = 0.0;
    double separation = 0.0;  ///< δ_k = 1 - max|φ_{0,k}|
    double max_psi0_prime = 0.0;
};

/// φ_{0,k}: solves -Δφ + Ψ0'(φ) = h_k(-Δφ0 + Ψ0'(φ0)) with Neumann closure by
/// damped Newton (Armijo backtracking on the L2 residual, at most 50
/// iterations, tolerance 1e-10). Requires a FloryHuggins spec.
ScalarField regularize_initial_phi(const ScalarField& phi0, double k, const PotentialSpec& spec,
                                   const LinearSolveConfig& cfg = {},
                                   RegularizeReport* report = nullptr);

/// σ_{0,k}: solves -(1/k)Δσ + σ = σ0 with Neumann closure; mean is preserved.
ScalarField regularize_initial_sigma(const ScalarField& sigma0, double k,
                                     const LinearSolveConfig& cfg = {});

} // namespace chns
