#pragma once

#include "chns/evolution.hpp"

#include <optional>
#include <vector>

namespace chns {

struct EquilibriumResult;

/// F(φ, σ) = ∫ ½|∇φ|² + Ψ(φ) + ½σ² - χσφ + (β/2)|∇N(φ - φ̄)|².
double free_energy(const ScalarField& phi, const ScalarField& sigma, const PhysParams& params,
                   const PotentialSpec& potential, const LinearSolveConfig& linear = {});

/// F̃(φ) = ∫ ½|∇φ|² + Ψ(φ) - (χ²/2)φ² + (β/2)|∇N(φ - φ̄)|², so that
/// F(φ, σ) = F̃(φ) + ½||σ - χφ||².
double reduced_free_energy(const ScalarField& phi, const PhysParams& params,
                           const PotentialSpec& potential, const LinearSolveConfig& linear = {});

/// Lower bound of F from completing the square in σ:
/// F ≥ |Ω| min_r (Ψ(r) - χ² r²/2), the gradient and nonlocal terms being nonnegative.
double free_energy_lower_bound(const Grid& grid, const PhysParams& params, const PotentialSpec& potential);

/// ∫ 2ν(φ)|Dv|² + ||∇μ||² + ||∇(σ - χφ)||² with μ recomputed from (φ, σ).
double dissipation(const SimState& state, const PhysParams& params, const PotentialSpec& potential,
                   const LinearSolveConfig& linear = {});

struct MassReport {
    double phi_mean = 0.0;
    double predicted = 0.0;        ///< c0 + e^{-αt}(φ̄0 - c0)
    double abs_error = 0.0;        ///< |φ̄ - predicted|
    double discrete_error = 0.0;   ///< |φ̄ - implicit recurrence|
    double sigma_mean = 0.0;
    double sigma_drift = 0.0;      ///< |σ̄ - σ̄0|
};

MassReport mass_report(const SimState& state, const PhysParams& params);

/// Λ = ½||∇v||² + (a1/2)||∇μ||² + ½||∇(σ - χφ)||² + a1 ∫(v·∇φ)μ + a1 α(φ̄ - c0)∫μ.
double higher_monitor(const SimState& state, const PhysParams& params, const PotentialSpec& potential,
                      double a1 = 0.1, const LinearSolveConfig& linear = {});

struct DiagnosticsRecord {
    double t = 0.0;
    std::uint64_t step = 0;
    double E_total = 0.0;
    double F_free = 0.0;
    double D_diss = 0.0;
    double phi_mean = 0.0;
    double phi_mean_predicted = 0.0;
    double phi_mean_error = 0.0;
    double sigma_mean = 0.0;
    double sigma_drift = 0.0;
    double separation = 0.0;
    double grad_mu_norm = 0.0;
    double grad_sigchi_norm = 0.0;
    double v_h1_norm = 0.0;
    double Lambda = 0.0;
    double energy_balance_residual = 0.0;  ///< NaN when there is no previous record
    double mu_integral = 0.0;              ///< ∫μ, needed by the balance residual

    bool operator==(const DiagnosticsRecord&) const = default;
};

/// Evaluates every diagnostic of `state`; fills the balance residual when
/// `prev` is the record of the preceding step.
DiagnosticsRecord make_record(const SimState& state, const PhysParams& params, const PotentialSpec& potential,
                              const DiagnosticsRecord* prev = nullptr, double a1 = 0.1,
                              const LinearSolveConfig& linear = {});

/// R = (E1 - E0)/Δt + D1 + α(φ̄1 - c0)∫μ1 for consecutive records.
double energy_balance_residual(const DiagnosticsRecord& prev, const DiagnosticsRecord& curr,
                               const PhysParams& params);

/// Ê = E + c e^{-αt}|φ̄0 - c0|, the energy with the reaction correction.
double modified_energy(const DiagnosticsRecord& r, double coefficient, double phi_mean0, const PhysParams& params);

struct ModifiedEnergyScan {
    std::optional<double> coefficient;  ///< smallest scanned c making Ê non-increasing
    double worst_increase = 0.0;        ///< largest step increase of Ê at the largest c scanned
};

/// Scans c over `samples` equally spaced values in [0, c_max].
ModifiedEnergyScan scan_modified_energy(std::span<const DiagnosticsRecord> records, double phi_mean0,
                                        const PhysParams& params, double c_max = 100.0, int samples = 201);

struct EquilibriumDistance {
    double l2_v = 0.0;
    double l2_phi = 0.0;
    double h1_phi = 0.0;
    double l2_sigma = 0.0;
    double dual_phi = 0.0;
    double dual_sigma = 0.0;

    /// ||v|| + ||φ - φ∞||_{H¹} + ||σ - σ∞||.
    double total() const { return l2_v + h1_phi + l2_sigma; }
};

EquilibriumDistance distance_to_equilibrium(const SimState& state, const ScalarField& phi_inf,
                                            const ScalarField& sigma_inf, const LinearSolveConfig& linear = {});
EquilibriumDistance distance_to_equilibrium(const SimState& state, const EquilibriumResult& eq,
                                            const LinearSolveConfig& linear = {});

struct RateWindow {
    std::optional<double> t_begin;
    std::optional<double> t_end;
};

struct RateFit {
    double kappa = 0.0;
    double exponent = 0.0;      ///< p with d ~ (1 + t)^{-p}; κ = p / (1 + 2p)
    double r_squared = 0.0;
    double t_begin = 0.0;
    double t_end = 0.0;
    std::size_t points = 0;
    double exp_rate = 0.0;      ///< λ of the competing fit d ~ e^{-λt}
    bool flagged_exponential = false;
};

/// Least-squares fit of log d against log(1 + t). Without an explicit
/// window the fit uses the last 60% (in time) of the series after the
/// transient, which ends when d first drops below 10% of its maximum.
/// Decay is flagged exponential when a fit of log d against t has the
/// smaller residual. Throws InvalidArgument on fewer than 8 points in the
/// window or on non-positive d.
RateFit fit_convergence_rate(std::span<const double> t, std::span<const double> d, const RateWindow& window = {});

} // namespace chns
