#include "chns/diagnostics.hpp"

#include "chns/error.hpp"
#include "chns/operators.hpp"
#include "chns/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chns {

namespace {

double nonlocal_energy(const ScalarField& phi, const PhysParams& params, const LinearSolveConfig& linear) {
    if (params.beta == 0.0) return 0.0;
    return 0.5 * dot(zero_mean_part(phi), nonlocal_potential(phi, params.beta, linear));
}

double bulk_energy(const ScalarField& phi, const PotentialSpec& potential) {
    CompensatedSum acc;
    for (std::size_t c = 0; c < phi.size(); ++c) acc.add(psi(potential, phi[c]));
    return acc.value() * phi.grid().cell_volume();
}

ScalarField shifted_nutrient(const ScalarField& sigma, const ScalarField& phi, double chi) {
    ScalarField w = sigma;
    for (std::size_t c = 0; c < w.size(); ++c) w[c] -= chi * phi[c];
    return w;
}

} // namespace

double free_energy(const ScalarField& phi, const ScalarField& sigma, const PhysParams& params,
                   const PotentialSpec& potential, const LinearSolveConfig& linear) {
    CompensatedSum coupling;
    for (std::size_t c = 0; c < phi.size(); ++c) {
        coupling.add(0.5 * sigma[c] * sigma[c] - params.chi * sigma[c] * phi[c]);
    }
    return 0.5 * grad_norm_sq(phi) + bulk_energy(phi, potential) + coupling.value() * phi.grid().cell_volume() +
           nonlocal_energy(phi, params, linear);
}

double reduced_free_energy(const ScalarField& phi, const PhysParams& params, const PotentialSpec& potential,
                           const LinearSolveConfig& linear) {
    return 0.5 * grad_norm_sq(phi) + bulk_energy(phi, potential) - 0.5 * params.chi * params.chi * dot(phi, phi) +
           nonlocal_energy(phi, params, linear);
}

double free_energy_lower_bound(const Grid& grid, const PhysParams& params, const PotentialSpec& potential) {
    const double chi2 = params.chi * params.chi;
    // Ψ(r) - χ²r²/2 is even; its minimizer on r ≥ 0 is the positive root of
    // Ψ'(r) = χ² r when one exists, else r = 0.
    auto slope = [&](double r) { return psi_prime(potential, r) - chi2 * r; };
    double hi = potential.kind == PotentialKind::FloryHuggins ? 1.0 - potential.clip_delta
                                                              : std::sqrt(1.0 + chi2) + 1.0;
    double lo = 1e-300;
    double r_min = 0.0;
    if (slope(lo) < 0.0 && slope(hi) > 0.0) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (slope(mid) < 0.0 ? lo : hi) = mid;
        }
        r_min = 0.5 * (lo + hi);
    } else if (slope(hi) <= 0.0) {
        r_min = hi;
    }
    const double m = std::min(psi(potential, 0.0), psi(potential, r_min) - 0.5 * chi2 * r_min * r_min);
    return grid.volume() * m;
}

double dissipation(const SimState& state, const PhysParams& params, const PotentialSpec& potential,
                   const LinearSolveConfig& linear) {
    const ScalarField mu = chemical_potential(state.phi, state.sigma, params, potential, linear);
    const auto nu = ViscosityStencil::from_cells(viscosity(params, state.phi));
    return viscous_dissipation(state.v, nu) + grad_norm_sq(mu) +
           grad_norm_sq(shifted_nutrient(state.sigma, state.phi, params.chi));
}

MassReport mass_report(const SimState& state, const PhysParams& params) {
    MassReport r;
    r.phi_mean = mean(state.phi);
    r.predicted = params.c0 + std::exp(-params.alpha * state.t) * (state.phi_mean0 - params.c0);
    r.abs_error = std::abs(r.phi_mean - r.predicted);
    r.discrete_error = std::abs(r.phi_mean - state.phi_mean_discrete);
    r.sigma_mean = mean(state.sigma);
    r.sigma_drift = std::abs(r.sigma_mean - state.sigma_mean0);
    return r;
}

double higher_monitor(const SimState& state, const PhysParams& params, const PotentialSpec& potential, double a1,
                      const LinearSolveConfig& linear) {
    if (!(a1 > 0.0 && a1 < 1.0)) throw InvalidArgument("higher_monitor: a1 must lie in (0, 1)");
    const ScalarField mu = chemical_potential(state.phi, state.sigma, params, potential, linear);
    return 0.5 * velocity_grad_norm_sq(state.v) + 0.5 * a1 * grad_norm_sq(mu) +
           0.5 * grad_norm_sq(shifted_nutrient(state.sigma, state.phi, params.chi)) +
           a1 * advective_work(state.v, state.phi, mu) +
           a1 * params.alpha * (mean(state.phi) - params.c0) * integrate(mu);
}

DiagnosticsRecord make_record(const SimState& state, const PhysParams& params, const PotentialSpec& potential,
                              const DiagnosticsRecord* prev, double a1, const LinearSolveConfig& linear) {
    DiagnosticsRecord r;
    r.t = state.t;
    r.step = state.step;
    const ScalarField mu = chemical_potential(state.phi, state.sigma, params, potential, linear);
    const ScalarField w = shifted_nutrient(state.sigma, state.phi, params.chi);
    const auto nu = ViscosityStencil::from_cells(viscosity(params, state.phi));

    r.F_free = free_energy(state.phi, state.sigma, params, potential, linear);
    r.E_total = 0.5 * dot(state.v, state.v) + r.F_free;
    const double gmu = grad_norm_sq(mu);
    const double gw = grad_norm_sq(w);
    const double gv = velocity_grad_norm_sq(state.v);
    r.D_diss = viscous_dissipation(state.v, nu) + gmu + gw;

    const MassReport m = mass_report(state, params);
    r.phi_mean = m.phi_mean;
    r.phi_mean_predicted = m.predicted;
    r.phi_mean_error = m.abs_error;
    r.sigma_mean = m.sigma_mean;
    r.sigma_drift = m.sigma_drift;
    r.separation = 1.0 - state.phi.max_abs();
    r.grad_mu_norm = std::sqrt(gmu);
    r.grad_sigchi_norm = std::sqrt(gw);
    r.v_h1_norm = std::sqrt(gv);
    r.mu_integral = integrate(mu);
    r.Lambda = 0.5 * gv + 0.5 * a1 * gmu + 0.5 * gw + a1 * advective_work(state.v, state.phi, mu) +
               a1 * params.alpha * (m.phi_mean - params.c0) * r.mu_integral;
    r.energy_balance_residual = prev ? energy_balance_residual(*prev, r, params)
                                     : std::numeric_limits<double>::quiet_NaN();
    return r;
}

double energy_balance_residual(const DiagnosticsRecord& prev, const DiagnosticsRecord& curr,
                               const PhysParams& params) {
    const double dt = curr.t - prev.t;
    if (curr.step != prev.step + 1 || !(dt > 0.0)) {
        throw InvalidArgument("energy_balance_residual needs records of consecutive steps");
    }
    return (curr.E_total - prev.E_total) / dt + curr.D_diss +
           params.alpha * (curr.phi_mean - params.c0) * curr.mu_integral;
}

double modified_energy(const DiagnosticsRecord& r, double coefficient, double phi_mean0, const PhysParams& params) {
    return r.E_total + coefficient * std::exp(-params.alpha * r.t) * std::abs(phi_mean0 - params.c0);
}

ModifiedEnergyScan scan_modified_energy(std::span<const DiagnosticsRecord> records, double phi_mean0,
                                        const PhysParams& params, double c_max, int samples) {
    if (samples < 2 || !(c_max > 0.0)) throw InvalidArgument("scan_modified_energy: need c_max > 0, samples >= 2");
    ModifiedEnergyScan out;
    for (int k = 0; k < samples; ++k) {
        const double c = c_max * k / (samples - 1);
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < records.size(); ++i) {
            const double inc = modified_energy(records[i], c, phi_mean0, params) -
                               modified_energy(records[i - 1], c, phi_mean0, params);
            worst = std::max(worst, inc);
        }
        if (records.size() < 2) worst = 0.0;
        out.worst_increase = worst;
        if (worst <= 1e-12 * std::max(1.0, std::abs(records.front().E_total))) {
            out.coefficient = c;
            break;
        }
    }
    return out;
}

EquilibriumDistance distance_to_equilibrium(const SimState& state, const ScalarField& phi_inf,
                                            const ScalarField& sigma_inf, const LinearSolveConfig& linear) {
    if (!(state.phi.grid() == phi_inf.grid()) || !(state.sigma.grid() == sigma_inf.grid())) {
        throw InvalidArgument("distance_to_equilibrium: grid mismatch");
    }
    const ScalarField dphi = state.phi - phi_inf;
    const ScalarField dsig = state.sigma - sigma_inf;
    EquilibriumDistance d;
    d.l2_v = norm_l2(state.v);
    d.l2_phi = norm_l2(dphi);
    d.h1_phi = std::sqrt(dot(dphi, dphi) + grad_norm_sq(dphi));
    d.l2_sigma = norm_l2(dsig);
    d.dual_phi = norm_h1_dual(dphi, linear);
    d.dual_sigma = norm_h1_dual(dsig, linear);
    return d;
}

EquilibriumDistance distance_to_equilibrium(const SimState& state, const EquilibriumResult& eq,
                                            const LinearSolveConfig& linear) {
    return distance_to_equilibrium(state, eq.phi_inf, eq.sigma_inf, linear);
}

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double sse = 0.0;
    double r_squared = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        f.sse += e * e;
    }
    f.r_squared = syy > 0.0 ? 1.0 - f.sse / syy : 1.0;
    return f;
}

} // namespace

RateFit fit_convergence_rate(std::span<const double> t, std::span<const double> d, const RateWindow& window) {
    if (t.size() != d.size()) throw InvalidArgument("fit_convergence_rate: t and d differ in length");
    if (t.empty()) throw InvalidArgument("fit_convergence_rate: empty series");
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(d[i] > 0.0) || !std::isfinite(d[i])) throw InvalidArgument("fit_convergence_rate: d must be positive");
        if (i > 0 && !(t[i] > t[i - 1])) throw InvalidArgument("fit_convergence_rate: t must increase");
    }

    double t0, t1;
    if (window.t_begin || window.t_end) {
        t0 = window.t_begin.value_or(t.front());
        t1 = window.t_end.value_or(t.back());
    } else {
        const double dmax = *std::max_element(d.begin(), d.end());
        std::size_t tr = 0;
        while (tr < d.size() && d[tr] >= 0.1 * dmax) ++tr;
        if (tr == d.size()) tr = 0;
        t1 = t.back();
        t0 = t[tr] + 0.4 * (t1 - t[tr]);
    }
    if (t0 <= -1.0 || t1 < t0) throw InvalidArgument("fit_convergence_rate: invalid window");

    std::vector<double> lt, tt, ld;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t0 || t[i] > t1) continue;
        lt.push_back(std::log1p(t[i]));
        tt.push_back(t[i]);
        ld.push_back(std::log(d[i]));
    }
    if (lt.size() < 8) {
        throw InvalidArgument("fit_convergence_rate: need at least 8 points in the window, got " +
                              std::to_string(lt.size()));
    }

    const LineFit power = least_squares(lt, ld);
    const LineFit expo = least_squares(tt, ld);
    RateFit r;
    r.exponent = -power.slope;
    if (!(r.exponent > 0.0)) throw InvalidArgument("fit_convergence_rate: series does not decay");
    r.kappa = r.exponent / (1.0 + 2.0 * r.exponent);
    r.r_squared = power.r_squared;
    r.t_begin = t0;
    r.t_end = t1;
    r.points = lt.size();
    r.exp_rate = -expo.slope;
    r.flagged_exponential = expo.sse < power.sse;
    return r;
}

} // namespace chns
