#include "chns/stationary.hpp"

#include "chns/diagnostics.hpp"
#include "chns/error.hpp"
#include "chns/evolution.hpp"
#include "chns/operators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

namespace chns {

namespace {

ScalarField neg_laplacian(const ScalarField& f) {
    ScalarField out(f.grid());
    apply_neg_laplacian(f.grid(), f.data(), out.data());
    return out;
}

ScalarField shifted(const ScalarField& sigma, const ScalarField& phi, double chi) {
    ScalarField w = sigma;
    for (std::size_t c = 0; c < w.size(); ++c) w[c] -= chi * phi[c];
    return w;
}

void require_admissible(const ScalarField& phi, const PotentialSpec& potential, const char* who) {
    if (potential.kind == PotentialKind::FloryHuggins && phi.max_abs() >= 1.0) {
        throw InvalidArgument(std::string(who) + ": phase field must satisfy |phi| < 1");
    }
}

} // namespace

StationaryResidual stationary_residual(const ScalarField& phi, const ScalarField& sigma, const PhysParams& params,
                                       const PotentialSpec& potential, const LinearSolveConfig& linear) {
    ScalarField lhs = neg_laplacian(phi);
    for (std::size_t c = 0; c < lhs.size(); ++c) lhs[c] += psi_prime(potential, phi[c]) - params.chi * sigma[c];
    lhs += nonlocal_potential(phi, params.beta, linear);
    StationaryResidual r;
    r.r1 = norm_l2(zero_mean_part(lhs));
    r.r2 = std::sqrt(grad_norm_sq(shifted(sigma, phi, params.chi)));
    return r;
}

EquilibriumResult cho_flow(const ScalarField& phi0, const ScalarField& sigma0, const PhysParams& params,
                           const PotentialSpec& potential, const ChoFlowOptions& opts) {
    if (std::abs(mean(phi0)) >= 1.0) throw InvalidArgument("cho_flow: mean of phi0 must lie in (-1, 1)");
    require_admissible(phi0, potential, "cho_flow");
    if (!(opts.tol > 0.0)) throw InvalidArgument("cho_flow: tol must be positive");

    StepperConfig cfg;
    cfg.dt = opts.dt;
    cfg.gamma = opts.gamma;
    cfg.potential = potential;
    cfg.params = params;
    cfg.params.alpha = 0.0;
    cfg.linear = opts.linear;
    cfg.fluid = false;
    cfg.S = opts.S >= 0.0 ? opts.S : default_stabilization(potential, params, phi0);
    cfg.validate();

    SimState s = make_state(phi0, sigma0, cfg.params, potential, nullptr, cfg.linear);
    auto measure = [&](const SimState& st) {
        const ScalarField mu = chemical_potential(st.phi, st.sigma, cfg.params, potential, cfg.linear);
        return std::sqrt(grad_norm_sq(mu)) + std::sqrt(grad_norm_sq(shifted(st.sigma, st.phi, params.chi)));
    };

    EquilibriumResult res;
    double energy = free_energy(s.phi, s.sigma, cfg.params, potential, cfg.linear);
    double r = measure(s);
    int steps = 0;
    // A step that raises F is redone with doubled S, up to 64 times the start.
    const double s_cap = 64.0 * std::max(cfg.S, 1.0);
    while (r >= opts.tol && steps < opts.max_steps) {
        SimState next = step(s, cfg);
        const double e = free_energy(next.phi, next.sigma, cfg.params, potential, cfg.linear);
        if (e > energy + 1e-11 * std::max(1.0, std::abs(energy))) {
            if (cfg.S * 2.0 > s_cap) {
                throw SolverError("cho_flow: free energy increased from " + std::to_string(energy) + " to " +
                                      std::to_string(e),
                                  r, steps);
            }
            cfg.S *= 2.0;
            continue;
        }
        s = std::move(next);
        ++steps;
        energy = e;
        r = measure(s);
    }
    res.phi_inf = s.phi;
    res.sigma_inf = s.sigma;
    res.energy = energy;
    res.residual = r;
    res.separation = 1.0 - s.phi.max_abs();
    res.iterations = steps;
    res.converged = r < opts.tol;
    return res;
}

EquilibriumResult reduced_equilibrium(const ScalarField& phi_guess, double m1, double m2, const PhysParams& params,
                                      const PotentialSpec& potential, const ReducedOptions& opts) {
    if (!(std::abs(m1) < 1.0)) throw InvalidArgument("reduced_equilibrium: m1 must lie in (-1, 1)");
    ScalarField phi = zero_mean_part(phi_guess);
    phi += m1;
    require_admissible(phi, potential, "reduced_equilibrium");

    const LinearSolveConfig& lin = opts.linear;
    const double chi2 = params.chi * params.chi;
    const double lim = 1.0 - potential.clip_delta;
    const bool log_potential = potential.kind == PotentialKind::FloryHuggins;
    // Metric (sI + A): s bounds the curvature of the bulk part.
    const double s = 2.0 * default_stabilization(potential, params, phi) + chi2;

    auto energy = [&](const ScalarField& f) { return reduced_free_energy(f, params, potential, lin); };
    auto gradient_of = [&](const ScalarField& f) {
        ScalarField g = neg_laplacian(f);
        for (std::size_t c = 0; c < g.size(); ++c) g[c] += psi_prime(potential, f[c]) - chi2 * f[c];
        g += nonlocal_potential(f, params.beta, lin);
        return zero_mean_part(g);
    };
    auto precondition = [&](const ScalarField& g) { return zero_mean_part(solve_screened(g, s, 1.0, lin)); };

    ScalarField g = gradient_of(phi);
    ScalarField z = precondition(g);
    ScalarField d = z;
    d *= -1.0;
    double gz = dot(g, z);
    double f_now = energy(phi);
    double gnorm = norm_l2(g);
    int it = 0;
    for (; it < opts.max_iter && gnorm >= opts.tol; ++it) {
        double slope = dot(g, d);
        if (!(slope < 0.0)) {
            d = z;
            d *= -1.0;
            slope = -gz;
        }
        double step_len = 1.0;
        bool accepted = false;
        ScalarField trial(phi.grid());
        for (int ls = 0; ls < 60; ++ls) {
            trial = phi;
            for (std::size_t c = 0; c < trial.size(); ++c) trial[c] += step_len * d[c];
            if (!log_potential || trial.max_abs() < lim) {
                const double f_trial = energy(trial);
                // The slack absorbs rounding once F stops resolving the decrease.
                if (f_trial <= f_now + 1e-4 * step_len * slope + 1e-14 * std::abs(f_now)) {
                    f_now = f_trial;
                    accepted = true;
                    break;
                }
            }
            step_len *= 0.5;
        }
        if (!accepted) break;
        phi = std::move(trial);
        // Keep the mean at m1 exactly.
        phi = zero_mean_part(phi);
        phi += m1;

        ScalarField g_new = gradient_of(phi);
        ScalarField z_new = precondition(g_new);
        const double gz_new = dot(g_new, z_new);
        // Polak–Ribière+ in the preconditioned metric.
        const double beta_pr = std::max(0.0, (gz_new - dot(g, z_new)) / gz);
        for (std::size_t c = 0; c < d.size(); ++c) d[c] = -z_new[c] + beta_pr * d[c];
        g = std::move(g_new);
        z = std::move(z_new);
        gz = gz_new;
        gnorm = norm_l2(g);
    }

    EquilibriumResult res;
    res.phi_inf = phi;
    res.sigma_inf = phi;
    res.sigma_inf *= params.chi;
    res.sigma_inf += m2 - params.chi * m1;
    res.energy = free_energy(res.phi_inf, res.sigma_inf, params, potential, lin);
    res.residual = gnorm;
    res.separation = 1.0 - phi.max_abs();
    res.iterations = it;
    res.converged = gnorm < opts.tol;
    return res;
}

unsigned worker_threads() {
    if (const char* env = std::getenv("CHNS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return unsigned(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

ScalarField random_start(const Grid& grid, double m, double amplitude, int smoothing_passes, std::uint64_t seed,
                         const LinearSolveConfig& linear) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    ScalarField f(grid);
    for (auto& v : f.data()) v = dist(rng);
    double h = grid.h[0];
    for (int a = 1; a < grid.dim; ++a) h = std::min(h, grid.h[a]);
    for (int pass = 0; pass < smoothing_passes; ++pass) f = solve_screened(f, 1.0, h * h, linear);
    f = zero_mean_part(f);
    f += m;
    return f;
}

MinimizeResult minimize_energy(const Grid& grid, double m1, double m2, const PhysParams& params,
                               const PotentialSpec& potential, const MinimizeOptions& opts) {
    if (!(std::abs(m1) < 1.0)) throw InvalidArgument("minimize_energy: m1 must lie in (-1, 1)");
    if (opts.n_starts < 1) throw InvalidArgument("minimize_energy: n_starts must be at least 1");

    const std::size_t n = std::size_t(opts.n_starts);
    std::vector<EquilibriumResult> results(n);
    std::vector<std::string> failures(n);
    auto run_one = [&](std::size_t i) {
        ScalarField phi0(grid, m1), sigma0(grid, m2);
        if (i > 0) {
            // Two independent streams per start, derived from the seed.
            phi0 = random_start(grid, m1, opts.amplitude, opts.smoothing_passes, opts.seed + 2 * i,
                                opts.flow.linear);
            sigma0 = random_start(grid, m2, opts.amplitude, opts.smoothing_passes, opts.seed + 2 * i + 1,
                                  opts.flow.linear);
        }
        try {
            results[i] = cho_flow(phi0, sigma0, params, potential, opts.flow);
        } catch (const Error& e) {
            failures[i] = e.what();
            results[i].phi_inf = phi0;
            results[i].sigma_inf = sigma0;
            results[i].converged = false;
        }
    };

    const unsigned workers = std::min<unsigned>(opts.threads ? opts.threads : worker_threads(), unsigned(n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run_one(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!failures[i].empty()) {
            emit_warning("minimize_energy: start " + std::to_string(i) + " failed: " + failures[i]);
        } else if (!results[i].converged) {
            emit_warning("minimize_energy: start " + std::to_string(i) + " did not converge (residual " +
                         std::to_string(results[i].residual) + ")");
        }
    }

    MinimizeResult out;
    bool found = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (!results[i].converged) continue;
        if (!found || results[i].energy < out.best.energy) {
            out.best = results[i];
            out.best_index = i;
            found = true;
        }
    }
    out.candidates = std::move(results);
    if (!found) throw SolverError("minimize_energy: no candidate converged", 0.0, opts.n_starts);
    return out;
}

} // namespace chns
