#include "chns/evolution.hpp"

#include "chns/error.hpp"
#include "chns/operators.hpp"
#include "chns/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numbers>

namespace chns {

namespace {

std::mutex g_warn_mutex;
std::function<void(const std::string&)> g_warn = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
};

void warn(const std::string& msg) {
    std::lock_guard lock(g_warn_mutex);
    if (g_warn) g_warn(msg);
}

ScalarField neg_laplacian(const ScalarField& f) {
    ScalarField out(f.grid());
    apply_neg_laplacian(f.grid(), f.data(), out.data());
    return out;
}

// Diagonal of A², used to precondition the fourth-order phase system.
std::vector<double> neg_laplacian_sq_diagonal(const Grid& g) {
    const auto d = neg_laplacian_diagonal(g);
    std::vector<double> out(g.cells());
    for (int k = 0; k < g.n[2]; ++k)
        for (int j = 0; j < g.n[1]; ++j)
            for (int i = 0; i < g.n[0]; ++i) {
                const std::array<int, 3> p{i, j, k};
                double acc = 0.0;
                for (int a = 0; a < g.dim; ++a) {
                    const double w = 1.0 / (g.h[a] * g.h[a]);
                    if (p[a] > 0) acc += w * w;
                    if (p[a] < g.n[a] - 1) acc += w * w;
                }
                const std::size_t c = g.index(i, j, k);
                out[c] = d[c] * d[c] + acc;
            }
    return out;
}

double separation_of(const ScalarField& phi) { return 1.0 - phi.max_abs(); }

// Face average of a cell field times the face gradient of another.
VectorField capillary_force(const ScalarField& m, const ScalarField& phi) {
    VectorField f = gradient(phi);
    const Grid& g = phi.grid();
    for (int a = 0; a < g.dim; ++a) {
        const auto s = g.face_shape(a);
        auto comp = f.component(a);
        std::array<std::size_t, 3> st{1, std::size_t(g.n[0]), std::size_t(g.n[0]) * g.n[1]};
        for (int k = 0; k < s[2]; ++k)
            for (int j = 0; j < s[1]; ++j)
                for (int i = 0; i < s[0]; ++i) {
                    const std::array<int, 3> q{i, j, k};
                    if (q[a] == 0 || q[a] == g.n[a]) continue;
                    const std::size_t hi = g.index(i, j, k);
                    const std::size_t lo = hi - st[a];
                    comp[f.face_index(a, i, j, k)] *= 0.5 * (m[lo] + m[hi]);
                }
    }
    return f;
}

} // namespace

void emit_warning(const std::string& message) { warn(message); }

void set_warning_sink(std::function<void(const std::string&)> sink) {
    std::lock_guard lock(g_warn_mutex);
    g_warn = std::move(sink);
}

void StepperConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step dt must be positive");
    if (!(S >= 0.0)) throw InvalidArgument("stabilization S must be nonnegative");
    if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be nonnegative");
    if (!(clip_floor > 0.0 && clip_floor < 0.5)) throw InvalidArgument("clip_floor must lie in (0, 0.5)");
    potential.validate();
    params.validate();
}

double default_stabilization(const PotentialSpec& potential, const PhysParams& params,
                             const ScalarField& phi0) {
    const double chi2 = params.chi * params.chi;
    double s = 1.0;
    if (potential.kind == PotentialKind::FloryHuggins) {
        // Equilibria with σ = χφ + const see the effective quench θ0 + χ².
        const auto effective = PotentialSpec::flory_huggins(potential.theta, potential.theta0 + chi2,
                                                            potential.clip_delta);
        const double r = std::min(std::max(phi0.max_abs(), binodal_value(effective)), 1.0 - potential.clip_delta);
        s = potential.theta / (2.0 * (1.0 - r * r));
    }
    // The explicit χσ coupling adds the concave part -χ²φ²/2 of the reduced energy.
    s += 0.5 * chi2;
    if (params.beta > 0.0) {
        const Grid& g = phi0.grid();
        double lmax = 0.0;
        for (int a = 0; a < g.dim; ++a) lmax = std::max(lmax, g.length[a]);
        const double lambda1 = std::pow(std::numbers::pi / lmax, 2);
        s += params.beta / (2.0 * lambda1);
    }
    return s;
}

ScalarField chemical_potential(const ScalarField& phi, const ScalarField& sigma, const PhysParams& params,
                               const PotentialSpec& potential, const LinearSolveConfig& linear,
                               ClipCounter* clips) {
    if (potential.kind == PotentialKind::FloryHuggins && phi.max_abs() >= 1.0) {
        throw SeparationError("chemical_potential: phase field reached the pure phases", separation_of(phi));
    }
    ScalarField mu = neg_laplacian(phi);
    for (std::size_t c = 0; c < mu.size(); ++c) {
        mu[c] += psi_prime(potential, phi[c], clips) - params.chi * sigma[c];
    }
    if (params.beta != 0.0) mu += nonlocal_potential(phi, params.beta, linear);
    return mu;
}

SimState make_state(ScalarField phi, ScalarField sigma, const PhysParams& params,
                    const PotentialSpec& potential, const VectorField* v, const LinearSolveConfig& linear) {
    if (!(phi.grid() == sigma.grid())) throw InvalidArgument("make_state: phi and sigma grids differ");
    SimState s;
    const Grid& g = phi.grid();
    s.v = v ? *v : VectorField(g);
    if (!(s.v.grid() == g)) throw InvalidArgument("make_state: velocity grid differs");
    if (!s.v.satisfies_no_slip()) throw InvalidArgument("make_state: velocity violates no-slip");
    s.p = ScalarField(g);
    s.mu = chemical_potential(phi, sigma, params, potential, linear);
    s.phi = std::move(phi);
    s.sigma = std::move(sigma);
    s.phi_mean0 = mean(s.phi);
    s.sigma_mean0 = mean(s.sigma);
    s.phi_mean_discrete = s.phi_mean0;
    return s;
}

PhaseUpdate step_phase(const SimState& state, const StepperConfig& cfg) {
    const Grid& g = state.phi.grid();
    const std::size_t n = g.cells();
    const PhysParams& par = cfg.params;
    const double dt = cfg.dt;
    const double c = cfg.gamma / dt + cfg.S;

    ClipCounter clips;
    // Explicit part of μ: Ψ'(φⁿ) - χσⁿ + β N(φⁿ - φ̄ⁿ).
    ScalarField g_expl(g);
    for (std::size_t i = 0; i < n; ++i) {
        g_expl[i] = psi_prime(cfg.potential, state.phi[i], &clips) - par.chi * state.sigma[i];
    }
    if (par.beta != 0.0) g_expl += nonlocal_potential(state.phi, par.beta, cfg.linear);

    const double mean_now = mean(state.phi);
    const double mean_next = (mean_now + dt * par.alpha * par.c0) / (1.0 + dt * par.alpha);

    // (I + dt(cA + A²)) φⁿ⁺¹ = φⁿ - dt div(vφ) + dt c A φⁿ - dt A g - dt α (φ̄ⁿ⁺¹ - c0),
    // solved for the zero-mean part; the mean is set by the recurrence.
    ScalarField rhs(g);
    {
        const ScalarField a_phi = neg_laplacian(state.phi);
        const ScalarField a_g = neg_laplacian(g_expl);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = dt * (c * a_phi[i] - a_g[i]);
        if (cfg.fluid) {
            const ScalarField adv = convect(state.v, state.phi);
            for (std::size_t i = 0; i < n; ++i) rhs[i] -= dt * adv[i];
        }
        rhs = zero_mean_part(rhs);
        rhs += zero_mean_part(state.phi);
    }

    const auto d1 = neg_laplacian_diagonal(g);
    const auto d2 = neg_laplacian_sq_diagonal(g);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = 1.0 + dt * (c * d1[i] + d2[i]);
    std::vector<double> t1(n), t2(n);
    auto apply = [&](std::span<const double> x, std::span<double> y) {
        apply_neg_laplacian(g, x, t1);
        apply_neg_laplacian(g, t1, t2);
        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + dt * (c * t1[i] + t2[i]);
    };
    ScalarField x = zero_mean_part(state.phi);
    const LinearApply spectral = [&](std::span<const double> in, std::span<double> out) {
        apply_neumann_symbol(g, in, out, [=](double l) { return 1.0 / (1.0 + dt * (c * l + l * l)); });
    };
    solve_spd(apply, diag, rhs.data(), x.data(), cfg.linear, true, "phase step", &spectral);

    PhaseUpdate out;
    out.phi = std::move(x);
    out.phi += mean_next;

    // μⁿ⁺¹ = c (φⁿ⁺¹ - φⁿ) + A φⁿ⁺¹ + g.
    out.mu = neg_laplacian(out.phi);
    for (std::size_t i = 0; i < n; ++i) out.mu[i] += c * (out.phi[i] - state.phi[i]) + g_expl[i];
    out.clips = clips.count();
    return out;
}

ScalarField step_sigma(const SimState& state, const ScalarField& phi_next, const StepperConfig& cfg) {
    const Grid& g = state.sigma.grid();
    const std::size_t n = g.cells();
    const double dt = cfg.dt;
    ScalarField incr(g);
    if (cfg.params.chi != 0.0) {
        incr = neg_laplacian(phi_next);
        incr *= dt * cfg.params.chi;
    }
    if (cfg.fluid) {
        const ScalarField adv = convect(state.v, state.sigma);
        for (std::size_t i = 0; i < n; ++i) incr[i] -= dt * adv[i];
    }
    ScalarField rhs = zero_mean_part(state.sigma);
    rhs += zero_mean_part(incr);
    ScalarField guess = zero_mean_part(state.sigma);
    ScalarField out = solve_screened(rhs, 1.0, dt, cfg.linear, &guess);
    // rhs has zero mean up to rounding; pin the mean to the old one.
    out = zero_mean_part(out);
    out += mean(state.sigma);
    return out;
}

VelocityUpdate step_velocity(const SimState& state, const ScalarField& phi_next, const ScalarField& mu_next,
                             const ScalarField& sigma_next, const StepperConfig& cfg) {
    const Grid& g = state.phi.grid();
    const double dt = cfg.dt;
    VelocityUpdate out;

    double hmin = g.h[0];
    for (int a = 1; a < g.dim; ++a) hmin = std::min(hmin, g.h[a]);
    out.cfl = state.v.max_abs() * dt / hmin;
    if (out.cfl > 0.8) {
        warn("CFL number " + std::to_string(out.cfl) + " exceeds 0.8 at step " + std::to_string(state.step));
    }

    ScalarField m = mu_next;
    if (cfg.params.chi != 0.0) {
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += cfg.params.chi * sigma_next[i];
    }
    ScalarField q_force;
    VectorField force = leray_project(capillary_force(m, phi_next), cfg.linear, &q_force);

    VectorField rhs = state.v;
    if (state.v.max_abs() > 0.0) {
        VectorField conv = momentum_convect(state.v);
        conv *= -dt;
        rhs += conv;
    }
    force *= dt;
    rhs += force;

    const ScalarField nu = viscosity(cfg.params, phi_next);
    const VectorField u = momentum_viscous_solve(rhs, nu, dt, cfg.linear, &state.v);

    ScalarField q;
    out.v = leray_project(u, cfg.linear, &q);
    out.p = std::move(q_force);
    q *= 1.0 / dt;
    out.p += q;
    out.p = zero_mean_part(out.p);
    return out;
}

namespace {

SimState single_step(const SimState& s, const StepperConfig& cfg) {
    PhaseUpdate ph = step_phase(s, cfg);
    ScalarField sigma = step_sigma(s, ph.phi, cfg);

    SimState next;
    if (cfg.fluid) {
        VelocityUpdate vu = step_velocity(s, ph.phi, ph.mu, sigma, cfg);
        next.v = std::move(vu.v);
        next.p = std::move(vu.p);
    } else {
        next.v = VectorField(s.phi.grid());
        next.p = ScalarField(s.phi.grid());
    }
    next.phi = std::move(ph.phi);
    next.mu = std::move(ph.mu);
    next.sigma = std::move(sigma);
    next.t = s.t + cfg.dt;
    next.step = s.step + 1;
    next.phi_mean0 = s.phi_mean0;
    next.sigma_mean0 = s.sigma_mean0;
    const double a = cfg.params.alpha;
    next.phi_mean_discrete = (s.phi_mean_discrete + cfg.dt * a * cfg.params.c0) / (1.0 + cfg.dt * a);
    next.clip_events = s.clip_events + ph.clips;
    if (!next.phi.all_finite() || !next.sigma.all_finite() || !next.v.all_finite()) {
        throw SolverError("time step produced non-finite values", 0.0, int(next.step));
    }
    return next;
}

bool separated(const SimState& s, const StepperConfig& cfg) {
    return cfg.potential.kind != PotentialKind::FloryHuggins || separation_of(s.phi) > cfg.clip_floor;
}

} // namespace

SimState step(const SimState& state, const StepperConfig& cfg) {
    SimState next = single_step(state, cfg);
    if (separated(next, cfg)) return next;

    StepperConfig half = cfg;
    half.dt = 0.5 * cfg.dt;
    SimState mid = single_step(state, half);
    SimState retry = single_step(mid, half);
    retry.step = state.step + 1;
    if (!separated(mid, cfg) || !separated(retry, cfg)) {
        throw SeparationError("time step at t = " + std::to_string(state.t) +
                                  " left the admissible range even with dt/2",
                              std::min(separation_of(mid.phi), separation_of(retry.phi)));
    }
    return retry;
}

SimState run(SimState state, const StepperConfig& cfg, double t_end, const RunCallbacks& cb) {
    cfg.validate();
    if (cb.on_step) cb.on_step(state);
    const double eps = 1e-9 * cfg.dt;
    while (state.t < t_end - eps) {
        StepperConfig local = cfg;
        if (state.t + cfg.dt > t_end + eps) local.dt = t_end - state.t;
        state = step(state, local);
        if (cb.on_step) cb.on_step(state);
        if (cb.checkpoint_every > 0 && cb.on_checkpoint && state.step % cb.checkpoint_every == 0) {
            cb.on_checkpoint(state);
        }
        if (cb.stop && cb.stop(state)) break;
    }
    return state;
}

} // namespace chns
