#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "chns/diagnostics.hpp"
#include "chns/error.hpp"
#include "chns/evolution.hpp"
#include "chns/operators.hpp"
#include "chns/stationary.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

using namespace chns;
using test::rel_diff;
using test::to_eigen;

namespace {

constexpr LinearSolveConfig kTight{SolverMethod::ConjugateGradient, 1e-13};

Eigen::VectorXd psi_prime_vec(const PotentialSpec& pot, const ScalarField& phi) {
    Eigen::VectorXd out(Eigen::Index(phi.size()));
    for (std::size_t c = 0; c < phi.size(); ++c) out[Eigen::Index(c)] = psi_prime(pot, phi[c]);
    return out;
}

Eigen::VectorXd centered(const Eigen::VectorXd& v) { return v.array() - v.mean(); }

// Captures warnings for the lifetime of the object.
struct WarningCapture {
    std::vector<std::string> messages;
    WarningCapture() {
        set_warning_sink([this](const std::string& m) { messages.push_back(m); });
    }
    ~WarningCapture() {
        set_warning_sink([](const std::string&) {});
    }
};

StepperConfig quartic_config(double dt) {
    StepperConfig cfg;
    cfg.dt = dt;
    cfg.S = 2.0;
    cfg.linear = kTight;
    return cfg;
}

} // namespace

TEST_CASE("chemical potential of a uniform state") {
    const Grid g = make_grid(8, 6, 1.0, 1.0);
    PhysParams p;
    p.chi = 0.4;
    p.beta = 0.7;
    for (const auto& pot : {PotentialSpec::quartic(), PotentialSpec::flory_huggins(1.0, 2.0)}) {
        const ScalarField mu = chemical_potential(ScalarField(g, 0.3), ScalarField(g, -0.5), p, pot);
        const double expect = psi_prime(pot, 0.3) + 0.4 * 0.5;
        for (double v : mu.data()) CHECK(v == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("chemical potential linearizes around zero") {
    const Grid g = make_grid(64, 8, 4.0, 1.0);
    const double a = 1e-3;
    const double k = std::numbers::pi / 4.0;
    const ScalarField phi = test::sample(g, [&](double x, double, double) { return a * std::cos(k * x); });
    const ScalarField mu = chemical_potential(phi, ScalarField(g), PhysParams{}, PotentialSpec::quartic());
    // Discrete symbol of -Δ on this mode, then Ψ''(0) = -1.
    const double lam = 4.0 / (g.h[0] * g.h[0]) * std::pow(std::sin(k * g.h[0] / 2.0), 2);
    ScalarField lin = phi;
    lin *= lam - 1.0;
    CHECK(norm_l2(mu - lin) / norm_l2(lin) < 1e-3);
    // The continuum symbol (π/L)² is within discretization error.
    ScalarField cont = phi;
    cont *= k * k - 1.0;
    CHECK(norm_l2(mu - cont) / norm_l2(cont) < 1e-2);
}

TEST_CASE("chemical potential matches a dense assembly") {
    const Grid g = make_grid(8, 8, 1.0, 1.0);
    PhysParams p;
    p.chi = 0.6;
    p.beta = 1.3;
    const auto pot = PotentialSpec::flory_huggins(1.0, 2.0);
    const ScalarField phi = test::random_field(g, 3, -0.8, 0.8);
    const ScalarField sigma = test::random_field(g, 4);
    const ScalarField mu = chemical_potential(phi, sigma, p, pot, kTight);

    const Eigen::MatrixXd A = test::dense_neg_laplacian(g);
    const Eigen::VectorXd f = to_eigen(phi.data());
    const Eigen::VectorXd expect = A * f + psi_prime_vec(pot, phi) - p.chi * to_eigen(sigma.data()) +
                                   p.beta * (test::dense_pinv(A) * centered(f));
    CHECK((to_eigen(mu.data()) - expect).lpNorm<Eigen::Infinity>() < 1e-10);

    ScalarField bad = phi;
    bad[5] = 1.0;
    CHECK_THROWS_AS(chemical_potential(bad, sigma, p, pot), SeparationError);
}

TEST_CASE("default stabilization") {
    const Grid g = make_grid(8, 8, 2.0, 1.0);
    const ScalarField phi(g, 0.1);
    CHECK(default_stabilization(PotentialSpec::quartic(), PhysParams{}, phi) == 1.0);

    const auto fh = PotentialSpec::flory_huggins(1.0, 2.0);
    const double b = binodal_value(fh);
    CHECK(default_stabilization(fh, PhysParams{}, phi) == doctest::Approx(0.5 / (1.0 - b * b)));
    ScalarField wide = phi;
    wide[0] = 0.99;
    CHECK(default_stabilization(fh, PhysParams{}, wide) == doctest::Approx(0.5 / (1.0 - 0.99 * 0.99)));
    // The stabilization bounds (Ψ'' + θ0)/2 over the admissible range.
    CHECK(default_stabilization(fh, PhysParams{}, wide) >= 0.5 * (psi_double_prime(fh, 0.99) + 2.0) - 1e-12);

    PhysParams p;
    p.beta = 0.5;
    const double lambda1 = std::pow(std::numbers::pi / 2.0, 2);
    CHECK(default_stabilization(PotentialSpec::quartic(), p, phi) == doctest::Approx(1.0 + 0.25 / lambda1));

    // Chemotaxis deepens the effective quench and adds its concave part.
    PhysParams c;
    c.chi = 0.5;
    const double be = binodal_value(PotentialSpec::flory_huggins(1.0, 2.25));
    CHECK(be > b);
    CHECK(default_stabilization(fh, c, phi) == doctest::Approx(0.5 / (1.0 - be * be) + 0.125));
    CHECK(default_stabilization(PotentialSpec::quartic(), c, phi) == doctest::Approx(1.125));
}

TEST_CASE("stepper configuration is validated") {
    StepperConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.S = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.gamma = -0.1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.params.nu1 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);

    const Grid g = make_grid(8, 8, 1.0, 1.0);
    CHECK_THROWS_AS(run(make_state(ScalarField(g), ScalarField(g), {}, {}), StepperConfig{.dt = -1.0}, 1.0),
                    InvalidArgument);
}

TEST_CASE("make_state checks its inputs") {
    const Grid g = make_grid(8, 8, 1.0, 1.0);
    const Grid h = make_grid(8, 6, 1.0, 1.0);
    CHECK_THROWS_AS(make_state(ScalarField(g), ScalarField(h), {}, {}), InvalidArgument);
    VectorField v(g);
    v.flat()[0] = 1.0;  // a wall-normal face
    CHECK_THROWS_AS(make_state(ScalarField(g), ScalarField(g), {}, {}, &v), InvalidArgument);

    const ScalarField phi = test::random_field(g, 5, -0.5, 0.5);
    const SimState s = make_state(phi, ScalarField(g, 0.2), {}, {});
    CHECK(s.t == 0.0);
    CHECK(s.step == 0);
    CHECK(s.phi_mean0 == doctest::Approx(mean(phi)));
    CHECK(s.sigma_mean0 == doctest::Approx(0.2));
    CHECK(s.mu == chemical_potential(phi, ScalarField(g, 0.2), {}, {}));
}

TEST_CASE("uniform state at c0 is a fixed point") {
    const Grid g = make_grid(12, 10, 2.0, 1.5);
    StepperConfig cfg = quartic_config(0.1);
    cfg.potential = PotentialSpec::flory_huggins(1.0, 2.0);
    cfg.params.alpha = 0.7;
    cfg.params.c0 = 0.25;
    cfg.params.chi = 0.3;
    cfg.params.beta = 0.2;
    SimState s = make_state(ScalarField(g, 0.25), ScalarField(g, 0.4), cfg.params, cfg.potential);
    for (int n = 0; n < 5; ++n) s = step(s, cfg);
    for (double v : s.phi.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-13));
    for (double v : s.sigma.data()) CHECK(v == doctest::Approx(0.4).epsilon(1e-13));
    CHECK(s.v.max_abs() < 1e-13);
    CHECK(s.step == 5);
    CHECK(s.t == doctest::Approx(0.5));
}

TEST_CASE("phase step matches a dense solve of the stabilized system") {
    const Grid g = make_grid(8, 8, 2.0, 2.0);
    StepperConfig cfg;
    cfg.dt = 0.03;
    cfg.S = 1.7;
    cfg.gamma = 0.2;
    cfg.linear = kTight;
    cfg.potential = PotentialSpec::flory_huggins(1.0, 2.0);
    cfg.params.chi = 0.5;
    cfg.params.beta = 0.4;
    cfg.params.alpha = 0.8;
    cfg.params.c0 = -0.2;
    cfg.fluid = false;
    const SimState s = make_state(test::random_field(g, 7, -0.6, 0.6), test::random_field(g, 8), cfg.params,
                                  cfg.potential, nullptr, kTight);
    const PhaseUpdate up = step_phase(s, cfg);

    const Eigen::MatrixXd A = test::dense_neg_laplacian(g);
    const auto n = A.rows();
    const double dt = cfg.dt, c = cfg.gamma / dt + cfg.S;
    const Eigen::VectorXd f = to_eigen(s.phi.data());
    const Eigen::VectorXd gexp = psi_prime_vec(cfg.potential, s.phi) - cfg.params.chi * to_eigen(s.sigma.data()) +
                                 cfg.params.beta * (test::dense_pinv(A) * centered(f));
    const double mean_next = (f.mean() + dt * cfg.params.alpha * cfg.params.c0) / (1.0 + dt * cfg.params.alpha);
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) + dt * (c * A + A * A);
    const Eigen::VectorXd rhs = f + dt * (c * A * f - A * gexp) -
                                dt * cfg.params.alpha * (mean_next - cfg.params.c0) * Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd phi_next = M.ldlt().solve(rhs);
    CHECK(rel_diff(to_eigen(up.phi.data()), phi_next) < 1e-10);
    CHECK(mean(up.phi) == doctest::Approx(mean_next).epsilon(1e-14));

    const Eigen::VectorXd mu_next = c * (phi_next - f) + A * phi_next + gexp;
    CHECK(rel_diff(to_eigen(up.mu.data()), mu_next) < 1e-9);
    // Discrete Cahn–Hilliard relation: (φ⁺ - φ)/dt = -A μ⁺ - α(φ̄⁺ - c0).
    const Eigen::VectorXd lhs = (to_eigen(up.phi.data()) - f) / dt;
    const Eigen::VectorXd law = -A * to_eigen(up.mu.data()) -
                                cfg.params.alpha * (mean_next - cfg.params.c0) * Eigen::VectorXd::Ones(n);
    CHECK(rel_diff(lhs, law) < 1e-8);
}

TEST_CASE("mean recurrences") {
    const Grid g = make_grid(16, 16, 4.0, 4.0);
    SUBCASE("conserved without reaction") {
        StepperConfig cfg = quartic_config(0.05);
        SimState s = make_state(test::random_field(g, 11, -0.3, 0.5), test::random_field(g, 12), cfg.params,
                                cfg.potential);
        s.v = test::random_velocity(g, 13);
        s.v = leray_project(s.v, kTight);
        s.v *= 0.1;
        const double m0 = mean(s.phi), s0 = mean(s.sigma);
        for (int n = 0; n < 20; ++n) {
            s = step(s, cfg);
            CHECK(std::abs(mean(s.phi) - m0) < 1e-13);
            CHECK(std::abs(mean(s.sigma) - s0) < 1e-12);
        }
    }
    SUBCASE("implicit Oono decay") {
        StepperConfig cfg = quartic_config(0.1);
        cfg.params.alpha = 1.0;
        cfg.params.c0 = 0.0;
        ScalarField phi = test::random_zero_mean(g, 14);
        phi *= 0.1;
        phi += 0.5;
        SimState s = make_state(phi, ScalarField(g), cfg.params, cfg.potential);
        for (int n = 1; n <= 30; ++n) {
            s = step(s, cfg);
            CHECK(mean(s.phi) == doctest::Approx(0.5 * std::pow(1.1, -n)).epsilon(1e-12));
            CHECK(std::abs(mean(s.phi) - s.phi_mean_discrete) < 1e-13);
        }
        // The recurrence tracks the continuum exponential to first order in dt.
        const MassReport r = mass_report(s, cfg.params);
        CHECK(r.abs_error < 0.5 * 0.05 * s.t * std::exp(-s.t) + 1e-3);
    }
}

TEST_CASE("nutrient step") {
    const Grid g = make_grid(8, 8, 1.0, 1.0);
    StepperConfig cfg = quartic_config(0.02);
    cfg.fluid = false;
    SUBCASE("constants are fixed points") {
        const SimState s = make_state(ScalarField(g), ScalarField(g, 0.7), cfg.params, cfg.potential);
        const ScalarField out = step_sigma(s, test::random_field(g, 1), cfg);
        for (double v : out.data()) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
    }
    SUBCASE("active transport matches a dense solve") {
        cfg.params.chi = 0.8;
        const ScalarField phi_next = test::random_field(g, 2, -0.5, 0.5);
        const SimState s = make_state(ScalarField(g), ScalarField(g, 0.3), cfg.params, cfg.potential);
        const ScalarField out = step_sigma(s, phi_next, cfg);
        const Eigen::MatrixXd A = test::dense_neg_laplacian(g);
        const auto n = A.rows();
        const Eigen::VectorXd expect =
            (Eigen::MatrixXd::Identity(n, n) + cfg.dt * A)
                .ldlt()
                .solve(Eigen::VectorXd::Constant(n, 0.3) + cfg.dt * cfg.params.chi * (A * to_eigen(phi_next.data())));
        CHECK(rel_diff(to_eigen(out.data()), expect) < 1e-11);
        CHECK(std::abs(mean(out) - 0.3) < 1e-14);
        // σ is pushed toward χφ: the new deviation correlates positively with φ.
        CHECK(dot(zero_mean_part(out), zero_mean_part(phi_next)) > 0.0);
    }
}

TEST_CASE("velocity step") {
    const Grid g = make_grid(16, 16, 2.0, 2.0);
    StepperConfig cfg = quartic_config(0.01);
    cfg.params.chi = 0.5;
    cfg.params.nu1 = 1.0;
    cfg.params.nu2 = 2.0;
    SUBCASE("no force, no motion") {
        const SimState s = make_state(ScalarField(g, 0.1), ScalarField(g), cfg.params, cfg.potential);
        const VelocityUpdate up = step_velocity(s, s.phi, test::random_field(g, 3), test::random_field(g, 4), cfg);
        CHECK(up.v.max_abs() == 0.0);
        CHECK(up.cfl == 0.0);
    }
    SUBCASE("result is divergence-free and no-slip") {
        SimState s = make_state(test::random_field(g, 5, -0.5, 0.5), test::random_field(g, 6), cfg.params,
                                cfg.potential);
        s.v = leray_project(test::random_velocity(g, 7), kTight);
        for (int n = 0; n < 3; ++n) {
            s = step(s, cfg);
            CHECK(s.v.satisfies_no_slip());
            const double scale = s.v.max_abs() / g.h[0];
            CHECK(divergence(s.v).max_abs() < 1e-10 * scale);
            CHECK(std::abs(mean(s.p)) < 1e-12);
        }
    }
    SUBCASE("CFL warning") {
        WarningCapture cap;
        SimState s = make_state(ScalarField(g), ScalarField(g), cfg.params, cfg.potential);
        s.v = leray_project(test::random_velocity(g, 8), kTight);
        s.v *= 100.0 / s.v.max_abs();
        const VelocityUpdate up = step_velocity(s, s.phi, s.mu, s.sigma, cfg);
        CHECK(up.cfl == doctest::Approx(100.0 * cfg.dt / g.h[0]));
        REQUIRE(cap.messages.size() == 1);
        CHECK(cap.messages[0].find("CFL") != std::string::npos);
    }
}

TEST_CASE("no-flow equilibrium stays at rest") {
    const Grid g = make_grid(24, 24, 4.0, 4.0);
    PhysParams p;
    p.chi = 0.4;
    p.nu1 = 1.0;
    p.nu2 = 3.0;
    const auto pot = PotentialSpec::flory_huggins(1.0, 2.0);
    const ScalarField phi0 = test::sample(g, [](double x, double y, double) {
        return 0.6 * std::tanh((std::hypot(x, y) - 2.0) / 0.5);
    });
    ChoFlowOptions opts;
    opts.tol = 1e-10;
    opts.dt = 0.5;
    const EquilibriumResult eq = cho_flow(phi0, ScalarField(g, 0.1), p, pot, opts);
    REQUIRE(eq.converged);
    CHECK(zero_mean_part(eq.phi_inf).max_abs() > 0.1);  // genuinely two-phase

    StepperConfig cfg;
    cfg.dt = 0.01;
    cfg.potential = pot;
    cfg.params = p;
    cfg.linear = kTight;
    cfg.S = default_stabilization(pot, p, eq.phi_inf);
    SimState s = make_state(eq.phi_inf, eq.sigma_inf, p, pot, nullptr, kTight);
    for (int n = 0; n < 5; ++n) {
        s = step(s, cfg);
        CHECK(norm_l2(s.v) < 1e-8);
    }
}

TEST_CASE("Flory-Huggins separation guard") {
    const Grid g = make_grid(8, 8, 1.0, 1.0);
    StepperConfig cfg;
    cfg.dt = 1.0;
    cfg.potential = PotentialSpec::flory_huggins(1.0, 2.0);
    cfg.params.alpha = 1e8;
    cfg.params.c0 = 1.0 - 1e-8;
    cfg.fluid = false;
    const SimState s = make_state(ScalarField(g, 0.5), ScalarField(g), cfg.params, cfg.potential);
    try {
        step(s, cfg);
        FAIL("expected SeparationError");
    } catch (const SeparationError& e) {
        CHECK(e.separation() < cfg.clip_floor);
    }
    // The same pull toward the pure phase is harmless with a quartic potential.
    cfg.potential = PotentialSpec::quartic();
    CHECK_NOTHROW(step(s, cfg));
}

TEST_CASE("run lands on t_end and honours callbacks") {
    const Grid g = make_grid(12, 12, 2.0, 2.0);
    StepperConfig cfg = quartic_config(0.03);
    const SimState s0 = make_state(test::random_field(g, 9, -0.1, 0.1), ScalarField(g), cfg.params, cfg.potential);

    const SimState same = run(s0, cfg, 0.0);
    CHECK(same.phi == s0.phi);
    CHECK(same.step == 0);

    int calls = 0, checkpoints = 0;
    RunCallbacks cb;
    cb.on_step = [&](const SimState&) { ++calls; };
    cb.on_checkpoint = [&](const SimState& s) {
        ++checkpoints;
        CHECK(s.step % 2 == 0);
    };
    cb.checkpoint_every = 2;
    const SimState end = run(s0, cfg, 0.1, cb);
    CHECK(end.t == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(end.step == 4);  // three full steps and one shortened
    CHECK(calls == 5);
    CHECK(checkpoints == 2);

    RunCallbacks stop;
    stop.stop = [](const SimState& s) { return s.step == 2; };
    CHECK(run(s0, cfg, 10.0, stop).step == 2);
}

TEST_CASE("trajectories are deterministic") {
    const Grid g = make_grid(16, 16, 4.0, 4.0);
    StepperConfig cfg = quartic_config(0.05);
    cfg.params.chi = 0.3;
    cfg.params.nu2 = 2.0;
    auto go = [&] {
        SimState s = make_state(test::random_field(g, 21, -0.2, 0.2), test::random_field(g, 22), cfg.params,
                                cfg.potential);
        return run(s, cfg, 0.5);
    };
    const SimState a = go(), b = go();
    CHECK(a.phi == b.phi);
    CHECK(a.sigma == b.sigma);
    CHECK(a.v == b.v);
    CHECK(a.p == b.p);
}

TEST_CASE("spinodal decomposition dissipates energy every step") {
    const Grid g = make_grid(32, 32, 16.0, 16.0);
    StepperConfig cfg = quartic_config(0.05);
    SimState s = make_state(test::random_field(g, 42, -0.05, 0.05), ScalarField(g), cfg.params, cfg.potential);
    auto energy = [&](const SimState& st) {
        return 0.5 * dot(st.v, st.v) + free_energy(st.phi, st.sigma, cfg.params, cfg.potential);
    };
    double e = energy(s);
    const double e0 = e;
    int increases = 0;
    for (int n = 0; n < 300; ++n) {
        s = step(s, cfg);
        const double en = energy(s);
        if (en > e + 1e-12 * std::abs(e)) ++increases;
        e = en;
    }
    CHECK(increases == 0);
    CHECK(e < e0 - 1.0);  // the run actually coarsened
}
