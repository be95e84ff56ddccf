#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "chns/diagnostics.hpp"
#include "chns/error.hpp"
#include "chns/operators.hpp"
#include "chns/stationary.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace chns;
using test::rel_diff;
using test::to_eigen;

namespace {

constexpr LinearSolveConfig kTight{SolverMethod::ConjugateGradient, 1e-13};

// Term-by-term free energy from dense matrices.
double dense_free_energy(const ScalarField& phi, const ScalarField& sigma, const PhysParams& p,
                         const PotentialSpec& pot) {
    const Grid& g = phi.grid();
    const Eigen::MatrixXd A = test::dense_neg_laplacian(g);
    const Eigen::VectorXd f = to_eigen(phi.data());
    const Eigen::VectorXd s = to_eigen(sigma.data());
    const Eigen::VectorXd fc = f.array() - f.mean();
    double bulk = 0.0;
    for (double v : phi.data()) bulk += psi(pot, v);
    const double dv = g.cell_volume();
    return dv * (0.5 * f.dot(A * f) + bulk + 0.5 * s.squaredNorm() - p.chi * s.dot(f) +
                 0.5 * p.beta * fc.dot(test::dense_pinv(A) * fc));
}

std::vector<double> power_series(const std::vector<double>& t, double p, double scale = 1.0) {
    std::vector<double> d;
    for (double x : t) d.push_back(scale * std::pow(1.0 + x, -p));
    return d;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> t;
    for (int i = 0; i < n; ++i) t.push_back(a + (b - a) * i / (n - 1));
    return t;
}

} // namespace

TEST_CASE("free energy of uniform states") {
    const Grid g = make_grid(8, 6, 2.0, 1.5);
    PhysParams p;
    p.chi = 0.7;
    p.beta = 2.0;
    for (const auto& pot : {PotentialSpec::quartic(), PotentialSpec::flory_huggins(1.0, 2.0)}) {
        const double c = -0.4, s = 0.9;
        const double expect = g.volume() * (psi(pot, c) + 0.5 * s * s - p.chi * s * c);
        CHECK(free_energy(ScalarField(g, c), ScalarField(g, s), p, pot) == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("free energy matches a dense term-by-term oracle") {
    const Grid g = make_grid(8, 8, 1.0, 1.0);
    PhysParams p;
    p.chi = 0.45;
    p.beta = 0.8;
    for (const auto& pot : {PotentialSpec::quartic(), PotentialSpec::flory_huggins(1.0, 2.0)}) {
        const ScalarField phi = test::random_field(g, 1, -0.9, 0.9);
        const ScalarField sigma = test::random_field(g, 2);
        const double F = free_energy(phi, sigma, p, pot, kTight);
        CHECK(std::abs(F - dense_free_energy(phi, sigma, p, pot)) < 1e-10 * std::abs(F));
    }
}

TEST_CASE("free energy symmetry, shift identity and lower bound") {
    const Grid g = make_grid(16, 12, 2.0, 1.5);
    PhysParams p;
    p.chi = 0.6;
    p.beta = 0.3;
    for (const auto& pot : {PotentialSpec::quartic(), PotentialSpec::flory_huggins(1.0, 2.0)}) {
        for (std::uint64_t seed = 3; seed < 8; ++seed) {
            const ScalarField phi = test::random_field(g, seed, -0.95, 0.95);
            const ScalarField sigma = test::random_field(g, seed + 100, -2.0, 2.0);
            const double F = free_energy(phi, sigma, p, pot, kTight);
            CHECK(free_energy(-1.0 * phi, -1.0 * sigma, p, pot, kTight) == doctest::Approx(F).epsilon(1e-13));

            ScalarField w = sigma;
            for (std::size_t c = 0; c < w.size(); ++c) w[c] -= p.chi * phi[c];
            const double shift = F - reduced_free_energy(phi, p, pot, kTight) - 0.5 * dot(w, w);
            CHECK(std::abs(shift) < 1e-10 * std::max(1.0, std::abs(F)));

            CHECK(F >= free_energy_lower_bound(g, p, pot));
        }
    }
}

TEST_CASE("free energy lower bound") {
    const Grid g = make_grid(8, 8, 2.0, 1.0);
    PhysParams p;
    CHECK(free_energy_lower_bound(g, p, PotentialSpec::quartic()) == doctest::Approx(0.0).epsilon(1e-12));
    p.chi = 0.5;
    // Quartic: min of ¼(r² - 1)² - χ² r²/2 is -χ²/2 - χ⁴/4.
    CHECK(free_energy_lower_bound(g, p, PotentialSpec::quartic()) ==
          doctest::Approx(2.0 * (-0.125 - 0.015625)).epsilon(1e-10));
    // The bound is attained by the uniform state at the minimizer with σ = χφ.
    const double r = std::sqrt(1.25);
    CHECK(free_energy(ScalarField(g, r), ScalarField(g, 0.5 * r), p, PotentialSpec::quartic()) ==
          doctest::Approx(free_energy_lower_bound(g, p, PotentialSpec::quartic())).epsilon(1e-10));
    const auto fh = PotentialSpec::flory_huggins(1.0, 2.0);
    const double b = binodal_value(fh);
    p.chi = 0.0;
    CHECK(free_energy_lower_bound(g, p, fh) == doctest::Approx(g.volume() * psi(fh, b)).epsilon(1e-9));
}

TEST_CASE("dissipation") {
    const Grid g = make_grid(8, 8, 1.0, 1.0);
    PhysParams p;
    p.chi = 0.3;
    p.nu1 = 1.7;
    p.nu2 = 1.7;
    const auto pot = PotentialSpec::quartic();

    SUBCASE("vanishes at a uniform equilibrium") {
        const SimState s = make_state(ScalarField(g, 0.2), ScalarField(g, 0.5), p, pot);
        CHECK(std::abs(dissipation(s, p, pot)) < 1e-12);
    }
    SUBCASE("positive for any nonzero velocity") {
        SimState s = make_state(ScalarField(g, 0.2), ScalarField(g, 0.5), p, pot);
        s.v = leray_project(test::random_velocity(g, 4), kTight);
        CHECK(dissipation(s, p, pot) > 0.0);
    }
    SUBCASE("matches a dense oracle") {
        SimState s = make_state(test::random_field(g, 5, -0.7, 0.7), test::random_field(g, 6), p, pot);
        s.v = test::random_velocity(g, 7);
        const test::FaceLayout L(g);
        // Constant ν: ∫2ν|Dv|² = v·Kv with K = -ν(Δ_vec + ∇div).
        const Eigen::MatrixXd K =
            -p.nu1 * (test::dense_vector_laplacian(L) + test::dense_gradient(L) * test::dense_divergence(L));
        const Eigen::MatrixXd A = test::dense_neg_laplacian(g);
        const Eigen::VectorXd f = to_eigen(s.phi.data());
        Eigen::VectorXd mu = A * f - p.chi * to_eigen(s.sigma.data());
        for (Eigen::Index c = 0; c < mu.size(); ++c) mu[c] += psi_prime(pot, f[c]);
        const Eigen::VectorXd w = to_eigen(s.sigma.data()) - p.chi * f;
        const Eigen::VectorXd v = test::flat(s.v);
        const double expect = g.cell_volume() * (v.dot(K * v) + mu.dot(A * mu) + w.dot(A * w));
        CHECK(dissipation(s, p, pot) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("mass report") {
    const Grid g = make_grid(8, 8, 1.0, 1.0);
    PhysParams p;
    p.alpha = 1.0;
    SimState s = make_state(ScalarField(g, 0.5), ScalarField(g, 0.1), p, PotentialSpec::quartic());
    s.t = std::log(2.0);
    MassReport r = mass_report(s, p);
    CHECK(r.predicted == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(r.abs_error == doctest::Approx(0.25));
    CHECK(r.sigma_drift < 1e-15);

    p.alpha = 0.0;
    r = mass_report(s, p);
    CHECK(r.predicted == 0.5);
    CHECK(r.discrete_error < 1e-13);
}

TEST_CASE("records and the energy balance") {
    const Grid g = make_grid(16, 16, 8.0, 8.0);
    StepperConfig cfg;
    cfg.dt = 0.05;
    cfg.S = 2.0;
    cfg.linear = kTight;
    cfg.params.chi = 0.2;

    SUBCASE("stationary state") {
        const SimState s0 = make_state(ScalarField(g, 0.1), ScalarField(g, 0.3), cfg.params, cfg.potential);
        const DiagnosticsRecord r0 = make_record(s0, cfg.params, cfg.potential);
        CHECK(std::isnan(r0.energy_balance_residual));
        const SimState s1 = step(s0, cfg);
        const DiagnosticsRecord r1 = make_record(s1, cfg.params, cfg.potential, &r0);
        CHECK(std::abs(r1.energy_balance_residual) < 1e-10);
        CHECK(std::abs(r1.Lambda) < 1e-10);
        CHECK(r1.separation == doctest::Approx(0.9));
    }
    SUBCASE("dissipative without reaction") {
        cfg.dt = 0.01;
        SimState s = make_state(test::random_field(g, 8, -0.1, 0.1), ScalarField(g), cfg.params, cfg.potential);
        DiagnosticsRecord prev = make_record(s, cfg.params, cfg.potential);
        for (int n = 0; n < 40; ++n) {
            s = step(s, cfg);
            const DiagnosticsRecord r = make_record(s, cfg.params, cfg.potential, &prev);
            // The defect is first order in dt; the energy itself never rises.
            CHECK(r.energy_balance_residual <= 0.1 * r.D_diss);
            CHECK(r.E_total <= prev.E_total);
            CHECK(r.D_diss >= 0.0);
            CHECK(r.E_total == doctest::Approx(0.5 * dot(s.v, s.v) + r.F_free).epsilon(1e-14));
            CHECK(r.F_free >= free_energy_lower_bound(g, cfg.params, cfg.potential));
            CHECK(r.step == prev.step + 1);
            prev = r;
        }
    }
    SUBCASE("non-consecutive records are rejected") {
        DiagnosticsRecord a, b;
        b.step = 2;
        b.t = 1.0;
        CHECK_THROWS_AS(energy_balance_residual(a, b, cfg.params), InvalidArgument);
        b.step = 1;
        b.t = 0.0;
        CHECK_THROWS_AS(energy_balance_residual(a, b, cfg.params), InvalidArgument);
    }
}

TEST_CASE("higher-order monitor") {
    const Grid g = make_grid(16, 16, 8.0, 8.0);
    PhysParams p;
    p.chi = 0.3;
    const auto pot = PotentialSpec::quartic();
    const SimState eq = make_state(ScalarField(g, 0.3), ScalarField(g, 0.1), p, pot);
    CHECK(std::abs(higher_monitor(eq, p, pot)) < 1e-10);
    CHECK_THROWS_AS(higher_monitor(eq, p, pot, 0.0), InvalidArgument);
    CHECK_THROWS_AS(higher_monitor(eq, p, pot, 1.0), InvalidArgument);

    // Along a run without reaction, Λ dominates half of its quadratic part.
    StepperConfig cfg;
    cfg.dt = 0.05;
    cfg.S = 2.0;
    cfg.params = p;
    SimState s = make_state(test::random_field(g, 9, -0.1, 0.1), test::random_field(g, 10, -0.1, 0.1), p, pot);
    const double a1 = 0.1;
    for (int n = 0; n < 60; ++n) {
        s = step(s, cfg);
        const ScalarField mu = chemical_potential(s.phi, s.sigma, p, pot);
        ScalarField w = s.sigma;
        for (std::size_t c = 0; c < w.size(); ++c) w[c] -= p.chi * s.phi[c];
        const double quarter =
            0.25 * velocity_grad_norm_sq(s.v) + 0.25 * a1 * grad_norm_sq(mu) + 0.25 * grad_norm_sq(w);
        CHECK(higher_monitor(s, p, pot, a1) >= quarter);
        CHECK(make_record(s, p, pot, nullptr, a1).Lambda == doctest::Approx(higher_monitor(s, p, pot, a1)));
    }
}

TEST_CASE("distance to equilibrium") {
    const Grid g = make_grid(12, 12, 3.0, 3.0);
    const PhysParams p;
    const auto pot = PotentialSpec::quartic();
    const ScalarField phi = test::random_field(g, 11, -0.5, 0.5);
    const ScalarField sigma = test::random_field(g, 12);
    const SimState s = make_state(phi, sigma, p, pot);
    const EquilibriumDistance zero = distance_to_equilibrium(s, phi, sigma);
    CHECK(zero.total() < 1e-12);
    CHECK(zero.dual_phi < 1e-12);
    CHECK(zero.dual_sigma < 1e-12);

    const ScalarField other = test::random_zero_mean(g, 13);
    const EquilibriumDistance d = distance_to_equilibrium(s, phi + other, sigma, kTight);
    // ||f||_{V0'} ≤ ||f|| / sqrt(λ1) for zero-mean f, λ1 the first nonzero eigenvalue.
    const double lambda1 = 4.0 / (g.h[0] * g.h[0]) * std::pow(std::sin(std::numbers::pi / (2.0 * g.n[0])), 2);
    CHECK(d.dual_phi <= norm_l2(other) / std::sqrt(lambda1) * (1.0 + 1e-12));
    CHECK(d.dual_phi > 0.0);
    CHECK(d.h1_phi == doctest::Approx(std::sqrt(dot(other, other) + grad_norm_sq(other))));

    const Grid h = make_grid(12, 10, 3.0, 3.0);
    CHECK_THROWS_AS(distance_to_equilibrium(s, ScalarField(h), ScalarField(h)), InvalidArgument);
}

TEST_CASE("convergence rate fit") {
    const std::vector<double> t = linspace(0.0, 200.0, 400);
    SUBCASE("power laws") {
        const RateFit f1 = fit_convergence_rate(t, power_series(t, 1.0));
        CHECK(f1.exponent == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(f1.kappa == doctest::Approx(1.0 / 3.0).epsilon(0.01));
        CHECK_FALSE(f1.flagged_exponential);
        const RateFit f3 = fit_convergence_rate(t, power_series(t, 3.0));
        CHECK(f3.kappa == doctest::Approx(3.0 / 7.0).epsilon(0.01));
        CHECK(f3.kappa < 0.5);
        CHECK(f3.r_squared > 0.999999);
    }
    SUBCASE("exponential decay is flagged") {
        const std::vector<double> te = linspace(0.0, 30.0, 300);
        std::vector<double> d;
        for (double x : te) d.push_back(std::exp(-x));
        const RateFit f = fit_convergence_rate(te, d);
        CHECK(f.flagged_exponential);
        CHECK(f.exp_rate == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("scale invariance") {
        const RateFit a = fit_convergence_rate(t, power_series(t, 2.0));
        const RateFit b = fit_convergence_rate(t, power_series(t, 2.0, 1e-7));
        CHECK(a.kappa == doctest::Approx(b.kappa).epsilon(1e-12));
        CHECK(a.flagged_exponential == b.flagged_exponential);
        CHECK(a.t_begin == b.t_begin);
    }
    SUBCASE("default and explicit windows") {
        // Transient: d grows to its max at t = 10 before decaying.
        std::vector<double> d = power_series(t, 1.0);
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] < 10.0) d[i] = 5.0 * (1.0 + t[i]);
        }
        const RateFit f = fit_convergence_rate(t, d);
        CHECK(f.t_begin > 10.0);
        CHECK(f.t_end == 200.0);
        CHECK(f.kappa == doctest::Approx(1.0 / 3.0).epsilon(0.01));
        const RateFit w = fit_convergence_rate(t, power_series(t, 1.0), RateWindow{50.0, 100.0});
        CHECK(w.t_begin == 50.0);
        CHECK(w.t_end == 100.0);
        CHECK(w.points == 100);
    }
    SUBCASE("errors") {
        const std::vector<double> few = linspace(0.0, 1.0, 7);
        CHECK_THROWS_AS(fit_convergence_rate(few, power_series(few, 1.0), RateWindow{0.0, 1.0}), InvalidArgument);
        std::vector<double> bad = power_series(t, 1.0);
        bad[3] = 0.0;
        CHECK_THROWS_AS(fit_convergence_rate(t, bad), InvalidArgument);
        CHECK_THROWS_AS(fit_convergence_rate(t, power_series(t, -1.0)), InvalidArgument);
        CHECK_THROWS_AS(fit_convergence_rate(t, power_series(t, 1.0), RateWindow{100.0, 50.0}), InvalidArgument);
        std::vector<double> tt = t;
        tt[5] = tt[4];
        CHECK_THROWS_AS(fit_convergence_rate(tt, power_series(t, 1.0)), InvalidArgument);
    }
}

TEST_CASE("modified energy scan") {
    PhysParams p;
    p.alpha = 1.0;
    p.c0 = 0.0;
    const double m0 = 0.5;
    // E increases by at most 0.01 per unit time while e^{-t}|m0| decays.
    std::vector<DiagnosticsRecord> recs;
    for (int i = 0; i <= 20; ++i) {
        DiagnosticsRecord r;
        r.t = 0.1 * i;
        r.step = std::uint64_t(i);
        r.E_total = 1.0 + 0.01 * r.t;
        recs.push_back(r);
    }
    const ModifiedEnergyScan scan = scan_modified_energy(recs, m0, p, 10.0, 1001);
    REQUIRE(scan.coefficient.has_value());
    // Need c·0.5·(e^{-t} - e^{-t-0.1}) ≥ 0.001 for all t ≤ 1.9.
    const double needed = 0.001 / (0.5 * (std::exp(-1.9) - std::exp(-2.0)));
    CHECK(*scan.coefficient >= needed);
    CHECK(*scan.coefficient <= needed + 0.011);

    const ModifiedEnergyScan none = scan_modified_energy(recs, m0, p, 0.1, 11);
    CHECK_FALSE(none.coefficient.has_value());
    CHECK(none.worst_increase > 0.0);
}
