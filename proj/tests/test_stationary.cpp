#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "chns/diagnostics.hpp"
#include "chns/error.hpp"
#include "chns/operators.hpp"
#include "chns/stationary.hpp"
#include "test_support.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>

using namespace chns;
using test::to_eigen;

namespace {

double spread(const ScalarField& f) {
    double lo = f[0], hi = f[0];
    for (double v : f.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

ScalarField shifted(const ScalarField& sigma, const ScalarField& phi, double chi) {
    ScalarField w = sigma;
    for (std::size_t c = 0; c < w.size(); ++c) w[c] -= chi * phi[c];
    return w;
}

ScalarField mode(const Grid& g, double m, double a) {
    return test::sample(g, [&](double x, double, double) { return m + a * std::cos(std::numbers::pi * x / g.length[0]); });
}

} // namespace

TEST_CASE("stationary residual") {
    const Grid g = make_grid(8, 8, 2.0, 2.0);
    PhysParams p;
    const auto pot = PotentialSpec::flory_huggins(1.0, 2.0);
    const StationaryResidual u = stationary_residual(ScalarField(g, 0.3), ScalarField(g, -0.2), p, pot);
    CHECK(u.r1 < 1e-12);
    CHECK(u.r2 < 1e-12);

    p.chi = 0.4;
    p.beta = 0.9;
    const ScalarField phi = test::random_field(g, 1, -0.8, 0.8);
    const ScalarField sigma = test::random_field(g, 2);
    const StationaryResidual r = stationary_residual(phi, sigma, p, pot, {SolverMethod::ConjugateGradient, 1e-13});
    const Eigen::MatrixXd A = test::dense_neg_laplacian(g);
    const Eigen::VectorXd f = to_eigen(phi.data());
    const Eigen::VectorXd fc = f.array() - f.mean();
    Eigen::VectorXd lhs = A * f - p.chi * to_eigen(sigma.data()) + p.beta * (test::dense_pinv(A) * fc);
    for (Eigen::Index c = 0; c < lhs.size(); ++c) lhs[c] += psi_prime(pot, f[c]);
    const Eigen::VectorXd lc = lhs.array() - lhs.mean();
    const Eigen::VectorXd w = to_eigen(sigma.data()) - p.chi * f;
    CHECK(r.r1 > 0.0);
    CHECK(r.r1 == doctest::Approx(std::sqrt(lc.squaredNorm() * g.cell_volume())).epsilon(1e-10));
    CHECK(r.r2 == doctest::Approx(std::sqrt(w.dot(A * w) * g.cell_volume())).epsilon(1e-10));
}

TEST_CASE("cho_flow relaxes a stable uniform state") {
    const Grid g = make_grid(16, 16, 4.0, 4.0);
    PhysParams p;
    const auto pot = PotentialSpec::quartic();
    // Ψ''(0.7) + (π/4)² > 0: the uniform state is linearly stable.
    const ScalarField phi0 = mode(g, 0.7, 1e-3);
    const EquilibriumResult r = cho_flow(phi0, ScalarField(g, 0.2), p, pot);
    REQUIRE(r.converged);
    CHECK(r.residual < 1e-8);
    CHECK(spread(r.phi_inf) < 1e-8);
    CHECK(std::abs(mean(r.phi_inf) - 0.7) < 1e-12);
    CHECK(std::abs(mean(r.sigma_inf) - 0.2) < 1e-12);
    CHECK(r.energy == doctest::Approx(g.volume() * (psi(pot, 0.7) + 0.02)).epsilon(1e-10));
}

TEST_CASE("cho_flow finds a two-phase profile after a deep quench") {
    const Grid g = make_grid(64, 4, 32.0, 2.0);
    PhysParams p;
    const auto pot = PotentialSpec::flory_huggins(1.0, 3.0);
    ChoFlowOptions opts;
    opts.dt = 0.5;
    opts.tol = 1e-8;
    const ScalarField phi0 = mode(g, 0.0, 0.01);
    const EquilibriumResult r = cho_flow(phi0, ScalarField(g), p, pot, opts);
    REQUIRE(r.converged);
    const double f_uniform = free_energy(ScalarField(g), ScalarField(g), p, pot);
    CHECK(r.energy < f_uniform - 1.0);
    CHECK(r.phi_inf.max_abs() > 0.9);
    CHECK(r.separation > 0.0);
    CHECK(std::abs(mean(r.phi_inf)) < 1e-12);
    // Δ(σ∞ - χφ∞) = 0 up to the flow tolerance.
    CHECK(norm_l2(laplacian_neumann(shifted(r.sigma_inf, r.phi_inf, p.chi))) < 10.0 * opts.tol);
    const StationaryResidual sr = stationary_residual(r.phi_inf, r.sigma_inf, p, pot);
    CHECK(sr.r1 < 1e-7);
    CHECK(sr.r2 < opts.tol);
}

TEST_CASE("cho_flow with chemotaxis keeps sigma - chi phi constant") {
    const Grid g = make_grid(32, 4, 16.0, 2.0);
    PhysParams p;
    p.chi = 0.5;
    const auto pot = PotentialSpec::flory_huggins(1.0, 2.5);
    ChoFlowOptions opts;
    opts.dt = 0.1;
    opts.tol = 1e-9;
    const EquilibriumResult r = cho_flow(mode(g, 0.1, 0.05), ScalarField(g, 0.3), p, pot, opts);
    REQUIRE(r.converged);
    CHECK(spread(shifted(r.sigma_inf, r.phi_inf, p.chi)) < 10.0 * opts.tol);
    CHECK(std::abs(mean(r.sigma_inf) - 0.3) < 1e-12);
    CHECK(std::abs(mean(r.phi_inf) - 0.1) < 1e-12);
}

TEST_CASE("cho_flow limits and errors") {
    const Grid g = make_grid(16, 4, 16.0, 4.0);
    ChoFlowOptions opts;
    opts.max_steps = 3;
    const EquilibriumResult r = cho_flow(mode(g, 0.0, 0.01), ScalarField(g), {}, PotentialSpec::quartic(), opts);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);

    const auto fh = PotentialSpec::flory_huggins(1.0, 2.0);
    CHECK_THROWS_AS(cho_flow(ScalarField(g, 1.0), ScalarField(g), {}, PotentialSpec::quartic()), InvalidArgument);
    ScalarField bad(g, 0.1);
    bad[3] = -1.0;
    CHECK_THROWS_AS(cho_flow(bad, ScalarField(g), {}, fh), InvalidArgument);
    opts.tol = 0.0;
    CHECK_THROWS_AS(cho_flow(ScalarField(g), ScalarField(g), {}, fh, opts), InvalidArgument);
}

TEST_CASE("cho_flow recovers from a step that raises the energy") {
    // With the default S this quench overshoots the binodal early on and the
    // plain flow loses monotonicity near step 1600.
    PhysParams p;
    p.chi = 0.4;
    p.beta = 0.01;
    const auto fh = PotentialSpec::flory_huggins(1.0, 2.5);
    const Grid g = make_grid(32, 32, 6.0, 6.0);
    ChoFlowOptions opts;
    opts.dt = 0.1;
    opts.tol = 1e-6;
    const EquilibriumResult r = cho_flow(random_start(g, 0.1, 0.3, 2, 21), ScalarField(g, 0.3), p, fh, opts);
    CHECK(r.converged);
    const auto res = stationary_residual(r.phi_inf, r.sigma_inf, p, fh);
    CHECK(res.r1 < 1e-5);
    CHECK(spread(shifted(r.sigma_inf, r.phi_inf, p.chi)) < 1e-5);
}

TEST_CASE("reduced equilibrium") {
    SUBCASE("uniform state solves the classical problem") {
        const Grid g = make_grid(16, 16, 4.0, 4.0);
        const EquilibriumResult r =
            reduced_equilibrium(ScalarField(g, 0.0), 0.3, -0.1, {}, PotentialSpec::flory_huggins(1.0, 2.0));
        CHECK(r.converged);
        CHECK(r.residual < 1e-12);
        CHECK(spread(r.phi_inf) < 1e-14);
        CHECK(mean(r.sigma_inf) == doctest::Approx(-0.1).epsilon(1e-14));
    }
    SUBCASE("agrees with cho_flow from the same basin") {
        const Grid g = make_grid(16, 16, 8.0, 8.0);
        PhysParams p;
        p.chi = 0.3;
        p.beta = 0.05;
        const auto pot = PotentialSpec::flory_huggins(1.0, 2.0);
        const ScalarField guess = test::sample(g, [](double x, double y, double) {
            return 0.1 + 0.6 * std::tanh((std::hypot(x, y) - 4.0) / 1.0);
        });
        const double m1 = mean(guess), m2 = 0.2;
        ChoFlowOptions flow;
        flow.dt = 0.5;
        flow.tol = 1e-10;
        const EquilibriumResult a = cho_flow(guess, ScalarField(g, m2), p, pot, flow);
        const EquilibriumResult b = reduced_equilibrium(guess, m1, m2, p, pot);
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        CHECK(spread(zero_mean_part(a.phi_inf)) > 0.5);
        CHECK(norm_l2(a.phi_inf - b.phi_inf) < 1e-6);
        CHECK(norm_l2(a.sigma_inf - b.sigma_inf) < 1e-6);
        CHECK(spread(shifted(b.sigma_inf, b.phi_inf, p.chi)) < 1e-14);
        CHECK(std::abs(mean(b.phi_inf) - m1) < 1e-12);
        const StationaryResidual sr = stationary_residual(b.phi_inf, b.sigma_inf, p, pot);
        CHECK(sr.r1 < 1e-8);
        CHECK(sr.r2 < 1e-8);
        CHECK(a.energy == doctest::Approx(b.energy).epsilon(1e-10));
    }
    SUBCASE("errors") {
        const Grid g = make_grid(8, 8, 1.0, 1.0);
        CHECK_THROWS_AS(reduced_equilibrium(ScalarField(g), 1.0, 0.0, {}, {}), InvalidArgument);
    }
}

TEST_CASE("random starts") {
    const Grid g = make_grid(16, 16, 4.0, 4.0);
    const ScalarField a = random_start(g, 0.2, 0.1, 2, 7);
    CHECK(mean(a) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(zero_mean_part(a).max_abs() < 0.1);
    CHECK(zero_mean_part(a).max_abs() > 0.0);
    CHECK(a == random_start(g, 0.2, 0.1, 2, 7));
    CHECK_FALSE(a == random_start(g, 0.2, 0.1, 2, 8));
    // Smoothing damps the roughness.
    const ScalarField raw = random_start(g, 0.2, 0.1, 0, 7);
    CHECK(grad_norm_sq(a) < 0.5 * grad_norm_sq(raw));
}

TEST_CASE("multi-start minimization") {
    SUBCASE("stable regime selects the uniform state") {
        const Grid g = make_grid(12, 12, 3.0, 3.0);
        PhysParams p;
        MinimizeOptions opts;
        opts.n_starts = 3;
        const MinimizeResult r = minimize_energy(g, 0.7, 0.4, p, PotentialSpec::quartic(), opts);
        const double expect = g.volume() * (psi(PotentialSpec::quartic(), 0.7) + 0.5 * 0.16);
        CHECK(r.best.energy == doctest::Approx(expect).epsilon(1e-9));
        CHECK(r.candidates.size() == 3);
        for (const auto& c : r.candidates) {
            CHECK(c.energy >= r.best.energy);
            CHECK(std::abs(mean(c.phi_inf) - 0.7) < 1e-12);
            CHECK(std::abs(mean(c.sigma_inf) - 0.4) < 1e-12);
        }

        opts.n_starts = 1;
        const MinimizeResult one = minimize_energy(g, 0.7, 0.4, p, PotentialSpec::quartic(), opts);
        CHECK(one.best_index == 0);
        CHECK(spread(one.best.phi_inf) == 0.0);
        CHECK(one.best.energy == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("unstable regime finds a lower energy than the uniform state") {
        const Grid g = make_grid(16, 16, 12.0, 12.0);
        PhysParams p;
        const auto pot = PotentialSpec::flory_huggins(1.0, 2.0);
        MinimizeOptions opts;
        opts.n_starts = 3;
        opts.flow.dt = 0.5;
        opts.threads = 2;
        const MinimizeResult r = minimize_energy(g, 0.0, 0.0, p, pot, opts);
        const double f_uniform = free_energy(ScalarField(g), ScalarField(g), p, pot);
        CHECK(r.best.energy < f_uniform - 1.0);
        CHECK(r.best_index != 0);
        CHECK(r.best.separation > 0.0);

        // The worker count does not change the outcome.
        opts.threads = 1;
        const MinimizeResult s = minimize_energy(g, 0.0, 0.0, p, pot, opts);
        CHECK(s.best.phi_inf == r.best.phi_inf);
        CHECK(s.best_index == r.best_index);
    }
    SUBCASE("errors") {
        const Grid g = make_grid(8, 8, 1.0, 1.0);
        CHECK_THROWS_AS(minimize_energy(g, 1.2, 0.0, {}, {}), InvalidArgument);
        MinimizeOptions opts;
        opts.n_starts = 0;
        CHECK_THROWS_AS(minimize_energy(g, 0.0, 0.0, {}, {}, opts), InvalidArgument);
    }
}

TEST_CASE("worker count from the environment") {
    ::setenv("CHNS_THREADS", "3", 1);
    CHECK(worker_threads() == 3);
    ::setenv("CHNS_THREADS", "zero", 1);
    CHECK(worker_threads() >= 1);
    ::unsetenv("CHNS_THREADS");
    CHECK(worker_threads() >= 1);
}
