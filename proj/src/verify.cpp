#include "chns/verify.hpp"

#include "chns/diagnostics.hpp"
#include "chns/error.hpp"
#include "chns/evolution.hpp"
#include "chns/io.hpp"
#include "chns/operators.hpp"
#include "chns/stationary.hpp"
#include "chns/workflow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace chns {

namespace {

using Clock = std::chrono::steady_clock;
using Idx = Eigen::Index;

template <class F>
CheckResult timed(int criterion, std::string name, F&& body) {
    const auto t0 = Clock::now();
    CheckResult r = body();
    r.criterion = criterion;
    r.name = std::move(name);
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : ", ") + p;
    return out;
}

std::string num(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

ScalarField uniform_random(const Grid& g, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    ScalarField f(g);
    for (auto& v : f.data()) v = dist(rng);
    return f;
}

VectorField random_noslip(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    VectorField u(g);
    for (auto& v : u.flat()) v = dist(rng);
    u.enforce_no_slip();
    return u;
}

Eigen::VectorXd as_eigen(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Idx(v.size()));
}

double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
    const double scale = std::max(got.norm(), want.norm());
    return scale > 0.0 ? (got - want).norm() / scale : 0.0;
}

// ---------------------------------------------------------------------------
// Dense reference assemblies, written from the stencil definitions.

struct Faces {
    Grid g;
    std::array<std::size_t, 4> offset{};

    explicit Faces(const Grid& grid) : g(grid) {
        for (int a = 0; a < 3; ++a) offset[a + 1] = offset[a] + (a < g.dim ? g.face_count(a) : 0);
    }
    Idx size() const { return Idx(offset[g.dim]); }
    Idx at(int a, std::array<int, 3> p) const {
        const auto s = g.face_shape(a);
        return Idx(offset[a] + (std::size_t(p[2]) * s[1] + p[1]) * s[0] + p[0]);
    }
    bool boundary(int a, std::array<int, 3> p) const { return p[a] == 0 || p[a] == g.n[a]; }
    Idx cell(std::array<int, 3> p) const { return Idx(g.index(p[0], p[1], p[2])); }
};

template <class F>
void each_index(std::array<int, 3> shape, F&& f) {
    for (int k = 0; k < shape[2]; ++k)
        for (int j = 0; j < shape[1]; ++j)
            for (int i = 0; i < shape[0]; ++i) f(std::array<int, 3>{i, j, k});
}

Eigen::MatrixXd dense_neg_laplacian(const Grid& g) {
    const Idx n = Idx(g.cells());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    each_index(g.n, [&](std::array<int, 3> p) {
        for (int ax = 0; ax < g.dim; ++ax) {
            if (p[ax] + 1 >= g.n[ax]) continue;
            auto q = p;
            q[ax] += 1;
            const Idx c = Idx(g.index(p[0], p[1], p[2]));
            const Idx d = Idx(g.index(q[0], q[1], q[2]));
            const double w = 1.0 / (g.h[ax] * g.h[ax]);
            a(c, c) += w;
            a(d, d) += w;
            a(c, d) -= w;
            a(d, c) -= w;
        }
    });
    return a;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const auto& ev = es.eigenvalues();
    Eigen::VectorXd inv(ev.size());
    const double cut = 1e-10 * ev.cwiseAbs().maxCoeff();
    for (Idx i = 0; i < ev.size(); ++i) inv[i] = std::abs(ev[i]) > cut ? 1.0 / ev[i] : 0.0;
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd dense_gradient(const Faces& F) {
    const Grid& g = F.g;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(F.size(), Idx(g.cells()));
    for (int a = 0; a < g.dim; ++a) {
        each_index(g.face_shape(a), [&](std::array<int, 3> p) {
            if (F.boundary(a, p)) return;
            auto q = p;
            q[a] -= 1;
            m(F.at(a, p), F.cell(p)) += 1.0 / g.h[a];
            m(F.at(a, p), F.cell(q)) -= 1.0 / g.h[a];
        });
    }
    return m;
}

Eigen::MatrixXd dense_divergence(const Faces& F) {
    const Grid& g = F.g;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(Idx(g.cells()), F.size());
    each_index(g.n, [&](std::array<int, 3> p) {
        for (int a = 0; a < g.dim; ++a) {
            auto q = p;
            q[a] += 1;
            m(F.cell(p), F.at(a, q)) += 1.0 / g.h[a];
            m(F.cell(p), F.at(a, p)) -= 1.0 / g.h[a];
        }
    });
    return m;
}

// -div(2νDu) as Sᵀ W S: normal strains at cell centers weighted by 2ν, shear
// strains ∂_b u_a + ∂_a u_b at edges weighted by the averaged ν (halved per
// wall the edge lies on). Wall ghosts are the negated interior values.
Eigen::MatrixXd dense_viscous(const Faces& F, const ScalarField& nu) {
    const Grid& g = F.g;
    const Idx nf = F.size();
    Idx rows = Idx(g.dim * g.cells());
    for (int a = 0; a < g.dim; ++a)
        for (int b = a + 1; b < g.dim; ++b) {
            auto shape = g.n;
            shape[a] += 1;
            shape[b] += 1;
            rows += Idx(shape[0]) * shape[1] * shape[2];
        }
    Eigen::MatrixXd strain = Eigen::MatrixXd::Zero(rows, nf);
    Eigen::VectorXd weight(rows);
    Idx row = 0;

    for (int a = 0; a < g.dim; ++a) {
        each_index(g.n, [&](std::array<int, 3> p) {
            auto q = p;
            q[a] += 1;
            strain(row, F.at(a, q)) += 1.0 / g.h[a];
            strain(row, F.at(a, p)) -= 1.0 / g.h[a];
            weight[row++] = 2.0 * nu[g.index(p[0], p[1], p[2])];
        });
    }
    for (int a = 0; a < g.dim; ++a) {
        for (int b = a + 1; b < g.dim; ++b) {
            auto shape = g.n;
            shape[a] += 1;
            shape[b] += 1;
            each_index(shape, [&](std::array<int, 3> e) {
                auto s = strain.row(row);
                const auto add_derivative = [&](int c, int d) {
                    if (e[c] == 0 || e[c] == g.n[c]) return;  // u_c vanishes on its own walls
                    auto lo = e;
                    lo[d] -= 1;
                    if (e[d] == 0) {
                        s[F.at(c, e)] += 2.0 / g.h[d];
                    } else if (e[d] == g.n[d]) {
                        s[F.at(c, lo)] -= 2.0 / g.h[d];
                    } else {
                        s[F.at(c, e)] += 1.0 / g.h[d];
                        s[F.at(c, lo)] -= 1.0 / g.h[d];
                    }
                };
                add_derivative(a, b);
                add_derivative(b, a);
                double sum = 0.0;
                int count = 0;
                for (int da = -1; da <= 0; ++da)
                    for (int db = -1; db <= 0; ++db) {
                        auto c = e;
                        c[a] += da;
                        c[b] += db;
                        if (c[a] < 0 || c[a] >= g.n[a] || c[b] < 0 || c[b] >= g.n[b]) continue;
                        sum += nu[g.index(c[0], c[1], c[2])];
                        ++count;
                    }
                double w = sum / count;
                if (e[a] == 0 || e[a] == g.n[a]) w *= 0.5;
                if (e[b] == 0 || e[b] == g.n[b]) w *= 0.5;
                weight[row++] = w;
            });
        }
    }
    Eigen::MatrixXd k = strain.transpose() * weight.asDiagonal() * strain;
    // Boundary-normal faces are not unknowns.
    for (int a = 0; a < g.dim; ++a) {
        each_index(g.face_shape(a), [&](std::array<int, 3> p) {
            if (!F.boundary(a, p)) return;
            k.row(F.at(a, p)).setZero();
            k.col(F.at(a, p)).setZero();
        });
    }
    return k;
}

struct OracleErrors {
    double laplacian = 0.0;
    double inverse = 0.0;
    double leray = 0.0;
    double viscous = 0.0;
    double viscous_solve = 0.0;
    double adjoint = 0.0;
};

OracleErrors operator_oracles(const Grid& g, std::uint64_t seed) {
    const LinearSolveConfig cfg{SolverMethod::ConjugateGradient, 1e-10};
    OracleErrors e;
    const Eigen::MatrixXd A = dense_neg_laplacian(g);
    const ScalarField f = uniform_random(g, seed, -1.0, 1.0);

    std::vector<double> af(g.cells());
    apply_neg_laplacian(g, f.data(), af);
    e.laplacian = rel_err(as_eigen(af), A * as_eigen(f.data()));

    const ScalarField z = zero_mean_part(f);
    const Eigen::MatrixXd Ainv = pseudo_inverse(A);
    e.inverse = rel_err(as_eigen(inv_neumann_laplacian(z, cfg).data()), Ainv * as_eigen(z.data()));

    const Faces F(g);
    const Eigen::MatrixXd G = dense_gradient(F);
    const Eigen::MatrixXd D = dense_divergence(F);
    const VectorField u = random_noslip(g, seed + 1);
    const Eigen::VectorXd uf = as_eigen(u.flat());
    // Δq = div u with Δ = DG, then Pu = u - Gq.
    const Eigen::VectorXd pu = uf - G * (pseudo_inverse(D * G) * (D * uf));
    e.leray = rel_err(as_eigen(leray_project(u, cfg).flat()), pu);

    ScalarField phi = uniform_random(g, seed + 2, -1.0, 1.0);
    PhysParams params;
    params.nu1 = 0.5;
    params.nu2 = 2.0;
    const ScalarField nu = viscosity(params, phi);
    const Eigen::MatrixXd K = dense_viscous(F, nu);
    const auto stencil = ViscosityStencil::from_cells(nu);
    e.viscous = rel_err(as_eigen(viscous_apply(u, stencil).flat()), K * uf);

    const double dt = 0.1;
    Eigen::MatrixXd M = dt * K;
    for (int a = 0; a < g.dim; ++a) {
        each_index(g.face_shape(a), [&](std::array<int, 3> p) {
            if (!F.boundary(a, p)) M(F.at(a, p), F.at(a, p)) += 1.0;
            else M(F.at(a, p), F.at(a, p)) = 1.0;
        });
    }
    e.viscous_solve = rel_err(as_eigen(momentum_viscous_solve(u, nu, dt, cfg).flat()), M.ldlt().solve(uf));

    const double lhs = dot(gradient(f), u);
    const double rhs = -dot(f, divergence(u));
    e.adjoint = std::abs(lhs - rhs) / std::max(std::abs(lhs), norm_l2(gradient(f)) * norm_l2(u));
    return e;
}

CheckResult check_operators(int n) {
    const std::vector<Grid> grids{make_grid(n, n, 1.0, 1.3), make_grid(std::min(n, 8), std::min(n, 8), std::min(n, 8),
                                                                      1.0, 0.9, 1.2)};
    double worst = 0.0, worst_adj = 0.0;
    std::vector<std::string> parts;
    std::uint64_t seed = 17;
    for (const Grid& g : grids) {
        const OracleErrors e = operator_oracles(g, seed);
        seed += 10;
        worst = std::max({worst, e.laplacian, e.inverse, e.leray, e.viscous, e.viscous_solve});
        worst_adj = std::max(worst_adj, e.adjoint);
        std::ostringstream s;
        s << g.dim << "D " << g.n[0] << "^" << g.dim << ": lap " << num(e.laplacian) << " N " << num(e.inverse)
          << " leray " << num(e.leray) << " visc " << num(e.viscous) << " visc-solve " << num(e.viscous_solve)
          << " adj " << num(e.adjoint);
        parts.push_back(s.str());
    }
    CheckResult r;
    r.value = worst;
    r.threshold = 1e-8;
    r.passed = worst <= 1e-8 && worst_adj <= 1e-12;
    r.detail = join(parts);
    return r;
}

// ---------------------------------------------------------------------------
// Time-dependent suites

struct RunSetup {
    Grid grid;
    StepperConfig stepper;
    SimState state;
};

RunSetup spinodal_setup(int n, double length, const PotentialSpec& pot, const PhysParams& params, double phi_mean,
                        double amplitude, double dt, std::uint64_t seed) {
    RunSetup s;
    s.grid = make_grid(n, n, length, length);
    ScalarField phi = random_start(s.grid, phi_mean, amplitude, 2, seed);
    ScalarField sigma = random_start(s.grid, 0.5, 0.1, 2, seed + 1);
    s.state = make_state(std::move(phi), std::move(sigma), params, pot);
    s.stepper.dt = dt;
    s.stepper.params = params;
    s.stepper.potential = pot;
    s.stepper.gamma = params.gamma;
    s.stepper.S = default_stabilization(pot, params, s.state.phi);
    return s;
}

struct MassRun {
    double max_recurrence = 0.0;
    double sigma_drift = 0.0;
    double gap_at = 0.0;  // |φ̄ - continuum prediction| at t_gap
};

MassRun mass_run(int n, double alpha, double dt, int steps, double t_gap) {
    PhysParams params;
    params.chi = 0.2;
    params.alpha = alpha;
    params.c0 = -0.1;
    params.nu1 = 0.5;
    params.nu2 = 1.5;
    RunSetup s = spinodal_setup(n, 32.0, PotentialSpec::quartic(), params, 0.2, 0.1, dt, 31);
    MassRun out;
    RunCallbacks cb;
    cb.on_step = [&](const SimState& st) {
        const MassReport m = mass_report(st, params);
        out.max_recurrence = std::max(out.max_recurrence, m.discrete_error);
        out.sigma_drift = std::max(out.sigma_drift, m.sigma_drift);
        if (std::abs(st.t - t_gap) < 0.5 * dt) out.gap_at = m.abs_error;
    };
    run(s.state, s.stepper, dt * steps, cb);
    return out;
}

CheckResult check_mass(int n) {
    const double dt = 1e-3;
    const int steps = 2000;
    const double t_gap = 1.0;
    const MassRun a0 = mass_run(n, 0.0, dt, steps, t_gap);
    const MassRun a1 = mass_run(n, 1.0, dt, steps, t_gap);
    const MassRun half = mass_run(n, 1.0, 0.5 * dt, int(std::lround(t_gap / (0.5 * dt))), t_gap);
    const double ratio = a1.gap_at / half.gap_at;
    const double recurrence = std::max(a0.max_recurrence, a1.max_recurrence);
    const double drift = std::max(a0.sigma_drift, a1.sigma_drift);

    CheckResult r;
    r.value = recurrence;
    r.threshold = 1e-12;
    r.passed = recurrence < 1e-12 && drift < 1e-11 && ratio >= 1.8 && ratio <= 2.2;
    r.detail = "recurrence error " + num(recurrence) + ", sigma drift " + num(drift) + ", gap ratio " + num(ratio) +
               " (gaps " + num(a1.gap_at) + ", " + num(half.gap_at) + ")";
    return r;
}

CheckResult check_energy(int n) {
    PhysParams params;
    params.nu1 = 0.5;
    params.nu2 = 1.5;
    params.chi = 0.2;
    RunSetup s = spinodal_setup(n, 32.0, PotentialSpec::quartic(), params, 0.0, 0.1, 0.01, 7);
    const int steps = 2000;
    double prev = 0.0, worst = -1e300;
    std::size_t increases = 0;
    bool first = true;
    RunCallbacks cb;
    cb.on_step = [&](const SimState& st) {
        const double e = 0.5 * dot(st.v, st.v) + free_energy(st.phi, st.sigma, params, s.stepper.potential);
        if (!first) {
            worst = std::max(worst, e - prev);
            if (e - prev > 1e-12) ++increases;
        }
        first = false;
        prev = e;
    };
    run(s.state, s.stepper, s.stepper.dt * steps, cb);
    CheckResult r;
    r.value = double(increases);
    r.threshold = 0.0;
    r.passed = increases == 0;
    r.detail = std::to_string(steps) + " steps, S = " + num(s.stepper.S) + ", largest step change " + num(worst);
    return r;
}

double balance_residual(int n, double dt, double t_end) {
    PhysParams params;
    params.nu1 = 0.5;
    params.nu2 = 1.5;
    params.chi = 0.3;
    params.alpha = 0.5;
    params.beta = 0.05;
    params.c0 = 0.05;
    const auto pot = PotentialSpec::flory_huggins(1.0, 2.5);
    RunSetup s = spinodal_setup(n, 32.0, pot, params, 0.1, 0.3, dt, 11);
    std::vector<DiagnosticsRecord> records;
    double sum = 0.0;
    int count = 0;
    RunCallbacks cb;
    cb.on_step = [&](const SimState& st) {
        const DiagnosticsRecord* prev = records.empty() ? nullptr : &records.back();
        records.push_back(make_record(st, params, pot, prev));
        if (st.t > 0.5 * t_end + 1e-12) {
            sum += records.back().energy_balance_residual * records.back().energy_balance_residual;
            ++count;
        }
    };
    run(s.state, s.stepper, t_end, cb);
    return std::sqrt(sum / count);
}

CheckResult check_balance(int n) {
    const double t_end = 0.04;
    const double dts[] = {4e-4, 2e-4, 1e-4};
    double res[3];
    for (int i = 0; i < 3; ++i) res[i] = balance_residual(n, dts[i], t_end);
    const double o1 = std::log2(res[0] / res[1]);
    const double o2 = std::log2(res[1] / res[2]);
    CheckResult r;
    r.value = std::min(o1, o2);
    r.threshold = 0.8;
    r.passed = r.value >= 0.8;
    r.detail = "RMS |R| " + num(res[0]) + ", " + num(res[1]) + ", " + num(res[2]) + "; orders " + num(o1) + ", " +
               num(o2);
    return r;
}

CheckResult check_separation(int n) {
    PhysParams params;
    params.nu1 = 0.5;
    params.nu2 = 1.5;
    params.chi = 0.2;
    params.alpha = 0.1;
    params.beta = 0.02;
    const auto pot = PotentialSpec::flory_huggins(1.0, 2.5);
    RunSetup s = spinodal_setup(n, 32.0, pot, params, 0.0, 0.6, 0.01, 5);
    // Stretch the start so that ||φ0||∞ = 0.85, well inside the admissible range.
    ScalarField phi0 = s.state.phi;
    phi0 *= 0.85 / phi0.max_abs();
    s.state = make_state(std::move(phi0), s.state.sigma, params, pot);
    s.stepper.S = default_stabilization(pot, params, s.state.phi);
    const double init_sup = s.state.phi.max_abs();
    double min_sep = 1.0;
    RunCallbacks cb;
    cb.on_step = [&](const SimState& st) { min_sep = std::min(min_sep, 1.0 - st.phi.max_abs()); };
    const int steps = 2000;
    const SimState fin = run(s.state, s.stepper, s.stepper.dt * steps, cb);
    CheckResult r;
    r.value = min_sep;
    r.threshold = 0.0;
    r.passed = init_sup <= 0.9 && min_sep > 0.0 && fin.clip_events == 0;
    r.detail = "||phi0||inf " + num(init_sup) + ", min separation " + num(min_sep) + ", clip events " +
               std::to_string(fin.clip_events) + ", " + std::to_string(fin.step) + " steps";
    return r;
}

// Criteria 6 and 7 share one perturbed run, driven through the same
// equilibrate and simulate paths as the command-line tool.
std::vector<CheckResult> check_stability(int n, const std::filesystem::path& work_dir,
                                         const std::function<void(const std::string&)>& log) {
    const auto t0 = Clock::now();
    const std::filesystem::path dir = work_dir / "stability";
    std::filesystem::create_directories(dir);
    const std::string base = "grid.n = " + std::to_string(n) + ", " + std::to_string(n) +
                             "\ngrid.length = 4, 4\n"
                             "potential.kind = flory_huggins\nparams.theta = 1\nparams.theta0 = 3\n"
                             "params.chi = 0.3\nparams.alpha = 0.2\nparams.beta = 0.02\nparams.c0 = 0.2\n"
                             "params.nu1 = 0.5\nparams.nu2 = 1.5\n"
                             "initial.phi_mean = 0.2\ninitial.sigma_mean = 0.3\n";
    const RunConfig eq_cfg = parse_config(base + "equilibrate.method = multistart\nequilibrate.n_starts = 3\n"
                                                 "equilibrate.amplitude = 0.3\nequilibrate.tol = 1e-9\nstepper.S = 100\n"
                                                 "output.dir = " + dir.string() + "\n");
    const EquilibrateSummary eq = equilibrate(eq_cfg);
    if (log) {
        log("equilibrium: F = " + num(eq.best.energy) + ", separation " + num(eq.best.separation) +
            ", stationary residual " + num(eq.residual.r1));
    }

    const RunConfig run_cfg = parse_config(
        base + "initial.kind = perturbed_equilibrium\ninitial.file = " + (dir / "equilibrium.chns").string() +
        "\ninitial.amplitude = 1e-3\ninitial.velocity = 1e-3\ninitial.seed = 5\n"
        "stepper.dt = 0.01\nrun.t_end = 20\noutput.csv_every = 10\noutput.snapshot_every = 1000\n"
        "output.dir = " + (dir / "run").string() + "\n");
    const SimulateSummary sim = simulate(run_cfg);
    const auto& ts = sim.distance_t;
    std::vector<double> dist_total, l2_sum;
    for (const auto& d : sim.distance) {
        dist_total.push_back(d.total());
        l2_sum.push_back(d.l2_phi + d.l2_sigma);
    }
    const double run_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

    CheckResult c6;
    c6.criterion = 6;
    c6.name = "lyapunov-stability";
    const double initial = l2_sum.front();
    const double peak = *std::max_element(l2_sum.begin(), l2_sum.end());
    c6.value = peak / initial;
    c6.threshold = 10.0;
    c6.passed = c6.value <= 10.0;
    c6.detail = "initial size " + num(initial) + ", max " + num(peak) + " over t in [0, 20], " +
                std::to_string(sim.final_state.step) + " steps";
    c6.seconds = run_seconds;

    CheckResult c7;
    c7.criterion = 7;
    c7.name = "convergence-rate";
    const double final_d = dist_total.back();
    // Trend: maxima over ten equal windows must decrease.
    const std::size_t w = dist_total.size() / 10;
    bool monotone = true;
    double last = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 10; ++k) {
        const auto b = dist_total.begin() + std::ptrdiff_t(k * w);
        const auto e = k == 9 ? dist_total.end() : b + std::ptrdiff_t(w);
        const double m = *std::max_element(b, e);
        if (!(m < last)) monotone = false;
        last = m;
    }
    std::string fit_text;
    bool fit_ok = false;
    try {
        const RateFit fit = fit_convergence_rate(ts, dist_total);
        fit_ok = fit.flagged_exponential || (fit.kappa > 0.0 && fit.kappa < 0.5 && fit.r_squared > 0.98);
        fit_text = fit.flagged_exponential ? "flagged exponential (rate " + num(fit.exp_rate) + ")"
                                           : "kappa " + num(fit.kappa) + ", r^2 " + num(fit.r_squared);
    } catch (const Error& e) {
        fit_text = std::string("fit failed: ") + e.what();
    }
    c7.value = final_d;
    c7.threshold = 1e-6;
    c7.passed = final_d < 1e-6 && monotone && fit_ok;
    c7.detail = "final distance " + num(final_d) + ", window maxima " + (monotone ? "decreasing" : "not decreasing") +
                ", " + fit_text;
    c7.seconds = 0.0;
    return {c6, c7};
}

CheckResult check_equilibrium(int n) {
    PhysParams params;
    params.chi = 0.4;
    params.beta = 0.01;
    const auto pot = PotentialSpec::flory_huggins(1.0, 2.5);
    const Grid grid = make_grid(n, n, 6.0, 6.0);
    const double m1 = 0.1, m2 = 0.3;
    const ScalarField phi0 = random_start(grid, m1, 0.3, 2, 21);
    const ScalarField sigma0(grid, m2);

    ChoFlowOptions flow;
    flow.tol = 1e-10;
    flow.dt = 0.5;
    const EquilibriumResult a = cho_flow(phi0, sigma0, params, pot, flow);
    ReducedOptions ro;
    ro.tol = 1e-11;
    const EquilibriumResult b = reduced_equilibrium(a.phi_inf, m1, m2, params, pot, ro);
    const double diff = norm_l2(a.phi_inf - b.phi_inf) + norm_l2(a.sigma_inf - b.sigma_inf);
    const auto ra = stationary_residual(a.phi_inf, a.sigma_inf, params, pot);
    const auto rb = stationary_residual(b.phi_inf, b.sigma_inf, params, pot);
    const auto spread = [&](const EquilibriumResult& e) {
        const ScalarField w = e.sigma_inf - params.chi * e.phi_inf;
        const auto [lo, hi] = std::minmax_element(w.data().begin(), w.data().end());
        return *hi - *lo;
    };
    const double worst_res = std::max({ra.r1, ra.r2, rb.r1, rb.r2});
    CheckResult r;
    r.value = diff;
    r.threshold = 1e-6;
    r.passed = diff <= 1e-6 && worst_res < 1e-8 && spread(a) < 1e-8 && spread(b) < 1e-8;
    r.detail = "L2 difference " + num(diff) + ", residuals " + num(ra.r1) + "/" + num(ra.r2) + " and " + num(rb.r1) +
               "/" + num(rb.r2) + ", sigma - chi phi spread " + num(std::max(spread(a), spread(b)));
    return r;
}

CheckResult check_ratefit() {
    std::vector<double> t, d1, d3, de;
    for (int i = 0; i <= 400; ++i) {
        const double x = 0.05 * i;
        t.push_back(x);
        d1.push_back(std::pow(1.0 + x, -1.0));
        d3.push_back(std::pow(1.0 + x, -3.0));
        de.push_back(std::exp(-x));
    }
    const RateFit f1 = fit_convergence_rate(t, d1);
    const RateFit f3 = fit_convergence_rate(t, d3);
    const RateFit fe = fit_convergence_rate(t, de);
    const double e1 = std::abs(f1.kappa - 1.0 / 3.0) / (1.0 / 3.0);
    const double e3 = std::abs(f3.kappa - 3.0 / 7.0) / (3.0 / 7.0);
    CheckResult r;
    r.value = std::max(e1, e3);
    r.threshold = 0.01;
    r.passed = e1 < 0.01 && e3 < 0.01 && !f1.flagged_exponential && !f3.flagged_exponential &&
               fe.flagged_exponential;
    r.detail = "kappa " + num(f1.kappa) + " (p=1), " + num(f3.kappa) + " (p=3), exp " +
               (fe.flagged_exponential ? "flagged" : "not flagged");
    return r;
}

CheckResult check_shift(int n) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Grid g = make_grid(n, n + 2, 4.0 + 4.0 * unit(rng), 4.0 + 4.0 * unit(rng));
        PhysParams params;
        params.chi = 2.0 * unit(rng) - 1.0;
        params.beta = trial % 2 ? 0.1 * unit(rng) : 0.0;
        const auto pot = trial % 3 == 0 ? PotentialSpec::quartic()
                                        : PotentialSpec::flory_huggins(0.5 + unit(rng), 2.0 + unit(rng));
        const double bound = pot.kind == PotentialKind::Quartic ? 1.5 : 0.99;
        const ScalarField phi = uniform_random(g, rng(), -bound, bound);
        const ScalarField sigma = uniform_random(g, rng(), -2.0, 2.0);
        const double f = free_energy(phi, sigma, params, pot);
        const ScalarField w = sigma - params.chi * phi;
        const double rhs = reduced_free_energy(phi, params, pot) + 0.5 * dot(w, w);
        worst = std::max(worst, std::abs(f - rhs) / std::max(std::abs(f), 1e-300));
    }
    CheckResult r;
    r.value = worst;
    r.threshold = 1e-10;
    r.passed = worst <= 1e-10;
    r.detail = "50 random pairs, worst relative gap " + num(worst);
    return r;
}

int or_default(int size, int fallback) { return size > 0 ? size : fallback; }

} // namespace

std::vector<std::string> verify_suites() {
    return {"operators", "mass", "energy", "balance", "separation", "stability", "equilibrium", "ratefit", "shift",
            "all"};
}

std::vector<CheckResult> run_verify(std::string_view suite, const VerifyOptions& opts) {
    const auto names = verify_suites();
    if (std::find(names.begin(), names.end(), suite) == names.end()) {
        throw InvalidArgument("unknown verify suite '" + std::string(suite) + "' (expected one of " + join(names) +
                              ")");
    }
    const bool all = suite == "all";
    const auto want = [&](std::string_view s) { return all || suite == s; };
    const int size = opts.size;
    std::vector<CheckResult> out;
    const auto note = [&](const CheckResult& r) {
        if (opts.log) opts.log(format_check(r));
        out.push_back(r);
    };

    if (want("operators")) note(timed(1, "operator-oracles", [&] { return check_operators(or_default(size, 16)); }));
    if (want("mass")) note(timed(2, "mass-laws", [&] { return check_mass(or_default(size, 64)); }));
    if (want("energy")) note(timed(3, "energy-dissipation", [&] { return check_energy(or_default(size, 64)); }));
    if (want("balance")) note(timed(4, "energy-balance-order", [&] { return check_balance(or_default(size, 64)); }));
    if (want("separation")) {
        note(timed(5, "strict-separation", [&] { return check_separation(or_default(size, 64)); }));
    }
    if (want("stability")) {
        for (const auto& r : check_stability(or_default(size, 32), opts.work_dir, opts.log)) note(r);
    }
    if (want("equilibrium")) {
        note(timed(8, "equilibrium-cross-validation", [&] { return check_equilibrium(or_default(size, 32)); }));
    }
    if (want("ratefit")) note(timed(9, "rate-fit-self-test", [] { return check_ratefit(); }));
    if (want("shift")) note(timed(10, "shift-identity", [&] { return check_shift(or_default(size, 16)); }));
    return out;
}

std::string format_check(const CheckResult& r) {
    std::ostringstream s;
    s << (r.passed ? "PASS" : "FAIL") << " [" << r.criterion << "] " << r.name << ": value " << num(r.value)
      << " (bound " << num(r.threshold) << "), " << r.detail << " [" << num(r.seconds) << " s]";
    return s.str();
}

} // namespace chns
