#include "chns/operators.hpp"

#include "chns/error.hpp"
#include "chns/spectral.hpp"

#include <cmath>

namespace chns {

namespace {

using Shape = std::array<int, 3>;

std::array<std::size_t, 3> strides_of(const Shape& s) {
    return {1, std::size_t(s[0]), std::size_t(s[0]) * s[1]};
}

std::size_t flat_index(const Shape& s, int i, int j, int k) {
    return (std::size_t(k) * s[1] + j) * s[0] + i;
}

template <class F>
void for_each(const Shape& s, F&& f) {
    for (int k = 0; k < s[2]; ++k)
        for (int j = 0; j < s[1]; ++j)
            for (int i = 0; i < s[0]; ++i) f(i, j, k);
}

Shape edge_shape(const Grid& g, int a, int b) {
    Shape s = g.n;
    s[a] += 1;
    s[b] += 1;
    return s;
}

int pair_slot(int a, int b) {
    if (a > b) std::swap(a, b);
    return a == 0 ? (b == 1 ? 0 : 1) : 2;
}

// Derivative along b of the face component u_a, evaluated at edge q
// (face position in both a and b). No-slip ghosts mirror with a sign flip.
double edge_derivative(const Grid& g, std::span<const double> ua, int a, int b,
                       const Shape& q) {
    const Shape fs = g.face_shape(a);
    const int nb = g.n[b];
    const int qb = q[b];
    auto value = [&](int jb) {
        Shape c = q;
        c[b] = jb;
        return ua[flat_index(fs, c[0], c[1], c[2])];
    };
    double hi, lo;
    if (qb == 0) {
        hi = value(0);
        lo = -hi;
    } else if (qb == nb) {
        lo = value(nb - 1);
        hi = -lo;
    } else {
        hi = value(qb);
        lo = value(qb - 1);
    }
    return (hi - lo) / g.h[b];
}

bool on_wall(const Grid& g, const Shape& q, int axis) { return q[axis] == 0 || q[axis] == g.n[axis]; }

void check_zero_mean(const ScalarField& f) {
    const double m = mean(f);
    const double rms = norm_l2(f) / std::sqrt(f.grid().volume());
    if (std::abs(m) > 1e-10 * rms) throw NotZeroMean(m);
}

} // namespace

// ---------------------------------------------------------------------------
// Scalar stencils

void apply_neg_laplacian(const Grid& g, std::span<const double> in, std::span<double> out) {
    const auto st = strides_of(g.n);
    std::array<double, 3> ih2{};
    for (int a = 0; a < g.dim; ++a) ih2[a] = 1.0 / (g.h[a] * g.h[a]);
    for_each(g.n, [&](int i, int j, int k) {
        const std::size_t c = g.index(i, j, k);
        const Shape p{i, j, k};
        const double fc = in[c];
        double acc = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            if (p[a] > 0) acc += (fc - in[c - st[a]]) * ih2[a];
            if (p[a] < g.n[a] - 1) acc += (fc - in[c + st[a]]) * ih2[a];
        }
        out[c] = acc;
    });
}

std::vector<double> neg_laplacian_diagonal(const Grid& g) {
    std::vector<double> d(g.cells(), 0.0);
    for_each(g.n, [&](int i, int j, int k) {
        const Shape p{i, j, k};
        double acc = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            const double ih2 = 1.0 / (g.h[a] * g.h[a]);
            if (p[a] > 0) acc += ih2;
            if (p[a] < g.n[a] - 1) acc += ih2;
        }
        d[g.index(i, j, k)] = acc;
    });
    return d;
}

ScalarField laplacian_neumann(const ScalarField& f) {
    ScalarField out(f.grid());
    apply_neg_laplacian(f.grid(), f.data(), out.data());
    out *= -1.0;
    return out;
}

ScalarField inv_neumann_laplacian(const ScalarField& f, const LinearSolveConfig& cfg,
                                  const ScalarField* guess, SolveStats* stats) {
    check_zero_mean(f);
    const Grid& g = f.grid();
    // Strip the rounding-level mean so the system is exactly consistent.
    ScalarField rhs = zero_mean_part(f);
    ScalarField u = guess ? *guess : ScalarField(g);
    const auto diag = neg_laplacian_diagonal(g);
    auto apply = [&g](std::span<const double> x, std::span<double> y) { apply_neg_laplacian(g, x, y); };
    const LinearApply spectral = [&g](std::span<const double> x, std::span<double> y) {
        apply_neumann_symbol(g, x, y, [](double l) { return l > 0.0 ? 1.0 / l : 0.0; });
    };
    const SolveStats s =
        solve_spd(apply, diag, rhs.data(), u.data(), cfg, true, "inverse Neumann Laplacian", &spectral);
    if (stats) *stats = s;
    return u;
}

ScalarField nonlocal_potential(const ScalarField& phi, double beta, const LinearSolveConfig& cfg) {
    if (beta == 0.0) return ScalarField(phi.grid());
    const ScalarField f = zero_mean_part(zero_mean_part(phi));
    // A constant φ leaves only rounding residue of its mean.
    if (f.max_abs() <= 1e-14 * phi.max_abs()) return ScalarField(phi.grid());
    ScalarField u = inv_neumann_laplacian(f, cfg);
    u *= beta;
    return u;
}

double norm_v0_dual(const ScalarField& f, const LinearSolveConfig& cfg) {
    const ScalarField u = inv_neumann_laplacian(f, cfg);
    return std::sqrt(grad_norm_sq(u));
}

double norm_h1_dual(const ScalarField& f, const LinearSolveConfig& cfg) {
    const double m = mean(f);
    const ScalarField z = zero_mean_part(zero_mean_part(f));
    const double d = z.max_abs() > 1e-14 * f.max_abs() ? norm_v0_dual(z, cfg) : 0.0;
    return std::sqrt(d * d + m * m);
}

ScalarField solve_screened(const ScalarField& rhs, double shift, double scale,
                           const LinearSolveConfig& cfg, const ScalarField* guess) {
    if (!(shift > 0.0) || scale < 0.0) throw InvalidArgument("screened solve needs shift > 0, scale >= 0");
    const Grid& g = rhs.grid();
    const double m = mean(rhs);
    ScalarField b = rhs;
    b += -m;
    ScalarField u = guess ? zero_mean_part(*guess) : ScalarField(g);
    auto diag = neg_laplacian_diagonal(g);
    for (double& d : diag) d = shift + scale * d;
    std::vector<double> tmp(g.cells());
    auto apply = [&](std::span<const double> x, std::span<double> y) {
        apply_neg_laplacian(g, x, tmp);
        for (std::size_t c = 0; c < y.size(); ++c) y[c] = shift * x[c] + scale * tmp[c];
    };
    const LinearApply spectral = [&](std::span<const double> x, std::span<double> y) {
        apply_neumann_symbol(g, x, y, [=](double l) { return 1.0 / (shift + scale * l); });
    };
    solve_spd(apply, diag, b.data(), u.data(), cfg, true, "screened Poisson", &spectral);
    u += m / shift;
    return u;
}

// ---------------------------------------------------------------------------
// MAC pair

VectorField gradient(const ScalarField& f) {
    const Grid& g = f.grid();
    VectorField out(g);
    const auto st = strides_of(g.n);
    for (int a = 0; a < g.dim; ++a) {
        const Shape fs = g.face_shape(a);
        auto comp = out.component(a);
        const double ih = 1.0 / g.h[a];
        for_each(fs, [&](int i, int j, int k) {
            const Shape p{i, j, k};
            if (p[a] == 0 || p[a] == g.n[a]) return;
            const std::size_t hi = g.index(i, j, k);
            comp[flat_index(fs, i, j, k)] = (f[hi] - f[hi - st[a]]) * ih;
        });
    }
    return out;
}

ScalarField divergence(const VectorField& u) {
    const Grid& g = u.grid();
    ScalarField out(g);
    for (int a = 0; a < g.dim; ++a) {
        const Shape fs = g.face_shape(a);
        const auto fst = strides_of(fs);
        const auto comp = u.component(a);
        const double ih = 1.0 / g.h[a];
        for_each(g.n, [&](int i, int j, int k) {
            const std::size_t lo = flat_index(fs, i, j, k);
            out[g.index(i, j, k)] += (comp[lo + fst[a]] - comp[lo]) * ih;
        });
    }
    return out;
}

double grad_norm_sq(const ScalarField& f) {
    const VectorField gf = gradient(f);
    return dot(gf, gf);
}

VectorField leray_project(const VectorField& u, const LinearSolveConfig& cfg, ScalarField* potential) {
    ScalarField rhs = divergence(u);
    rhs *= -1.0;
    const bool warm = potential && potential->grid() == u.grid() && potential->size() == rhs.size();
    ScalarField q = inv_neumann_laplacian(zero_mean_part(rhs), cfg, warm ? potential : nullptr);
    VectorField out = u;
    out -= gradient(q);
    if (potential) *potential = std::move(q);
    return out;
}

ScalarField convect(const VectorField& u, const ScalarField& f) {
    const Grid& g = f.grid();
    VectorField flux(g);
    const auto st = strides_of(g.n);
    for (int a = 0; a < g.dim; ++a) {
        const Shape fs = g.face_shape(a);
        const auto ua = u.component(a);
        auto fa = flux.component(a);
        for_each(fs, [&](int i, int j, int k) {
            const Shape p{i, j, k};
            if (p[a] == 0 || p[a] == g.n[a]) return;
            const std::size_t hi = g.index(i, j, k);
            const std::size_t fi = flat_index(fs, i, j, k);
            fa[fi] = ua[fi] * 0.5 * (f[hi] + f[hi - st[a]]);
        });
    }
    return divergence(flux);
}

VectorField momentum_convect(const VectorField& u) {
    const Grid& g = u.grid();
    VectorField out(g);
    for (int a = 0; a < g.dim; ++a) {
        const Shape fs = g.face_shape(a);
        const auto fst = strides_of(fs);
        const auto ua = u.component(a);
        auto oa = out.component(a);

        // Normal flux at cell centers.
        std::vector<double> fc(g.cells());
        for_each(g.n, [&](int i, int j, int k) {
            const std::size_t lo = flat_index(fs, i, j, k);
            const double ub = 0.5 * (ua[lo] + ua[lo + fst[a]]);
            fc[g.index(i, j, k)] = ub * ub;
        });
        const auto cst = strides_of(g.n);
        for_each(fs, [&](int i, int j, int k) {
            const Shape p{i, j, k};
            if (p[a] == 0 || p[a] == g.n[a]) return;
            const std::size_t hi = g.index(i, j, k);
            oa[flat_index(fs, i, j, k)] += (fc[hi] - fc[hi - cst[a]]) / g.h[a];
        });

        // Transverse fluxes on edges.
        for (int b = 0; b < g.dim; ++b) {
            if (b == a) continue;
            const Shape es = edge_shape(g, a, b);
            const Shape bs = g.face_shape(b);
            const auto bst = strides_of(bs);
            const auto ub = u.component(b);
            std::vector<double> fe(std::size_t(es[0]) * es[1] * es[2], 0.0);
            for_each(es, [&](int i, int j, int k) {
                const Shape q{i, j, k};
                if (on_wall(g, q, a) || on_wall(g, q, b)) return;
                // u_b averaged along a, u_a averaged along b.
                const std::size_t bhi = flat_index(bs, i, j, k);
                const double vb = 0.5 * (ub[bhi] + ub[bhi - bst[a]]);
                const std::size_t ahi = flat_index(fs, i, j, k);
                const double va = 0.5 * (ua[ahi] + ua[ahi - fst[b]]);
                fe[flat_index(es, i, j, k)] = vb * va;
            });
            const auto est = strides_of(es);
            for_each(fs, [&](int i, int j, int k) {
                const Shape p{i, j, k};
                if (p[a] == 0 || p[a] == g.n[a]) return;
                const std::size_t lo = flat_index(es, i, j, k);
                oa[flat_index(fs, i, j, k)] += (fe[lo + est[b]] - fe[lo]) / g.h[b];
            });
        }
    }
    return out;
}

double advective_work(const VectorField& v, const ScalarField& f, const ScalarField& mu) {
    const Grid& g = f.grid();
    const auto st = strides_of(g.n);
    CompensatedSum s;
    for (int a = 0; a < g.dim; ++a) {
        const Shape fs = g.face_shape(a);
        const auto va = v.component(a);
        for_each(fs, [&](int i, int j, int k) {
            const Shape p{i, j, k};
            if (p[a] == 0 || p[a] == g.n[a]) return;
            const std::size_t hi = g.index(i, j, k);
            const std::size_t lo = hi - st[a];
            s.add(va[flat_index(fs, i, j, k)] * (f[hi] - f[lo]) / g.h[a] * 0.5 * (mu[hi] + mu[lo]));
        });
    }
    return s.value() * g.cell_volume();
}

// ---------------------------------------------------------------------------
// Variable viscosity

ViscosityStencil ViscosityStencil::from_cells(const ScalarField& nu) {
    const Grid& g = nu.grid();
    ViscosityStencil vs;
    vs.grid = g;
    vs.center = nu.values();
    for (int a = 0; a < g.dim; ++a) {
        for (int b = a + 1; b < g.dim; ++b) {
            const Shape es = edge_shape(g, a, b);
            auto& e = vs.edge[pair_slot(a, b)];
            e.assign(std::size_t(es[0]) * es[1] * es[2], 0.0);
            for_each(es, [&](int i, int j, int k) {
                const Shape q{i, j, k};
                double sum = 0.0;
                int count = 0;
                for (int da = -1; da <= 0; ++da) {
                    for (int db = -1; db <= 0; ++db) {
                        Shape c = q;
                        c[a] += da;
                        c[b] += db;
                        if (c[a] < 0 || c[a] >= g.n[a] || c[b] < 0 || c[b] >= g.n[b]) continue;
                        sum += nu(c[0], c[1], c[2]);
                        ++count;
                    }
                }
                e[flat_index(es, i, j, k)] = sum / count;
            });
        }
    }
    return vs;
}

namespace {

struct StrainParts {
    std::array<std::vector<double>, 3> normal;  // ∂_a u_a at centers
    std::array<std::vector<double>, 3> shear;   // ∂_b u_a + ∂_a u_b at edges, per pair
};

StrainParts strain(const VectorField& u) {
    const Grid& g = u.grid();
    StrainParts s;
    for (int a = 0; a < g.dim; ++a) {
        const Shape fs = g.face_shape(a);
        const auto fst = strides_of(fs);
        const auto ua = u.component(a);
        s.normal[a].resize(g.cells());
        for_each(g.n, [&](int i, int j, int k) {
            const std::size_t lo = flat_index(fs, i, j, k);
            s.normal[a][g.index(i, j, k)] = (ua[lo + fst[a]] - ua[lo]) / g.h[a];
        });
    }
    for (int a = 0; a < g.dim; ++a) {
        for (int b = a + 1; b < g.dim; ++b) {
            const Shape es = edge_shape(g, a, b);
            auto& e = s.shear[pair_slot(a, b)];
            e.assign(std::size_t(es[0]) * es[1] * es[2], 0.0);
            const auto ua = u.component(a);
            const auto ub = u.component(b);
            for_each(es, [&](int i, int j, int k) {
                const Shape q{i, j, k};
                double d = 0.0;
                if (!on_wall(g, q, a)) d += edge_derivative(g, ua, a, b, q);
                if (!on_wall(g, q, b)) d += edge_derivative(g, ub, b, a, q);
                e[flat_index(es, i, j, k)] = d;
            });
        }
    }
    return s;
}

double edge_weight(const Grid& g, const Shape& q, int a, int b) {
    double w = 1.0;
    if (on_wall(g, q, a)) w *= 0.5;
    if (on_wall(g, q, b)) w *= 0.5;
    return w;
}

std::vector<double> viscous_diagonal(const ViscosityStencil& nu) {
    const Grid& g = nu.grid;
    VectorField d(g);
    const auto cst = strides_of(g.n);
    for (int a = 0; a < g.dim; ++a) {
        const Shape fs = g.face_shape(a);
        auto da = d.component(a);
        for_each(fs, [&](int i, int j, int k) {
            const Shape p{i, j, k};
            if (p[a] == 0 || p[a] == g.n[a]) return;
            const std::size_t hi = g.index(i, j, k);
            double acc = 2.0 * (nu.center[hi] + nu.center[hi - cst[a]]) / (g.h[a] * g.h[a]);
            for (int b = 0; b < g.dim; ++b) {
                if (b == a) continue;
                const Shape es = edge_shape(g, a, b);
                const auto& e = nu.edge[pair_slot(a, b)];
                for (int off = 0; off <= 1; ++off) {
                    Shape q = p;
                    q[b] += off;
                    const double c = (q[b] == 0 || q[b] == g.n[b]) ? 2.0 : 1.0;
                    acc += e[flat_index(es, q[0], q[1], q[2])] * c / (g.h[b] * g.h[b]);
                }
            }
            da[flat_index(fs, i, j, k)] = acc;
        });
    }
    std::vector<double> out(d.flat().begin(), d.flat().end());
    return out;
}

} // namespace

VectorField viscous_apply(const VectorField& u, const ViscosityStencil& nu) {
    const Grid& g = u.grid();
    const StrainParts s = strain(u);
    const auto cst = strides_of(g.n);
    VectorField out(g);
    for (int a = 0; a < g.dim; ++a) {
        const Shape fs = g.face_shape(a);
        auto oa = out.component(a);
        for_each(fs, [&](int i, int j, int k) {
            const Shape p{i, j, k};
            if (p[a] == 0 || p[a] == g.n[a]) return;
            const std::size_t hi = g.index(i, j, k);
            const std::size_t lo = hi - cst[a];
            const double thi = 2.0 * nu.center[hi] * s.normal[a][hi];
            const double tlo = 2.0 * nu.center[lo] * s.normal[a][lo];
            double acc = -(thi - tlo) / g.h[a];
            for (int b = 0; b < g.dim; ++b) {
                if (b == a) continue;
                const Shape es = edge_shape(g, a, b);
                const auto est = strides_of(es);
                const int slot = pair_slot(a, b);
                const std::size_t e0 = flat_index(es, i, j, k);
                const std::size_t e1 = e0 + est[b];
                const double t0 = nu.edge[slot][e0] * s.shear[slot][e0];
                const double t1 = nu.edge[slot][e1] * s.shear[slot][e1];
                acc -= (t1 - t0) / g.h[b];
            }
            oa[flat_index(fs, i, j, k)] = acc;
        });
    }
    return out;
}

double viscous_dissipation(const VectorField& u, const ViscosityStencil& nu) {
    const Grid& g = u.grid();
    const StrainParts s = strain(u);
    CompensatedSum acc;
    for (int a = 0; a < g.dim; ++a)
        for (std::size_t c = 0; c < g.cells(); ++c)
            acc.add(2.0 * nu.center[c] * s.normal[a][c] * s.normal[a][c]);
    for (int a = 0; a < g.dim; ++a) {
        for (int b = a + 1; b < g.dim; ++b) {
            const Shape es = edge_shape(g, a, b);
            const int slot = pair_slot(a, b);
            for_each(es, [&](int i, int j, int k) {
                const std::size_t e = flat_index(es, i, j, k);
                const double d = s.shear[slot][e];
                acc.add(edge_weight(g, {i, j, k}, a, b) * nu.edge[slot][e] * d * d);
            });
        }
    }
    return acc.value() * g.cell_volume();
}

double velocity_grad_norm_sq(const VectorField& u) {
    const Grid& g = u.grid();
    CompensatedSum acc;
    const StrainParts s = strain(u);
    for (int a = 0; a < g.dim; ++a)
        for (double d : s.normal[a]) acc.add(d * d);
    for (int a = 0; a < g.dim; ++a) {
        const auto ua = u.component(a);
        for (int b = 0; b < g.dim; ++b) {
            if (b == a) continue;
            const Shape es = edge_shape(g, a, b);
            for_each(es, [&](int i, int j, int k) {
                const Shape q{i, j, k};
                if (on_wall(g, q, a)) return;
                const double d = edge_derivative(g, ua, a, b, q);
                acc.add((on_wall(g, q, b) ? 0.5 : 1.0) * d * d);
            });
        }
    }
    return acc.value() * g.cell_volume();
}

VectorField momentum_viscous_solve(const VectorField& rhs, const ScalarField& nu, double dt,
                                   const LinearSolveConfig& cfg, const VectorField* guess) {
    if (!(dt > 0.0)) throw InvalidArgument("momentum solve needs dt > 0");
    for (double v : nu.data()) {
        if (!(v > 0.0)) throw InvalidArgument("viscosity must be strictly positive");
    }
    const Grid& g = rhs.grid();
    const ViscosityStencil stencil = ViscosityStencil::from_cells(nu);
    std::vector<double> diag = viscous_diagonal(stencil);
    for (double& d : diag) d = 1.0 + dt * d;

    VectorField b = rhs;
    b.enforce_no_slip();
    VectorField x = guess ? *guess : VectorField(g);
    x.enforce_no_slip();
    VectorField work(g);
    auto apply = [&](std::span<const double> in, std::span<double> out) {
        std::copy(in.begin(), in.end(), work.flat().begin());
        const VectorField k = viscous_apply(work, stencil);
        const auto kf = k.flat();
        for (std::size_t c = 0; c < out.size(); ++c) out[c] = in[c] + dt * kf[c];
    };
    // Componentwise inverse of I + dt ν̄ (-Δ) with ν̄ the mean viscosity.
    double nu_bar = 0.0;
    for (double v : nu.data()) nu_bar += v;
    nu_bar /= double(nu.size());
    const LinearApply spectral = [&](std::span<const double> in, std::span<double> out) {
        std::size_t off = 0;
        for (int a = 0; a < g.dim; ++a) {
            const std::size_t len = g.face_count(a);
            apply_face_symbol(g, a, in.subspan(off, len), out.subspan(off, len),
                              [=](double l) { return 1.0 / (1.0 + dt * nu_bar * l); });
            off += len;
        }
    };
    solve_spd(apply, diag, b.flat(), x.flat(), cfg, false, "variable-viscosity momentum solve", &spectral);
    x.enforce_no_slip();
    return x;
}

} // namespace chns
