#include "chns/spectral.hpp"

#include <fftw3.h>

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

namespace chns {

namespace {

// One r2r transform pair over a box of `dims` (fastest axis last, FFTW order)
// together with the eigenvalues of -Δ_h on that box and the normalization.
struct Transform {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    std::vector<double> lambda;
    double scale = 1.0;
    std::size_t size = 0;

    ~Transform() {
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }
};

// Planning is not thread-safe in FFTW; execution on fresh arrays is.
std::mutex plan_mutex;

using Key = std::tuple<int, int, int, int, int, double, double, double>;

std::map<Key, std::unique_ptr<Transform>>& cache() {
    static std::map<Key, std::unique_ptr<Transform>> c;
    return c;
}

// axis < 0: cell-centered Neumann. axis = a: face component a, no-slip.
const Transform& transform_for(const Grid& g, int axis) {
    const Key key{axis, g.dim, g.n[0], g.n[1], g.n[2], g.h[0], g.h[1], g.h[2]};
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto& slot = cache()[key];
    if (slot) return *slot;

    auto t = std::make_unique<Transform>();
    std::array<int, 3> len{};
    std::array<fftw_r2r_kind, 3> fwd{}, bwd{};
    // Per axis: eigenvalue 4/h² sin²(π k / (2 m)) with k from k0.
    std::array<int, 3> k0{}, m{};
    std::array<double, 3> norm{};
    for (int a = 0; a < g.dim; ++a) {
        const int n = g.n[a];
        if (axis < 0) {
            len[a] = n; fwd[a] = FFTW_REDFT10; bwd[a] = FFTW_REDFT01; k0[a] = 0; m[a] = n; norm[a] = 2.0 * n;
        } else if (a == axis) {
            len[a] = n - 1; fwd[a] = FFTW_RODFT00; bwd[a] = FFTW_RODFT00; k0[a] = 1; m[a] = n; norm[a] = 2.0 * n;
        } else {
            len[a] = n; fwd[a] = FFTW_RODFT10; bwd[a] = FFTW_RODFT01; k0[a] = 1; m[a] = n; norm[a] = 2.0 * n;
        }
    }
    t->size = 1;
    t->scale = 1.0;
    for (int a = 0; a < g.dim; ++a) {
        t->size *= std::size_t(len[a]);
        t->scale *= norm[a];
    }
    t->lambda.assign(t->size, 0.0);
    const int lx = len[0], ly = g.dim > 1 ? len[1] : 1, lz = g.dim > 2 ? len[2] : 1;
    auto eig = [&](int a, int idx) {
        const double s = std::sin(std::numbers::pi * double(idx + k0[a]) / (2.0 * m[a]));
        return 4.0 / (g.h[a] * g.h[a]) * s * s;
    };
    for (int k = 0; k < lz; ++k) {
        for (int j = 0; j < ly; ++j) {
            for (int i = 0; i < lx; ++i) {
                double l = eig(0, i);
                if (g.dim > 1) l += eig(1, j);
                if (g.dim > 2) l += eig(2, k);
                t->lambda[(std::size_t(k) * ly + j) * lx + i] = l;
            }
        }
    }

    // FFTW wants the slowest axis first.
    std::array<int, 3> dims{};
    std::array<fftw_r2r_kind, 3> kf{}, kb{};
    for (int a = 0; a < g.dim; ++a) {
        dims[a] = len[g.dim - 1 - a];
        kf[a] = fwd[g.dim - 1 - a];
        kb[a] = bwd[g.dim - 1 - a];
    }
    std::vector<double> buf(std::max<std::size_t>(t->size, 1));
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    if (t->size > 0) {
        t->forward = fftw_plan_r2r(g.dim, dims.data(), buf.data(), buf.data(), kf.data(), flags);
        t->backward = fftw_plan_r2r(g.dim, dims.data(), buf.data(), buf.data(), kb.data(), flags);
    }
    slot = std::move(t);
    return *slot;
}

void apply_symbol(const Transform& t, std::vector<double>& buf, const SpectralSymbol& f) {
    if (t.size == 0) return;
    fftw_execute_r2r(t.forward, buf.data(), buf.data());
    for (std::size_t c = 0; c < t.size; ++c) buf[c] *= f(t.lambda[c]) / t.scale;
    fftw_execute_r2r(t.backward, buf.data(), buf.data());
}

} // namespace

void apply_neumann_symbol(const Grid& g, std::span<const double> in, std::span<double> out,
                          const SpectralSymbol& f) {
    const Transform& t = transform_for(g, -1);
    std::vector<double> buf(in.begin(), in.end());
    apply_symbol(t, buf, f);
    std::copy(buf.begin(), buf.end(), out.begin());
}

void apply_face_symbol(const Grid& g, int axis, std::span<const double> in, std::span<double> out,
                       const SpectralSymbol& f) {
    const Transform& t = transform_for(g, axis);
    const auto s = g.face_shape(axis);
    const int nx = s[0], ny = g.dim > 1 ? s[1] : 1, nz = g.dim > 2 ? s[2] : 1;
    const int i0 = axis == 0 ? 1 : 0, j0 = axis == 1 ? 1 : 0, k0 = axis == 2 ? 1 : 0;
    const int lx = nx - 2 * i0, ly = ny - 2 * j0, lz = nz - 2 * k0;
    std::vector<double> buf(t.size);
    auto face = [&](int i, int j, int k) { return (std::size_t(k) * s[1] + j) * s[0] + i; };
    auto inner = [&](int i, int j, int k) { return (std::size_t(k) * ly + j) * lx + i; };
    for (int k = 0; k < lz; ++k)
        for (int j = 0; j < ly; ++j)
            for (int i = 0; i < lx; ++i) buf[inner(i, j, k)] = in[face(i + i0, j + j0, k + k0)];
    apply_symbol(t, buf, f);
    std::fill(out.begin(), out.end(), 0.0);
    for (int k = 0; k < lz; ++k)
        for (int j = 0; j < ly; ++j)
            for (int i = 0; i < lx; ++i) out[face(i + i0, j + j0, k + k0)] = buf[inner(i, j, k)];
}

} // namespace chns
