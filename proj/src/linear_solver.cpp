#include "chns/linear_solver.hpp"

#include "chns/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace chns {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void remove_mean(std::span<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / double(v.size());
    for (double& x : v) x -= m;
}

SolveStats solve_dense(const LinearApply& apply, std::span<const double> b, std::span<double> x,
                       bool zero_mean) {
    const std::size_t n = b.size();
    Eigen::MatrixXd a(n, n);
    std::vector<double> e(n, 0.0), col(n);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        apply(e, col);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) a(i, j) = col[i];
    }
    // Pinning the constant mode makes the singular Neumann operator invertible
    // without changing its action on zero-sum vectors.
    if (zero_mean) a.array() += 1.0 / double(n);
    Eigen::Map<const Eigen::VectorXd> rhs(b.data(), Eigen::Index(n));
    Eigen::VectorXd sol = a.ldlt().solve(rhs);
    for (std::size_t i = 0; i < n; ++i) x[i] = sol[Eigen::Index(i)];
    if (zero_mean) remove_mean(x);

    std::vector<double> r(n);
    apply(x, r);
    double rr = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rr += (b[i] - r[i]) * (b[i] - r[i]);
        bb += b[i] * b[i];
    }
    return {1, bb > 0.0 ? std::sqrt(rr / bb) : 0.0};
}

} // namespace

void LinearSolveConfig::validate(std::size_t unknowns) const {
    if (!(tol > 0.0 && tol < 1.0)) throw InvalidArgument("linear solver tol must lie in (0, 1)");
    if (max_iter < 0) throw InvalidArgument("linear solver max_iter must be positive");
    if (method == SolverMethod::DirectDense && unknowns > kMaxDenseUnknowns) {
        throw InvalidArgument("DirectDense solver limited to " + std::to_string(kMaxDenseUnknowns) +
                              " unknowns, system has " + std::to_string(unknowns));
    }
}

SolveStats solve_spd(const LinearApply& apply, std::span<const double> diag,
                     std::span<const double> b, std::span<double> x,
                     const LinearSolveConfig& cfg, bool zero_mean, const std::string& what,
                     const LinearApply* spectral) {
    const std::size_t n = b.size();
    cfg.validate(n);
    if (cfg.method == SolverMethod::DirectDense) return solve_dense(apply, b, x, zero_mean);

    double bmax = 0.0;
    for (double v : b) bmax = std::max(bmax, std::abs(v));
    if (bmax == 0.0) {
        for (double& v : x) v = 0.0;
        return {};
    }
    // Iterate on b / max|b| so tiny right-hand sides cannot underflow p·Ap.
    std::vector<double> bs(b.begin(), b.end());
    for (double& v : bs) v /= bmax;
    for (double& v : x) v /= bmax;
    auto unscale = [&] {
        for (double& v : x) v *= bmax;
    };
    const double bnorm = std::sqrt(dot(bs, bs));
    const int max_iter = cfg.max_iter > 0 ? cfg.max_iter : int(10 * n);

    const bool use_spectral = spectral && cfg.preconditioner == Preconditioner::Spectral;
    auto precondition = [&](const std::vector<double>& r, std::vector<double>& z) {
        if (use_spectral) {
            (*spectral)(r, z);
        } else {
            for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
        }
        if (zero_mean) remove_mean(z);
    };

    std::vector<double> r(n), z(n), p(n), ap(n);
    if (zero_mean) remove_mean(x);
    apply(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = bs[i] - ap[i];
    if (zero_mean) remove_mean(r);

    double rnorm = std::sqrt(dot(r, r));
    if (rnorm <= cfg.tol * bnorm) {
        unscale();
        return {0, rnorm / bnorm};
    }

    precondition(r, z);
    p = z;
    double rz = dot(r, z);

    for (int it = 1; it <= max_iter; ++it) {
        apply(p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) {
            throw SolverError(what + ": operator lost positive definiteness", rnorm / bnorm, it);
        }
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if (zero_mean) remove_mean(r);
        rnorm = std::sqrt(dot(r, r));
        if (!std::isfinite(rnorm)) throw SolverError(what + ": diverged", rnorm, it);
        if (rnorm <= cfg.tol * bnorm) {
            if (zero_mean) remove_mean(x);
            unscale();
            return {it, rnorm / bnorm};
        }
        precondition(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw SolverError(what + ": conjugate gradient did not converge", rnorm / bnorm, max_iter);
}

} // namespace chns
