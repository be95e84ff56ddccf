#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace chns {

enum class SolverMethod { ConjugateGradient, DirectDense };

/// CG preconditioner. Spectral uses a fast cosine/sine transform inverse of
/// the constant-coefficient part when the caller supplies one, and falls
/// back to Jacobi otherwise.
enum class Preconditioner { Spectral, Jacobi };

struct LinearSolveConfig {
    SolverMethod method = SolverMethod::ConjugateGradient;
    double tol = 1e-10;   ///< relative residual ||b - Ax|| / ||b||
    int max_iter = 0;     ///< 0 selects 10 * unknowns
    Preconditioner preconditioner = Preconditioner::Spectral;

    /// Throws InvalidArgument when the configuration cannot be used for `unknowns`.
    void validate(std::size_t unknowns) const;
};

/// Largest system the dense oracle path will assemble.
inline constexpr std::size_t kMaxDenseUnknowns = 65536;

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

using LinearApply = std::function<void(std::span<const double>, std::span<double>)>;

/// Solves A x = b for a symmetric positive (semi)definite operator.
///
/// `diag` is the operator diagonal, used as a Jacobi preconditioner by CG.
/// With `zero_mean` set the operator is treated as singular with the
/// constants as kernel: b must sum to zero, and iterates, residuals and the
/// returned solution are kept in the zero-sum subspace. `x` carries the
/// initial guess on entry. `spectral`, if given, is an approximate inverse
/// used instead of Jacobi when cfg selects the spectral preconditioner.
/// Throws SolverError on non-convergence.
SolveStats solve_spd(const LinearApply& apply, std::span<const double> diag,
                     std::span<const double> b, std::span<double> x,
                     const LinearSolveConfig& cfg, bool zero_mean, const std::string& what,
                     const LinearApply* spectral = nullptr);

} // namespace chns
