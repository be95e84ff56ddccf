#include "chns/potentials.hpp"

#include "chns/error.hpp"
#include "chns/operators.hpp"

#include <algorithm>
#include <cmath>

namespace chns {

void PotentialSpec::validate() const {
    if (!(clip_delta > 0.0 && clip_delta < 0.5)) {
        throw InvalidArgument("clip_delta must lie in (0, 0.5)");
    }
    if (kind == PotentialKind::FloryHuggins && !(theta > 0.0 && theta < theta0)) {
        throw InvalidArgument("Flory-Huggins potential requires 0 < theta < theta0");
    }
}

namespace {

double clamp_arg(const PotentialSpec& spec, double r, ClipCounter* clips) {
    if (std::isnan(r)) throw InvalidArgument("potential evaluated at NaN");
    if (spec.kind != PotentialKind::FloryHuggins) return r;
    const double lim = 1.0 - spec.clip_delta;
    if (r > lim || r < -lim) {
        if (clips) clips->record();
        return std::clamp(r, -lim, lim);
    }
    return r;
}

} // namespace

double psi(const PotentialSpec& spec, double r, ClipCounter* clips) {
    r = clamp_arg(spec, r, clips);
    if (spec.kind == PotentialKind::Quartic) {
        const double s = 1.0 - r * r;
        return 0.25 * s * s;
    }
    return 0.5 * spec.theta * ((1.0 - r) * std::log1p(-r) + (1.0 + r) * std::log1p(r)) +
           0.5 * spec.theta0 * (1.0 - r * r);
}

double psi_prime(const PotentialSpec& spec, double r, ClipCounter* clips) {
    r = clamp_arg(spec, r, clips);
    if (spec.kind == PotentialKind::Quartic) return r * r * r - r;
    return spec.theta * std::atanh(r) - spec.theta0 * r;
}

double psi_double_prime(const PotentialSpec& spec, double r, ClipCounter* clips) {
    r = clamp_arg(spec, r, clips);
    if (spec.kind == PotentialKind::Quartic) return 3.0 * r * r - 1.0;
    return spec.theta / (1.0 - r * r) - spec.theta0;
}

double psi0_prime(const PotentialSpec& spec, double r, ClipCounter* clips) {
    r = clamp_arg(spec, r, clips);
    return spec.theta * std::atanh(r);
}

double psi0_double_prime(const PotentialSpec& spec, double r, ClipCounter* clips) {
    r = clamp_arg(spec, r, clips);
    return spec.theta / (1.0 - r * r);
}

ScalarField psi_prime(const PotentialSpec& spec, const ScalarField& phi, ClipCounter* clips) {
    ScalarField out(phi.grid());
    for (std::size_t c = 0; c < phi.size(); ++c) out[c] = psi_prime(spec, phi[c], clips);
    return out;
}

double binodal_value(const PotentialSpec& spec) {
    if (spec.kind == PotentialKind::Quartic) return 1.0;
    // θ artanh(r) - θ0 r changes sign once on (0, 1) when θ < θ0.
    double lo = 1e-12, hi = 1.0 - 1e-16;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (spec.theta * std::atanh(mid) - spec.theta0 * mid < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

void PhysParams::validate() const {
    if (!(nu1 > 0.0) || !(nu2 > 0.0)) throw InvalidArgument("viscosities nu1, nu2 must be positive");
    if (alpha < 0.0) throw InvalidArgument("alpha must be nonnegative");
    if (gamma < 0.0) throw InvalidArgument("gamma must be nonnegative");
    if (!(c0 > -1.0 && c0 < 1.0)) throw InvalidArgument("c0 must lie in (-1,1)");
    for (double v : {nu1, nu2, chi, alpha, beta, c0, gamma}) {
        if (!std::isfinite(v)) throw InvalidArgument("physical parameters must be finite");
    }
}

namespace {

// C¹ clamp to [-1, 1]; identity away from the corners, quadratic blend
// within half a corner width on either side of ±1.
double smooth_unit_clamp(double r) {
    const double w = kViscosityCornerWidth;
    const double s = r < 0.0 ? -1.0 : 1.0;
    const double x = std::abs(r);
    if (x <= 1.0 - 0.5 * w) return r;
    if (x >= 1.0 + 0.5 * w) return s;
    const double d = x - (1.0 - 0.5 * w);
    return s * (x - d * d / (2.0 * w));
}

} // namespace

double viscosity(const PhysParams& params, double r) {
    const double rh = smooth_unit_clamp(r);
    return params.nu1 * 0.5 * (1.0 + rh) + params.nu2 * 0.5 * (1.0 - rh);
}

ScalarField viscosity(const PhysParams& params, const ScalarField& phi) {
    ScalarField out(phi.grid());
    for (std::size_t c = 0; c < phi.size(); ++c) out[c] = viscosity(params, phi[c]);
    return out;
}

double cutoff_hk(double k, double r) {
    if (r > k) return k;
    if (r < -k) return -k;
    return r;
}

// ---------------------------------------------------------------------------
// Initial-datum regularization

ScalarField regularize_initial_phi(const ScalarField& phi0, double k, const PotentialSpec& spec,
                                   const LinearSolveConfig& cfg, RegularizeReport* report) {
    if (spec.kind != PotentialKind::FloryHuggins) {
        throw InvalidArgument("regularize_initial_phi requires a Flory-Huggins potential");
    }
    if (!(k > 0.0)) throw InvalidArgument("cut-off level k must be positive");
    if (phi0.max_abs() > 1.0) throw InvalidArgument("initial phase field must satisfy |phi0| <= 1");
    if (std::abs(mean(phi0)) >= 1.0) throw InvalidArgument("initial phase field mean must lie in (-1,1)");

    const Grid& g = phi0.grid();
    const std::size_t n = g.cells();

    // Target: h_k(-Δφ0 + Ψ0'(φ0)).
    ScalarField target(g);
    {
        const ScalarField lap = laplacian_neumann(phi0);
        for (std::size_t c = 0; c < n; ++c) {
            target[c] = cutoff_hk(k, -lap[c] + psi0_prime(spec, phi0[c]));
        }
    }

    // Newton in w = Ψ0'(φ), so φ = tanh(w/θ) stays strictly inside (-1, 1)
    // and the residual keeps full accuracy near the pure phases.
    auto to_phi = [&](const ScalarField& w) {
        ScalarField phi(g);
        for (std::size_t c = 0; c < n; ++c) phi[c] = std::tanh(w[c] / spec.theta);
        return phi;
    };
    auto residual = [&](const ScalarField& w) {
        const ScalarField phi = to_phi(w);
        ScalarField r(g);
        apply_neg_laplacian(g, phi.data(), r.data());
        for (std::size_t c = 0; c < n; ++c) r[c] += w[c] - target[c];
        return r;
    };

    constexpr int kMaxNewton = 50;
    constexpr double kTol = 1e-10;
    const auto lap_diag = neg_laplacian_diagonal(g);

    ScalarField w = target;
    ScalarField r = residual(w);
    double rnorm = norm_l2(r);
    int it = 0;
    LinearSolveConfig inner = cfg;
    inner.tol = std::min(cfg.tol, 1e-12);
    while (rnorm >= kTol) {
        if (it == kMaxNewton) {
            throw SolverError("regularize_initial_phi: Newton did not converge", rnorm, it);
        }
        ++it;
        // J δw = A D δw + δw with D = dφ/dw; for y = D δw the system
        // (A + D⁻¹) y = -r is symmetric positive definite.
        std::vector<double> dinv(n), diag(n);
        for (std::size_t c = 0; c < n; ++c) {
            const double ch = std::cosh(w[c] / spec.theta);
            dinv[c] = spec.theta * ch * ch;
            diag[c] = lap_diag[c] + dinv[c];
        }
        auto apply = [&](std::span<const double> x, std::span<double> y) {
            apply_neg_laplacian(g, x, y);
            for (std::size_t c = 0; c < n; ++c) y[c] += dinv[c] * x[c];
        };
        ScalarField rhs = r;
        rhs *= -1.0;
        ScalarField y(g);
        solve_spd(apply, diag, rhs.data(), y.data(), inner, false, "Newton step");
        ScalarField step(g);
        for (std::size_t c = 0; c < n; ++c) step[c] = dinv[c] * y[c];

        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            ScalarField trial = w;
            for (std::size_t c = 0; c < n; ++c) trial[c] += lambda * step[c];
            ScalarField rt = residual(trial);
            const double tn = norm_l2(rt);
            if (tn <= (1.0 - 1e-4 * lambda) * rnorm) {
                w = std::move(trial);
                r = std::move(rt);
                rnorm = tn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            throw SolverError("regularize_initial_phi: line search failed", rnorm, it);
        }
    }

    ScalarField phi = to_phi(w);
    if (phi.max_abs() >= 1.0) {
        throw SeparationError("regularize_initial_phi: cut-off level too large to separate from the pure phases in double precision", 0.0);
    }

    if (report) {
        report->newton_iterations = it;
        report->residual = rnorm;
        report->separation = 1.0 - phi.max_abs();
        report->max_psi0_prime = w.max_abs();
    }
    return phi;
}

ScalarField regularize_initial_sigma(const ScalarField& sigma0, double k, const LinearSolveConfig& cfg) {
    if (!(k > 0.0)) throw InvalidArgument("cut-off level k must be positive");
    return solve_screened(sigma0, 1.0, 1.0 / k, cfg);
}

} // namespace chns
