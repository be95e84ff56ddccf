#pragma once

#include "chns/grid.hpp"
#include "chns/linear_solver.hpp"
#include "chns/potentials.hpp"

#include <cstdint>
#include <functional>

namespace chns {

/// Velocity, pressure, phase, chemical potential and nutrient at one time level.
struct SimState {
    VectorField v;
    ScalarField p;
    ScalarField phi;
    ScalarField mu;
    ScalarField sigma;
    double t = 0.0;
    std::uint64_t step = 0;
    double phi_mean0 = 0.0;
    double sigma_mean0 = 0.0;

    /// φ̄ predicted by the implicit mean recurrence of the steps actually taken.
    double phi_mean_discrete = 0.0;
    /// Potential evaluations that had to be clamped away from ±1.
    std::uint64_t clip_events = 0;
};

struct StepperConfig {
    double dt = 1e-3;
    double S = 1.0;       ///< stabilization S(φⁿ⁺¹ - φⁿ)
    double gamma = 0.0;   ///< viscous Cahn–Hilliard term γ ∂ₜφ
    PotentialSpec potential;
    PhysParams params;
    LinearSolveConfig linear;
    double clip_floor = 1e-6;  ///< Flory–Huggins steps must keep ||φ||∞ < 1 - clip_floor
    bool fluid = true;         ///< false freezes v at zero (no momentum solve)

    void validate() const;
};

/// S that keeps the stabilized splitting energy stable.
///
/// Quartic: 1, half the maximum of Ψ'' on [-1, 1]. Flory–Huggins: half of
/// Ψ'' + θ0 at the admissible bound r = max(||φ0||∞, binodal of θ0 + χ²).
/// Both add χ²/2 for the explicit coupling, and β / (2 λ1) with λ1 the
/// first Neumann eigenvalue when β > 0.
double default_stabilization(const PotentialSpec& potential, const PhysParams& params,
                             const ScalarField& phi0);

/// μ = -Δφ + Ψ'(φ) - χσ + β N(φ - φ̄).
ScalarField chemical_potential(const ScalarField& phi, const ScalarField& sigma,
                               const PhysParams& params, const PotentialSpec& potential,
                               const LinearSolveConfig& linear = {}, ClipCounter* clips = nullptr);

/// Builds a state at t = 0 with μ computed from (φ, σ) and zero pressure.
SimState make_state(ScalarField phi, ScalarField sigma, const PhysParams& params,
                    const PotentialSpec& potential, const VectorField* v = nullptr,
                    const LinearSolveConfig& linear = {});

struct PhaseUpdate {
    ScalarField phi;
    ScalarField mu;
    std::uint64_t clips = 0;
};

/// Stabilized semi-implicit Cahn–Hilliard–Oono step with convection by vⁿ.
PhaseUpdate step_phase(const SimState& state, const StepperConfig& cfg);

/// Implicit diffusion of σ with active transport by the new φ; mean kept exactly.
ScalarField step_sigma(const SimState& state, const ScalarField& phi_next, const StepperConfig& cfg);

struct VelocityUpdate {
    VectorField v;
    ScalarField p;
    double cfl = 0.0;  ///< max|v| dt / h of the incoming velocity
};

/// Projection step: explicit convection, projected capillary force
/// (μ + χσ)∇φ at faces, implicit viscous solve, then Leray projection.
VelocityUpdate step_velocity(const SimState& state, const ScalarField& phi_next,
                             const ScalarField& mu_next, const ScalarField& sigma_next,
                             const StepperConfig& cfg);

/// Phase → nutrient → velocity. A Flory–Huggins step that reaches the
/// separation floor is retried as two half steps; a second failure throws
/// SeparationError.
SimState step(const SimState& state, const StepperConfig& cfg);

struct RunCallbacks {
    /// Called with the initial state and after every step.
    std::function<void(const SimState&)> on_step;
    /// Returns true to stop early; checked after every step.
    std::function<bool(const SimState&)> stop;
    /// Called every `checkpoint_every` steps (0 disables).
    std::function<void(const SimState&)> on_checkpoint;
    std::uint64_t checkpoint_every = 0;
};

/// Steps until t reaches t_end (the last step is shortened to land on it)
/// or `stop` fires.
SimState run(SimState state, const StepperConfig& cfg, double t_end, const RunCallbacks& callbacks = {});

/// Warnings (CFL) are sent here; the default writes to stderr.
void set_warning_sink(std::function<void(const std::string&)> sink);
void emit_warning(const std::string& message);

} // namespace chns
