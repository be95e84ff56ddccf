#pragma once

#include "chns/evolution.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chns {

enum class InitialKind { Uniform, Random, File, PerturbedEquilibrium };

/// Initial data. `file` names a checkpoint; for PerturbedEquilibrium the
/// checkpoint holds the equilibrium and `amplitude` is the L² size of the
/// zero-mean perturbation applied to φ and to σ.
struct InitialCondition {
    InitialKind kind = InitialKind::Uniform;
    double phi_mean = 0.0;
    double sigma_mean = 0.0;
    double amplitude = 0.05;
    int smoothing = 2;
    std::uint64_t seed = 1;
    std::string file;
    double velocity = 0.0;  ///< L² norm of a random divergence-free v0
};

enum class EquilibrateMethod { Multistart, ChoFlow, Reduced };

struct EquilibrateConfig {
    EquilibrateMethod method = EquilibrateMethod::Multistart;
    double tol = 1e-8;
    double dt = 0.05;
    double gamma = 0.1;
    int max_steps = 100000;
    int n_starts = 4;
    std::uint64_t seed = 1;
    double amplitude = 0.1;
    int smoothing = 2;
};

struct OutputConfig {
    std::string dir = "output";
    std::uint64_t csv_every = 1;
    std::uint64_t snapshot_every = 100;
    std::uint64_t checkpoint_every = 0;  ///< 0 writes only the final checkpoint
};

struct RunConfig {
    std::vector<int> dims;
    std::vector<double> lengths;
    PhysParams params;
    PotentialSpec potential;
    StepperConfig stepper;          ///< params/potential/gamma are kept in sync by the parser
    std::optional<double> S;        ///< empty selects default_stabilization(φ0)
    InitialCondition initial;
    double t_end = 1.0;
    double a1 = 0.1;
    OutputConfig output;
    EquilibrateConfig equilibrate;

    Grid grid() const;
    /// The stepper with S resolved against the initial phase field.
    StepperConfig stepper_for(const ScalarField& phi0) const;
};

/// Parses `key = value` lines with `#` comments. Keys are dotted
/// (`params.chi`); `grid.n` is required. File paths are resolved against
/// `base_dir` and must exist. Throws ConfigError naming the offending line.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

/// Reads and parses a file; relative paths resolve against its directory.
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its value, in a fixed order; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

} // namespace chns
