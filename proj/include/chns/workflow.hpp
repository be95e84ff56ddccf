#pragma once

#include "chns/config.hpp"
#include "chns/diagnostics.hpp"
#include "chns/stationary.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace chns {

/// Zero-mean random field of the given L² norm, smoothed like random_start.
ScalarField random_perturbation(const Grid& grid, double l2_norm, int smoothing_passes, std::uint64_t seed,
                                const LinearSolveConfig& linear = {});

/// Random discretely divergence-free velocity of the given L² norm.
VectorField random_solenoidal(const Grid& grid, double l2_norm, std::uint64_t seed,
                              const LinearSolveConfig& linear = {});

struct InitialData {
    SimState state;
    /// The unperturbed equilibrium for PerturbedEquilibrium starts.
    std::optional<SimState> reference;
};

/// Builds the t = 0 state described by `config.initial`. Checkpoints must
/// match the configured grid.
InitialData make_initial_data(const RunConfig& config);

struct SimulateOptions {
    /// Continue from this checkpoint instead of the initial condition.
    std::optional<std::filesystem::path> resume;
    bool write_files = true;
    std::function<void(const std::string&)> log;
};

struct SimulateSummary {
    SimState final_state;
    double S = 0.0;
    std::vector<DiagnosticsRecord> records;  ///< every step, starting with the initial state
    std::vector<double> distance_t;          ///< filled for PerturbedEquilibrium starts
    std::vector<EquilibriumDistance> distance;
    std::size_t snapshots = 0;
    std::size_t checkpoints = 0;
    std::size_t energy_increases = 0;  ///< steps with E_total rising by more than 1e-12
    double min_separation = 0.0;
};

/// Runs the configured simulation. Output directory layout:
/// timeseries.csv every csv_every steps, snapshot_<step>.vtk every
/// snapshot_every steps and at the end, checkpoint_<step>.chns every
/// checkpoint_every steps, final.chns, and distance.csv when the start is a
/// perturbed equilibrium.
SimulateSummary simulate(const RunConfig& config, const SimulateOptions& opts = {});

struct EquilibrateSummary {
    EquilibriumResult best;
    std::vector<EquilibriumResult> candidates;
    StationaryResidual residual;
    SimState state;  ///< the equilibrium at rest, ready to checkpoint
};

/// Computes an equilibrium with the configured method. Multistart uses the
/// means initial.phi_mean and initial.sigma_mean; the other methods start
/// from the initial condition. Writes equilibrium.chns, equilibrium.vtk and
/// candidates.csv when `write_files` is set.
EquilibrateSummary equilibrate(const RunConfig& config, bool write_files = true);

} // namespace chns
