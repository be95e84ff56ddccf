#pragma once

#include "chns/diagnostics.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chns {

inline constexpr std::string_view kTimeseriesHeader =
    "t,step,E_total,F_free,D_diss,phi_mean,phi_mean_pred,phi_mean_err,sigma_mean,sigma_drift,"
    "separation,grad_mu,grad_sigchi,v_h1,lambda,energy_residual";

/// 17 significant digits, the shortest form that always round-trips.
std::string format_double(double v);

/// One CSV row (no newline). ∫μ is not part of the schema.
std::string format_timeseries_row(const DiagnosticsRecord& r);

void write_timeseries_csv(const std::filesystem::path& path, std::span<const DiagnosticsRecord> records);

/// Parses a file written by write_timeseries_csv; mu_integral is left at 0.
std::vector<DiagnosticsRecord> read_timeseries_csv(const std::filesystem::path& path);

/// Appends rows as they are produced; the header is written on open.
class TimeseriesWriter {
public:
    explicit TimeseriesWriter(const std::filesystem::path& path);
    void append(const DiagnosticsRecord& r);
    void flush();

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

/// Numeric CSV with a header row.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    /// Throws InvalidArgument if `name` is not a column.
    std::vector<double> column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Legacy ASCII VTK, STRUCTURED_POINTS with one point per cell center:
/// φ, μ, σ, p as SCALARS and the cell-averaged velocity as VECTORS.
void write_vtk_snapshot(const SimState& state, const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: "CHNS", u32 version, u8 dimension, u64 dims,
/// f64 lengths, f64 t, u64 step, f64 φ̄0, σ̄0 and the discrete φ̄, u64 clip
/// events, then v (all components), p, φ, μ, σ, each as u64 count followed
/// by little-endian f64 values in row-major order.
void save_checkpoint(const SimState& state, const std::filesystem::path& path);
SimState load_checkpoint(const std::filesystem::path& path);

} // namespace chns
