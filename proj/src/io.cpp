#include "chns/io.hpp"

#include "chns/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>

namespace chns {

std::string format_double(double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, std::size_t(n));
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = end + 1;
    }
    return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

double parse_field(std::string_view s, const std::filesystem::path& path, std::size_t line) {
    const std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
        throw IoError(path.string() + ":" + std::to_string(line) + ": not a number: '" + tmp + "'");
    }
    return v;
}

} // namespace

std::string format_timeseries_row(const DiagnosticsRecord& r) {
    std::string row = format_double(r.t);
    row += ',';
    row += std::to_string(r.step);
    for (double v : {r.E_total, r.F_free, r.D_diss, r.phi_mean, r.phi_mean_predicted, r.phi_mean_error,
                     r.sigma_mean, r.sigma_drift, r.separation, r.grad_mu_norm, r.grad_sigchi_norm,
                     r.v_h1_norm, r.Lambda, r.energy_balance_residual}) {
        row += ',';
        row += format_double(v);
    }
    return row;
}

void write_timeseries_csv(const std::filesystem::path& path, std::span<const DiagnosticsRecord> records) {
    auto out = open_out(path);
    out << kTimeseriesHeader << '\n';
    for (const auto& r : records) out << format_timeseries_row(r) << '\n';
    check_written(out, path);
}

std::vector<DiagnosticsRecord> read_timeseries_csv(const std::filesystem::path& path) {
    const std::string text = read_all(path);
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != kTimeseriesHeader) {
        throw IoError(path.string() + ": missing or unexpected time-series header");
    }
    std::vector<DiagnosticsRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_fields(lines[i]);
        if (f.size() != 16) {
            throw IoError(path.string() + ":" + std::to_string(i + 1) + ": expected 16 fields");
        }
        DiagnosticsRecord r;
        r.t = parse_field(f[0], path, i + 1);
        const auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), r.step);
        if (ec != std::errc() || ptr != f[1].data() + f[1].size()) {
            throw IoError(path.string() + ":" + std::to_string(i + 1) + ": bad step");
        }
        double* targets[] = {&r.E_total, &r.F_free, &r.D_diss, &r.phi_mean, &r.phi_mean_predicted,
                             &r.phi_mean_error, &r.sigma_mean, &r.sigma_drift, &r.separation,
                             &r.grad_mu_norm, &r.grad_sigchi_norm, &r.v_h1_norm, &r.Lambda,
                             &r.energy_balance_residual};
        for (std::size_t k = 0; k < 14; ++k) *targets[k] = parse_field(f[k + 2], path, i + 1);
        out.push_back(r);
    }
    return out;
}

TimeseriesWriter::TimeseriesWriter(const std::filesystem::path& path) : path_(path), out_(open_out(path)) {
    out_ << kTimeseriesHeader << '\n';
}

void TimeseriesWriter::append(const DiagnosticsRecord& r) {
    out_ << format_timeseries_row(r) << '\n';
    if (!out_) throw IoError("write failed: " + path_.string());
}

void TimeseriesWriter::flush() { check_written(out_, path_); }

std::vector<double> CsvTable::column(std::string_view name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw InvalidArgument("no column named '" + std::string(name) + "'");
    const auto c = std::size_t(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[c]);
    return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
    const std::string text = read_all(path);
    const auto lines = split_lines(text);
    if (lines.empty()) throw IoError(path.string() + ": empty CSV");
    CsvTable table;
    for (auto f : split_fields(lines[0])) table.columns.emplace_back(f);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_fields(lines[i]);
        if (f.size() != table.columns.size()) {
            throw IoError(path.string() + ":" + std::to_string(i + 1) + ": expected " +
                          std::to_string(table.columns.size()) + " fields");
        }
        std::vector<double> row;
        row.reserve(f.size());
        for (auto s : f) row.push_back(parse_field(s, path, i + 1));
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    auto out = open_out(path);
    for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
        out << '\n';
    }
    check_written(out, path);
}

void write_vtk_snapshot(const SimState& state, const std::filesystem::path& path) {
    const Grid& g = state.phi.grid();
    const bool three = g.dim == 3;
    auto out = open_out(path);
    out << "# vtk DataFile Version 3.0\n"
        << "chns t=" << format_double(state.t) << " step=" << state.step << "\n"
        << "ASCII\nDATASET STRUCTURED_POINTS\n"
        << "DIMENSIONS " << g.n[0] << ' ' << g.n[1] << ' ' << g.n[2] << '\n'
        << "ORIGIN " << format_double(0.5 * g.h[0]) << ' ' << format_double(0.5 * g.h[1]) << ' '
        << format_double(three ? 0.5 * g.h[2] : 0.0) << '\n'
        << "SPACING " << format_double(g.h[0]) << ' ' << format_double(g.h[1]) << ' '
        << format_double(three ? g.h[2] : 1.0) << '\n'
        << "POINT_DATA " << g.cells() << '\n';

    const std::pair<const char*, const ScalarField*> scalars[] = {
        {"phi", &state.phi}, {"mu", &state.mu}, {"sigma", &state.sigma}, {"p", &state.p}};
    for (const auto& [name, field] : scalars) {
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : field->values()) out << format_double(v) << '\n';
    }

    out << "VECTORS velocity double\n";
    for (int k = 0; k < g.n[2]; ++k) {
        for (int j = 0; j < g.n[1]; ++j) {
            for (int i = 0; i < g.n[0]; ++i) {
                const double vx = 0.5 * (state.v(0, i, j, k) + state.v(0, i + 1, j, k));
                const double vy = 0.5 * (state.v(1, i, j, k) + state.v(1, i, j + 1, k));
                const double vz = three ? 0.5 * (state.v(2, i, j, k) + state.v(2, i, j, k + 1)) : 0.0;
                out << format_double(vx) << ' ' << format_double(vy) << ' ' << format_double(vz) << '\n';
            }
        }
    }
    check_written(out, path);
}

namespace {

template <class T>
void put(std::string& buf, T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        value = std::bit_cast<T>(bytes);
    }
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buf.append(raw, sizeof(T));
}

void put_array(std::string& buf, std::span<const double> values) {
    put<std::uint64_t>(buf, values.size());
    for (double v : values) put(buf, v);
}

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}

    template <class T>
    T get() {
        if (data_.size() - pos_ < sizeof(T)) throw IoError("unexpected end of checkpoint");
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        if constexpr (std::endian::native == std::endian::big) {
            auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
            std::reverse(bytes.begin(), bytes.end());
            value = std::bit_cast<T>(bytes);
        }
        return value;
    }

    void get_array(std::span<double> out, const char* name) {
        const auto count = get<std::uint64_t>();
        if (count != out.size()) {
            throw IoError(std::string("checkpoint array '") + name + "' has " + std::to_string(count) +
                          " values, expected " + std::to_string(out.size()));
        }
        for (auto& v : out) v = get<double>();
    }

    void get_bytes(char* out, std::size_t n) {
        if (data_.size() - pos_ < n) throw IoError("unexpected end of checkpoint");
        std::memcpy(out, data_.data() + pos_, n);
        pos_ += n;
    }

    bool at_end() const { return pos_ == data_.size(); }

private:
    std::string data_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const SimState& state, const std::filesystem::path& path) {
    const Grid& g = state.phi.grid();
    std::string buf = "CHNS";
    put<std::uint32_t>(buf, kCheckpointVersion);
    put<std::uint8_t>(buf, std::uint8_t(g.dim));
    for (int a = 0; a < g.dim; ++a) put<std::uint64_t>(buf, std::uint64_t(g.n[a]));
    for (int a = 0; a < g.dim; ++a) put<double>(buf, g.length[a]);
    put<double>(buf, state.t);
    put<std::uint64_t>(buf, state.step);
    put<double>(buf, state.phi_mean0);
    put<double>(buf, state.sigma_mean0);
    put<double>(buf, state.phi_mean_discrete);
    put<std::uint64_t>(buf, state.clip_events);
    put_array(buf, state.v.flat());
    put_array(buf, state.p.data());
    put_array(buf, state.phi.data());
    put_array(buf, state.mu.data());
    put_array(buf, state.sigma.data());

    auto out = open_out(path);
    out.write(buf.data(), std::streamsize(buf.size()));
    check_written(out, path);
}

SimState load_checkpoint(const std::filesystem::path& path) {
    Reader in(read_all(path));
    char magic[4];
    in.get_bytes(magic, 4);
    if (std::memcmp(magic, "CHNS", 4) != 0) throw IoError(path.string() + ": not a checkpoint (bad magic)");
    const auto version = in.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const int dim = in.get<std::uint8_t>();
    if (dim != 2 && dim != 3) throw IoError(path.string() + ": bad dimension " + std::to_string(dim));
    std::vector<int> dims(dim);
    std::vector<double> lengths(dim);
    for (auto& n : dims) {
        const auto v = in.get<std::uint64_t>();
        if (v < 2 || v > (1u << 20)) throw IoError(path.string() + ": bad grid size " + std::to_string(v));
        n = int(v);
    }
    for (auto& l : lengths) l = in.get<double>();

    Grid grid;
    try {
        grid = make_grid(std::span<const int>(dims), std::span<const double>(lengths));
    } catch (const InvalidArgument& e) {
        throw IoError(path.string() + ": " + e.what());
    }

    SimState s;
    s.t = in.get<double>();
    s.step = in.get<std::uint64_t>();
    s.phi_mean0 = in.get<double>();
    s.sigma_mean0 = in.get<double>();
    s.phi_mean_discrete = in.get<double>();
    s.clip_events = in.get<std::uint64_t>();
    s.v = VectorField(grid);
    s.p = ScalarField(grid);
    s.phi = ScalarField(grid);
    s.mu = ScalarField(grid);
    s.sigma = ScalarField(grid);
    in.get_array(s.v.flat(), "v");
    in.get_array(s.p.data(), "p");
    in.get_array(s.phi.data(), "phi");
    in.get_array(s.mu.data(), "mu");
    in.get_array(s.sigma.data(), "sigma");
    if (!in.at_end()) throw IoError(path.string() + ": trailing bytes after checkpoint data");
    return s;
}

} // namespace chns
