// Command-line front end: simulate, equilibrate, verify, rate-fit.
//
// Exit codes: 0 success, 1 a failed check or runtime failure, 2 usage or
// configuration error.

#include "chns/config.hpp"
#include "chns/diagnostics.hpp"
#include "chns/error.hpp"
#include "chns/io.hpp"
#include "chns/verify.hpp"
#include "chns/workflow.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

// Usage problems detected after argument parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

void append_jsonl(const fs::path& path, const json& line) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw chns::IoError("cannot open " + path.string());
    out << line.dump() << '\n';
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw chns::IoError("cannot open " + path.string());
    out << doc.dump(2) << '\n';
}

chns::RunConfig load(const std::string& path) {
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    return chns::load_config(path);
}

int cmd_simulate(const std::string& config_path, const std::string& resume, bool quiet) {
    const chns::RunConfig config = load(config_path);
    chns::SimulateOptions opts;
    if (!resume.empty()) {
        if (!fs::exists(resume)) throw UsageError("checkpoint not found: " + resume);
        opts.resume = resume;
    }
    if (!quiet) opts.log = [](const std::string& m) { std::cout << m << '\n'; };

    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    const chns::SimulateSummary s = chns::simulate(config, opts);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir = config.output.dir;
    const auto& last = s.records.back();
    json report = {{"command", "simulate"},
                   {"steps", s.final_state.step},
                   {"t", s.final_state.t},
                   {"S", s.S},
                   {"E_total", last.E_total},
                   {"phi_mean", last.phi_mean},
                   {"min_separation", s.min_separation},
                   {"energy_increases", s.energy_increases},
                   {"clip_events", s.final_state.clip_events},
                   {"snapshots", s.snapshots},
                   {"checkpoints", s.checkpoints}};
    if (!s.distance.empty()) report["final_distance"] = s.distance.back().total();
    std::ofstream(dir / "report.jsonl", std::ios::binary | std::ios::trunc) << report.dump() << '\n';
    write_json(dir / "manifest.json", {{"command", "simulate"},
                                       {"config_file", fs::absolute(config_path).string()},
                                       {"resume", resume},
                                       {"config", chns::dump_config(config)},
                                       {"started_utc", started},
                                       {"wall_seconds", wall}});
    std::cout << "simulate: " << s.final_state.step << " steps to t = " << chns::format_double(s.final_state.t)
              << ", E = " << chns::format_double(last.E_total) << ", output in " << dir.string() << '\n';
    return kOk;
}

int cmd_equilibrate(const std::string& config_path) {
    const chns::RunConfig config = load(config_path);
    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    const chns::EquilibrateSummary s = chns::equilibrate(config);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir = config.output.dir;
    json report = {{"command", "equilibrate"},
                   {"energy", s.best.energy},
                   {"residual", s.best.residual},
                   {"stationary_r1", s.residual.r1},
                   {"stationary_r2", s.residual.r2},
                   {"separation", s.best.separation},
                   {"iterations", s.best.iterations},
                   {"converged", s.best.converged},
                   {"candidates", s.candidates.size()}};
    std::ofstream(dir / "report.jsonl", std::ios::binary | std::ios::trunc) << report.dump() << '\n';
    write_json(dir / "manifest.json", {{"command", "equilibrate"},
                                       {"config_file", fs::absolute(config_path).string()},
                                       {"config", chns::dump_config(config)},
                                       {"started_utc", started},
                                       {"wall_seconds", wall}});
    std::cout << "equilibrate: F = " << chns::format_double(s.best.energy) << ", stationary residual "
              << s.residual.r1 << " / " << s.residual.r2 << (s.best.converged ? "" : " (not converged)")
              << ", written to " << (dir / "equilibrium.chns").string() << '\n';
    return s.best.converged ? kOk : kFailed;
}

int cmd_verify(const std::string& suite, int size, const std::string& out_dir) {
    const auto suites = chns::verify_suites();
    if (std::find(suites.begin(), suites.end(), suite) == suites.end()) {
        throw UsageError("unknown suite '" + suite + "'");
    }
    if (size != 0 && size < 4) throw UsageError("--size must be at least 4");
    fs::create_directories(out_dir);
    chns::VerifyOptions opts;
    opts.size = size;
    opts.work_dir = out_dir;
    opts.log = [](const std::string& m) { std::cout << m << std::endl; };
    const auto results = chns::run_verify(suite, opts);

    const fs::path report = fs::path(out_dir) / ("verify_" + suite + ".jsonl");
    std::ofstream(report, std::ios::binary | std::ios::trunc);
    bool ok = true;
    for (const auto& r : results) {
        ok = ok && r.passed;
        append_jsonl(report, {{"criterion", r.criterion},
                              {"name", r.name},
                              {"passed", r.passed},
                              {"value", finite_or_null(r.value)},
                              {"threshold", r.threshold},
                              {"detail", r.detail},
                              {"seconds", r.seconds}});
    }
    std::cout << (ok ? "all checks passed" : "some checks FAILED") << " (" << results.size() << " checks, report "
              << report.string() << ")\n";
    return ok ? kOk : kFailed;
}

int cmd_rate_fit(const std::string& csv, const std::string& column, const std::string& t_column,
                 std::optional<double> from, std::optional<double> to, const std::string& report) {
    if (!fs::exists(csv)) throw UsageError("CSV not found: " + csv);
    const chns::CsvTable table = chns::read_csv(csv);
    std::vector<double> t, d;
    try {
        t = table.column(t_column);
        d = table.column(column);
    } catch (const chns::InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const chns::RateFit fit = chns::fit_convergence_rate(t, d, {from, to});
    json line = {{"command", "rate-fit"},
                 {"csv", csv},
                 {"column", column},
                 {"kappa", fit.kappa},
                 {"exponent", fit.exponent},
                 {"r_squared", fit.r_squared},
                 {"t_begin", fit.t_begin},
                 {"t_end", fit.t_end},
                 {"points", fit.points},
                 {"exp_rate", fit.exp_rate},
                 {"flagged_exponential", fit.flagged_exponential}};
    append_jsonl(report, line);
    std::cout << "kappa = " << fit.kappa << "  (exponent " << fit.exponent << ", r^2 " << fit.r_squared << ", "
              << fit.points << " points in [" << fit.t_begin << ", " << fit.t_end << "])\n";
    if (fit.flagged_exponential) {
        std::cout << "decay looks exponential (rate " << fit.exp_rate << "); the power-law exponent is a lower bound\n";
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cahn-Hilliard-Oono / Navier-Stokes / nutrient solver"};
    app.require_subcommand(1);

    std::string config_path, resume, suite = "all", out_dir = ".", csv, column = "distance", t_column = "t";
    std::string report = "ratefit.jsonl";
    bool quiet = false;
    int size = 0;
    std::optional<double> from, to;

    auto* sim = app.add_subcommand("simulate", "run the configured simulation");
    sim->add_option("config", config_path, "configuration file")->required();
    sim->add_option("--resume", resume, "continue from a checkpoint");
    sim->add_flag("--quiet", quiet, "suppress progress lines");

    auto* eq = app.add_subcommand("equilibrate", "compute an equilibrium and write equilibrium.chns");
    eq->add_option("config", config_path, "configuration file")->required();

    auto* ver = app.add_subcommand("verify", "run an acceptance suite");
    ver->add_option("suite", suite, "operators|mass|energy|balance|separation|stability|equilibrium|ratefit|shift|all")
        ->required();
    ver->add_option("--size", size, "cells per axis for the suite's 2D grids");
    ver->add_option("--out", out_dir, "directory for reports and scratch files");

    auto* rf = app.add_subcommand("rate-fit", "fit a power-law decay rate to a CSV column");
    rf->add_option("csv", csv, "CSV file with a header row")->required();
    rf->add_option("--column", column, "column holding the distance");
    rf->add_option("--t-column", t_column, "column holding time");
    rf->add_option("--from", from, "window start");
    rf->add_option("--to", to, "window end");
    rf->add_option("--report", report, "JSON-lines report file (appended)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*sim) return cmd_simulate(config_path, resume, quiet);
        if (*eq) return cmd_equilibrate(config_path);
        if (*ver) return cmd_verify(suite, size, out_dir);
        if (*rf) return cmd_rate_fit(csv, column, t_column, from, to, report);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const chns::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
    return kUsage;
}
