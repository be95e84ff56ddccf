#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace chns {

/// Outcome of one acceptance check. `value` is the measured quantity and
/// `threshold` the bound it was compared against.
struct CheckResult {
    int criterion = 0;
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
    double seconds = 0.0;
};

struct VerifyOptions {
    /// Cells per axis for the suite's 2D grids; 0 keeps each suite's default.
    int size = 0;
    /// Scratch space for suites that write files (equilibria, series).
    std::filesystem::path work_dir = ".";
    std::function<void(const std::string&)> log;
};

/// Suite names accepted by run_verify, in criterion order, plus "all".
std::vector<std::string> verify_suites();

/// Runs one suite. Throws InvalidArgument for an unknown name.
std::vector<CheckResult> run_verify(std::string_view suite, const VerifyOptions& opts = {});

/// "PASS [3] energy-dissipation: value 0 (bound 0) ..." style summary line.
std::string format_check(const CheckResult& r);

} // namespace chns
