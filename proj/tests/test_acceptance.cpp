// Runs every acceptance suite at its default size and prints one line per
// criterion. Exit status is nonzero if any criterion fails.

#include "chns/verify.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

int main() {
    const auto work = std::filesystem::temp_directory_path() / "chns_acceptance";
    std::filesystem::create_directories(work);
    chns::VerifyOptions opts;
    opts.work_dir = work;

    int failed = 0;
    for (const auto& r : chns::run_verify("all", opts)) {
        std::cout << (r.passed ? "PASS" : "FAIL") << " criterion " << r.criterion << " (" << r.name
                  << ")\n    " << chns::format_check(r) << std::endl;
        if (!r.passed) ++failed;
    }
    std::cout << (failed == 0 ? "acceptance: all criteria passed" : "acceptance: failures present") << '\n';
    return failed == 0 ? 0 : 1;
}
