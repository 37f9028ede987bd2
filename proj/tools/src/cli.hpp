#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace hvi::cli {

enum ExitCode : int { Success = 0, DomainFailure = 1, UsageError = 2 };

/// Everything that determines a run; written as manifest.json next to the outputs.
struct RunManifest {
    std::string command;
    std::string scenario;
    std::string out = "hvi-out";
    std::uint64_t seed = 0;
    int threads = 1;
    std::optional<int> steps;
    std::optional<int> levels;
    std::optional<double> tol;
    std::optional<int> max_iter;
    int count = 100;
    bool cea = false;
};

int cmd_validate(const RunManifest& m, std::ostream& out, std::ostream& err);
int cmd_solve(const RunManifest& m, std::ostream& out, std::ostream& err);
int cmd_converge(const RunManifest& m, std::ostream& out, std::ostream& err);
int cmd_oracle(const RunManifest& m, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace hvi::cli
