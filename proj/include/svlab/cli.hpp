#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "svlab/config.hpp"

namespace svlab {

enum ExitCode { kExitOk = 0, kExitInternal = 1, kExitConfig = 2, kExitVerification = 3 };

struct RunOptions {
    std::string out_dir;  // empty: output.dir from the config
    int threads = 1;
    std::optional<std::uint64_t> seed;
};

// Each command writes CSV files into the output directory and a short summary to `log`.
// Return values are exit codes; errors propagate as exceptions.
int cmd_resolvent(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);
int cmd_solve(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);
// which: bounds_41 | bounds_42 | inequality_33 | growth | error
int cmd_verify(const ExperimentConfig& cfg, const std::string& which, const RunOptions& opts, std::ostream& log);
int cmd_wasserstein(const std::string& file_a, const std::string& file_b, double p, const std::string& out_dir,
                    std::ostream& log);

// Full command line: svlab <resolvent|solve|verify WHICH|wasserstein A B> [--config PATH] [--out DIR]
// [--threads N] [--seed S] [--p P]. Maps exceptions to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace svlab
