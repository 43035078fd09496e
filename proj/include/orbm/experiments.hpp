#pragma once

// Experiment pipelines behind the command-line runner. Each subcommand reads
// its blocks from a Config, writes CSV and text artifacts into an output
// directory and records them in manifest.json.

#include "orbm/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace orbm {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitCondition = 2,
    kExitNumerical = 3,
};

struct RunOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;     ///< overrides the file's seed
    std::optional<std::string> out_dir;    ///< overrides [output] dir
    int threads = 1;
};

const std::vector<std::string>& subcommands();

/// Runs one subcommand; never throws. Diagnostics go to `log`.
int run_experiment(const std::string& subcommand, const RunOptions& opts, std::ostream& log);

/// Same, with an already parsed configuration.
int run_experiment(const std::string& subcommand, Config cfg, const RunOptions& opts, std::ostream& log);

}  // namespace orbm
