#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nvmri/runconfig.hpp"

namespace nvmri {

/// Output paths relative to the output directory.
using OutputList = std::vector<std::string>;

OutputList cmdSimulateQuench(const RunConfig& cfg, const std::string& outDir);
OutputList cmdScan(const RunConfig& cfg, const std::string& outDir, const std::string& typeOverride = "");
OutputList cmdFmi(const RunConfig& cfg, const std::string& outDir);
OutputList cmdAnalytics(const RunConfig& cfg, const std::string& outDir);
OutputList cmdCompileSequence(const std::string& pulseFile, const std::string& outDir);
OutputList cmdFitPumping(const RunConfig& cfg, const std::string& dataFile, const std::string& outDir);

struct Invocation {
    std::string command;
    std::string configPath;
    std::string outDir = "out";
    std::string dataPath;    // fit-pumping
    std::string pulsesPath;  // compile-sequence
    std::string scanType;    // scan
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool verify = false;
};

/// Runs one subcommand, writes outputs plus manifest.json. With verify set, recomputes the run
/// into a scratch directory and reports drift against the stored manifest instead.
/// Returns the process exit code: 0 success, 2 usage or config error, 3 numerical failure or drift.
int execute(const Invocation& inv, std::ostream& out, std::ostream& err);

}  // namespace nvmri
