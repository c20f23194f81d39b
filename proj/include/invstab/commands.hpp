#pragma once

// Analysis dispatch for one scenario: each mode writes its CSV artifacts and a
// JSON manifest into the output directory.

#include "invstab/scenario.hpp"
#include "invstab/smallsignal.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace invstab {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunOptions {
    std::filesystem::path out_dir = ".";
    std::optional<double> pre_roll;  // s, overrides the scenario's simulate pre-roll
    /// Equilibrium CSV from an earlier run used as the Newton initial guess.
    std::optional<std::filesystem::path> guess;
};

/// Rendered artifacts of one mode, before they are written.
struct ModeArtifacts {
    ControlMode mode = ControlMode::HybridPll;
    std::vector<std::pair<std::string, std::string>> files;  // file name, content
    std::vector<std::string> log;
};

/// Pure computation of one mode's CSV artifacts. Throws ConfigError or
/// NumericError; scientific instability is a regular result.
ModeArtifacts run_mode(const Scenario& sc, ControlMode mode, const RunOptions& opts);

std::string equilibrium_csv(const Equilibrium& eq);
std::string poles_csv(const PoleMap& map);
std::string admittance_csv(const AdmittanceResponse& resp);
std::string trace_csv(const SimTrace& trace);

/// Every mode in parallel, files written per mode plus a manifest each.
/// Returns the process exit code: 0, 2 (config) or 3 (numeric).
int run_scenario(const Scenario& sc, const std::string& source_text, const RunOptions& opts, std::ostream& out,
                 std::ostream& err);

/// Reads and parses `path`, then run_scenario. Parse failures return 2.
int run_file(const std::filesystem::path& path, RunOptions opts, std::ostream& out, std::ostream& err);

}  // namespace invstab
