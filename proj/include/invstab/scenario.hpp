#pragma once

// Scenario files: flat `key = value` text with [system], [control],
// [operating] and [analysis] sections. Keys take SI units unless they end in
// `_pu`. Everything not given falls back to the table defaults with the line
// set from SCR 1.4.

#include "invstab/equilibrium.hpp"
#include "invstab/errors.hpp"
#include "invstab/params.hpp"
#include "invstab/timedomain.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace invstab {

class ParseError : public ConfigError {
public:
    ParseError(int line, const std::string& what)
        : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

enum class AnalysisKind { Equilibrium, Poles, Admittance, Simulate };
std::string_view to_string(AnalysisKind kind);

struct PolesSpec {
    std::vector<double> zg_values;
};

struct AdmittanceSpec {
    std::vector<double> freqs;
    bool freeze_controller = false;
};

struct SimulateSpec {
    double dt = 20e-6;
    int record_decimation = 10;
    double pre_roll = 5.0;    // s before the event
    double post_event = 3.0;  // s after it
    std::optional<double> event_scr;  // SCR after the step at t = pre_roll
    std::string metrics_signal = "v_cd";

    SimConfig config() const;
    double event_time() const { return pre_roll; }
};

struct Scenario {
    std::string name = "scenario";
    std::vector<ControlMode> modes;
    SystemParams system;
    /// Control keys as given; applied over default_control for each mode.
    std::map<std::string, double> control_overrides;
    DelaySpec delay;
    bool delay_given = false;
    OperatingTarget operating;
    AnalysisKind analysis = AnalysisKind::Equilibrium;
    PolesSpec poles;
    AdmittanceSpec admittance;
    SimulateSpec simulate;

    ControlParams control_for(ControlMode mode) const;
};

Scenario parse_scenario(const std::string& text);

/// Fully resolved, single-mode scenario text that parses back to the same
/// parameters (every value written with 17 significant digits).
std::string render_scenario(const Scenario& sc, ControlMode mode);

}  // namespace invstab
