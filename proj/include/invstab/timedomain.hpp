#pragma once

// Fixed-step RK4 simulation of the nonlinear model with scheduled SCR steps,
// and spectral post-processing of recorded traces.

#include "invstab/plant.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace invstab {

struct Event {
    double time = 0.0;  // s
    double scr = 0.0;   // new short-circuit ratio
};

struct SimConfig {
    double dt = 20e-6;  // s
    double t_end = 1.0; // s
    int record_decimation = 10;
    std::vector<Event> events;
};

/// Throws ConfigError unless dt > 0, t_end > dt, events strictly increasing in
/// (0, t_end) and every event time an integer multiple of dt.
void validate(const SimConfig& cfg);

inline constexpr double kDivergenceLimitPu = 1e6;

struct SimTrace {
    std::vector<std::string> state_labels;
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<SignalSet> signals;
    bool diverged = false;
    double divergence_time = 0.0;  // s, valid when diverged
};

/// Classical RK4 from x0. At an event the line inductance is swapped and the
/// state carried over unchanged. Divergence (a non-finite state or any
/// |x_i / scale_i| > 1e6) ends the run and returns the partial trace.
SimTrace simulate(const NonlinearModel& m, std::span<const double> x0, const SimConfig& cfg);

/// Generic fixed-step RK4 for f(t, x) -> dx, used by the tests as well.
using OdeRhs = std::function<void(double, std::span<const double>, std::span<double>)>;
std::vector<double> rk4_integrate(const OdeRhs& f, std::span<const double> x0, double dt, std::size_t steps);

struct OscillationMetrics {
    bool oscillating = false;
    double freq = 0.0;       // Hz
    double sigma = 0.0;      // 1/s
    double amplitude = 0.0;  // signal units, envelope at the window start
    double t0 = 0.0, t1 = 0.0;
};

/// Minimum window length accepted by oscillation_metrics.
inline constexpr double kMinMetricsWindow = 0.25;  // s

/// Detrend, Hann window, zero-padded FFT with parabolic peak interpolation for
/// the frequency; sigma from a least-squares fit of log per-period peaks of
/// the oscillatory part. Samples must be uniform. A spectral peak below three
/// times the median, or a signal with no variation, gives oscillating = false.
OscillationMetrics oscillation_metrics(std::span<const double> t, std::span<const double> y, double t0, double t1);

/// Named-signal variant: any state label, or p, q, omega, freq_hz.
std::vector<double> trace_signal(const SimTrace& trace, const std::string& name);
OscillationMetrics oscillation_metrics(const SimTrace& trace, const std::string& signal, double t0, double t1);

}  // namespace invstab
