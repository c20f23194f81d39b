#include "invstab/timedomain.hpp"

#include "invstab/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace invstab {

namespace {

std::size_t step_index(double time, double dt) {
    const double k = std::round(time / dt);
    if (std::abs(time - k * dt) > 1e-9 * std::max(1.0, std::abs(time))) {
        throw ConfigError("event time " + std::to_string(time) + " s is not a multiple of dt");
    }
    return static_cast<std::size_t>(k);
}

void rk4_step(const OdeRhs& f, double t, double dt, std::vector<double>& x, std::vector<double> (&k)[4],
              std::vector<double>& tmp) {
    const std::size_t n = x.size();
    f(t, x, k[0]);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k[0][i];
    f(t + 0.5 * dt, tmp, k[1]);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k[1][i];
    f(t + 0.5 * dt, tmp, k[2]);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k[2][i];
    f(t + dt, tmp, k[3]);
    for (std::size_t i = 0; i < n; ++i) x[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
}

bool out_of_bounds(std::span<const double> x, std::span<const double> scales) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || std::abs(x[i] / scales[i]) > kDivergenceLimitPu) return true;
    }
    return false;
}

/// Residual after removing the least-squares line.
std::vector<double> detrend(std::span<const double> t, std::span<const double> y) {
    const double n = static_cast<double>(y.size());
    const double tm = std::accumulate(t.begin(), t.end(), 0.0) / n;
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (y[i] - ym);
    }
    const double slope = stt > 0.0 ? sty / stt : 0.0;
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - ym - slope * (t[i] - tm);
    return r;
}

}  // namespace

void validate(const SimConfig& cfg) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("dt must be positive");
    if (!(cfg.t_end > cfg.dt) || !std::isfinite(cfg.t_end)) throw ConfigError("t_end must exceed dt");
    if (cfg.record_decimation < 1) throw ConfigError("record_decimation must be >= 1");
    double last = 0.0;
    for (const Event& e : cfg.events) {
        if (!(e.time > last) || !(e.time < cfg.t_end)) {
            throw ConfigError("event times must be strictly increasing inside (0, t_end)");
        }
        if (!(e.scr > 0.0)) throw ConfigError("event SCR must be positive");
        step_index(e.time, cfg.dt);
        last = e.time;
    }
}

std::vector<double> rk4_integrate(const OdeRhs& f, std::span<const double> x0, double dt, std::size_t steps) {
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> k[4], tmp(x.size());
    for (auto& v : k) v.resize(x.size());
    for (std::size_t s = 0; s < steps; ++s) rk4_step(f, static_cast<double>(s) * dt, dt, x, k, tmp);
    return x;
}

SimTrace simulate(const NonlinearModel& m, std::span<const double> x0, const SimConfig& cfg) {
    validate(cfg);
    if (x0.size() != m.n_states()) throw ConfigError("initial state has the wrong number of entries");
    for (double v : x0) {
        if (!std::isfinite(v)) throw ConfigError("initial state is not finite");
    }

    const Bases b = m.system().bases();
    std::vector<std::pair<std::size_t, double>> swaps;
    for (const Event& e : cfg.events) {
        swaps.emplace_back(step_index(e.time, cfg.dt), scr_to_line(e.scr, m.system().r_g, b).l_g);
    }
    const auto steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.dt));
    const auto dec = static_cast<std::size_t>(cfg.record_decimation);

    NonlinearModel model = m;
    const OdeRhs f = [&model](double, std::span<const double> x, std::span<double> dx) { model.derivatives(x, dx); };
    const std::vector<double>& scales = m.state_scales();

    SimTrace tr;
    tr.state_labels = m.state_labels();
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> k[4], tmp(x.size());
    for (auto& v : k) v.resize(x.size());
    auto record = [&](std::size_t s) {
        tr.times.push_back(static_cast<double>(s) * cfg.dt);
        tr.states.push_back(x);
        tr.signals.push_back(model.outputs(x));
    };

    record(0);
    std::size_t next_swap = 0;
    for (std::size_t s = 0; s < steps; ++s) {
        while (next_swap < swaps.size() && swaps[next_swap].first == s) {
            model = model.with_line_inductance(swaps[next_swap].second);
            ++next_swap;
        }
        const std::vector<double> prev = x;
        bool bad = false;
        try {
            rk4_step(f, static_cast<double>(s) * cfg.dt, cfg.dt, x, k, tmp);
            bad = out_of_bounds(x, scales);
        } catch (const NumericError&) {
            bad = true;
        }
        if (bad) {
            x = prev;
            tr.diverged = true;
            tr.divergence_time = static_cast<double>(s + 1) * cfg.dt;
            break;
        }
        if ((s + 1) % dec == 0) record(s + 1);
    }
    return tr;
}

OscillationMetrics oscillation_metrics(std::span<const double> t, std::span<const double> y, double t0, double t1) {
    if (t.size() != y.size()) throw ConfigError("time and signal lengths differ");
    if (!(t1 - t0 >= kMinMetricsWindow)) {
        throw ConfigError("metrics window must be at least " + std::to_string(kMinMetricsWindow) + " s");
    }
    const auto lo = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), t0) - t.begin());
    const auto hi = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), t1) - t.begin());
    if (hi < lo + 16) throw ConfigError("metrics window holds too few samples");
    const std::span<const double> tw = t.subspan(lo, hi - lo);
    const std::span<const double> yw = y.subspan(lo, hi - lo);
    const double fs_dt = (tw.back() - tw.front()) / static_cast<double>(tw.size() - 1);

    OscillationMetrics out;
    out.t0 = tw.front();
    out.t1 = tw.back();

    const std::vector<double> r = detrend(tw, yw);
    double peak_abs = 0.0, level = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        peak_abs = std::max(peak_abs, std::abs(r[i]));
        level = std::max(level, std::abs(yw[i]));
    }
    if (!(peak_abs > 1e-12 * std::max(1.0, level))) return out;

    const std::size_t n = r.size();
    std::size_t nfft = 1;
    while (nfft < 8 * n) nfft <<= 1;
    std::vector<double> buf(nfft, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1));
        buf[i] = r[i] * w;
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, buf);
    const std::size_t half = nfft / 2;
    std::vector<double> mag(half + 1);
    for (std::size_t i = 0; i <= half; ++i) mag[i] = std::abs(spec[i]);

    const double df = 1.0 / (static_cast<double>(nfft) * fs_dt);
    const double window_len = tw.back() - tw.front();
    const double f_floor = std::max(0.5, 2.0 / window_len);
    std::size_t first = static_cast<std::size_t>(std::ceil(f_floor / df));
    first = std::min(first, half - 1);
    std::size_t best = first;
    for (std::size_t i = first; i < half; ++i) {
        if (mag[i] > mag[best]) best = i;
    }
    std::vector<double> sorted(mag.begin() + static_cast<std::ptrdiff_t>(first), mag.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    if (!(mag[best] >= 3.0 * median) || best == first) return out;

    double offset = 0.0;
    if (best + 1 <= half) {
        const double a = std::log(mag[best - 1]), bb = std::log(mag[best]), c = std::log(mag[best + 1]);
        const double den = a - 2.0 * bb + c;
        if (den < 0.0) offset = 0.5 * (a - c) / den;
    }
    out.oscillating = true;
    out.freq = (static_cast<double>(best) + offset) * df;

    // High-pass by a centred one-period moving average, then per-period peaks.
    const auto period = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(1.0 / (out.freq * fs_dt))));
    const std::size_t halfp = period / 2;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + r[i];
    std::vector<double> tp, lp;
    for (std::size_t start = halfp; start + period + halfp <= n; start += period) {
        double best_v = -1.0;
        std::size_t best_i = start;
        for (std::size_t i = start; i < start + period; ++i) {
            const double avg = (prefix[i + halfp + 1] - prefix[i - halfp]) / static_cast<double>(2 * halfp + 1);
            const double v = std::abs(r[i] - avg);
            if (v > best_v) {
                best_v = v;
                best_i = i;
            }
        }
        if (best_v > 0.0) {
            tp.push_back(tw[best_i]);
            lp.push_back(std::log(best_v));
        }
    }
    if (tp.size() >= 2) {
        const double m = static_cast<double>(tp.size());
        const double tm = std::accumulate(tp.begin(), tp.end(), 0.0) / m;
        const double lm = std::accumulate(lp.begin(), lp.end(), 0.0) / m;
        double stt = 0.0, stl = 0.0;
        for (std::size_t i = 0; i < tp.size(); ++i) {
            stt += (tp[i] - tm) * (tp[i] - tm);
            stl += (tp[i] - tm) * (lp[i] - lm);
        }
        out.sigma = stt > 0.0 ? stl / stt : 0.0;
        out.amplitude = std::exp(lm + out.sigma * (out.t0 - tm));
    }
    return out;
}

std::vector<double> trace_signal(const SimTrace& trace, const std::string& name) {
    std::vector<double> out;
    out.reserve(trace.times.size());
    const auto it = std::find(trace.state_labels.begin(), trace.state_labels.end(), name);
    if (it != trace.state_labels.end()) {
        const auto k = static_cast<std::size_t>(it - trace.state_labels.begin());
        for (const auto& x : trace.states) out.push_back(x[k]);
        return out;
    }
    for (const SignalSet& s : trace.signals) {
        if (name == "p") out.push_back(s.p);
        else if (name == "q") out.push_back(s.q);
        else if (name == "omega") out.push_back(s.omega_ctrl);
        else if (name == "freq_hz") out.push_back(s.omega_ctrl / kTwoPi);
        else throw ConfigError("unknown trace signal '" + name + "'");
    }
    if (trace.signals.empty() && name != "p" && name != "q" && name != "omega" && name != "freq_hz") {
        throw ConfigError("unknown trace signal '" + name + "'");
    }
    return out;
}

OscillationMetrics oscillation_metrics(const SimTrace& trace, const std::string& signal, double t0, double t1) {
    const std::vector<double> y = trace_signal(trace, signal);
    return oscillation_metrics(trace.times, y, t0, t1);
}

}  // namespace invstab
