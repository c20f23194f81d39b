#include "invstab/control_blocks.hpp"

#include "invstab/errors.hpp"

#include <cmath>

namespace invstab {

namespace {
constexpr double kThird = 2.0 * std::numbers::pi / 3.0;
}

Dq park(double a, double b, double c, double theta) {
    const double k = 2.0 / 3.0;
    Dq out;
    out.d = k * (a * std::cos(theta) + b * std::cos(theta - kThird) + c * std::cos(theta + kThird));
    out.q = -k * (a * std::sin(theta) + b * std::sin(theta - kThird) + c * std::sin(theta + kThird));
    out.zero = (a + b + c) / 3.0;
    return out;
}

std::array<double, 3> inverse_park(Dq dq, double theta) {
    return {dq.d * std::cos(theta) - dq.q * std::sin(theta) + dq.zero,
            dq.d * std::cos(theta - kThird) - dq.q * std::sin(theta - kThird) + dq.zero,
            dq.d * std::cos(theta + kThird) - dq.q * std::sin(theta + kThird) + dq.zero};
}

Complex delay_tf(const DelaySpec& spec, Complex s) {
    if (!spec.active()) return {1.0, 0.0};
    const Complex half = s * (spec.t_d / 2.0);
    return (1.0 - half) / (1.0 + half);
}

Complex pi_current_tf(PIGains g, const DelaySpec& delay, Complex s) {
    return (g.kp + g.ki / s) * delay_tf(delay, s);
}

AxisEquivalents axis_equivalents(const SystemParams& sys, const ControlParams& ctrl, double f) {
    if (!std::isfinite(f)) throw DomainError("axis_equivalents: frequency must be finite");
    const PIGains gi_q{ctrl.kpi_q, ctrl.kii_q};
    const PIGains gi_d{ctrl.kpi_d, ctrl.kii_d};
    const PIGains gv_d{ctrl.kpv_d, ctrl.kiv_d};
    for (double g : {gi_q.kp, gi_q.ki, gi_d.kp, gi_d.ki, gv_d.kp, gv_d.ki}) {
        if (!std::isfinite(g)) throw ConfigError("axis_equivalents: current/voltage PI gains are required");
    }

    AxisEquivalents out;
    out.frequency = f;

    if (f == 0.0) {
        const Complex r{sys.r_f, 0.0};
        if (gi_q.ki > 0.0) {
            out.norton_q = {{1.0, 0.0}, {0.0, 0.0}};
        } else {
            const Complex z = gi_q.kp;
            out.norton_q = {z / (z + r), 1.0 / (z + r)};
        }
        // Limits of s^2 D, s^2 Z_i Z_v and s^2 (Z_i + Z_L) as s -> 0.
        if (gv_d.ki > 0.0) {
            out.thevenin_d = {{1.0, 0.0}, {0.0, 0.0}};
        } else if (gi_d.ki > 0.0) {
            out.thevenin_d = {{1.0, 0.0}, Complex{1.0 / gv_d.kp, 0.0}};
        } else {
            const Complex zi = gi_d.kp, zv = gv_d.kp;
            const Complex den = zi * zv + 1.0;
            out.thevenin_d = {zi * zv / den, (zi + r) / den};
        }
        return out;
    }

    const Complex s{0.0, kTwoPi * f};
    const Complex zl = s * sys.l_f + sys.r_f;

    const Complex zq = pi_current_tf(gi_q, ctrl.delay, s);
    out.norton_q.gain = zq / (zq + zl);
    out.norton_q.y_out = 1.0 / (zq + zl);

    const Complex zi = pi_current_tf(gi_d, ctrl.delay, s);
    const Complex zv = gv_d.kp + gv_d.ki / s;
    const Complex den = zi * zv + 1.0 + s * sys.c_f * (zi + zl);
    out.thevenin_d.gain = zi * zv / den;
    out.thevenin_d.z_out = (zi + zl) / den;
    return out;
}

}  // namespace invstab
