#pragma once

// Continuous-time control primitives written as state-contribution functions:
// each returns its output together with the derivative of its own state, so the
// plant can stack them into one ODE right-hand side.

#include "invstab/params.hpp"

#include <array>
#include <complex>

namespace invstab {

using Complex = std::complex<double>;

struct Dq {
    double d = 0.0;
    double q = 0.0;
    double zero = 0.0;  // (a + b + c) / 3
};

/// Amplitude-invariant Park transform; theta is the d-axis angle. A balanced
/// cosine set of amplitude A at angle theta maps to (A, 0).
Dq park(double a, double b, double c, double theta);
std::array<double, 3> inverse_park(Dq dq, double theta);

struct PIGains {
    double kp = 0.0;
    double ki = 0.0;
};

struct BlockOutput {
    double y = 0.0;
    double dx_dt = 0.0;
};

/// u = kp*e + ki*xi, dxi/dt = e.
inline BlockOutput pi_eval(PIGains g, double xi, double e) { return {g.kp * e + g.ki * xi, e}; }

/// First-order low-pass state derivative.
inline double lpf_eval(double omega_f, double x, double u) { return omega_f * (u - x); }

/// PLL: y is the controller frequency in rad/s.
inline BlockOutput pll_eval(double omega_star, double kp_pll, double ki_pll, double xi_pll, double v_cq) {
    return {omega_star + kp_pll * v_cq + ki_pll * xi_pll, v_cq};
}

inline double droop_eval(double m_p, double omega_star, double p_ref, double p_f) {
    return omega_star + m_p * (p_ref - p_f);
}

/// First-order Pade of exp(-s*t_d): dx/dt = (2/t_d)(u - x), y = 2x - u.
/// NONE (or t_d == 0) passes u through and ignores x.
inline BlockOutput delay_eval(const DelaySpec& spec, double x, double u) {
    if (!spec.active()) return {u, 0.0};
    return {2.0 * x - u, (2.0 / spec.t_d) * (u - x)};
}

/// Transfer function of the delay block at complex frequency s.
Complex delay_tf(const DelaySpec& spec, Complex s);
/// (kp + ki/s) * G_del(s).
Complex pi_current_tf(PIGains g, const DelaySpec& delay, Complex s);

struct TheveninD {
    Complex gain;   // v_cd / v*_cd
    Complex z_out;  // -v_cd / i_gd, ohm
};

struct NortonQ {
    Complex gain;   // i_lq / i*_lq
    Complex y_out;  // -i_lq / v_cq, S
};

struct AxisEquivalents {
    double frequency = 0.0;  // Hz
    TheveninD thevenin_d;
    NortonQ norton_q;
};

/// Single-axis closed-loop equivalents at f (Hz, signed, dq frame):
///   q: i_lq = Z/(Z + sL_f + R_f) i*_lq - 1/(Z + sL_f + R_f) v_cq,  Z = Z_PIi,q
///   d: v_cd = H v*_cd - Z_out i_gd, obtained by eliminating v_id and i_ld from
///      the dual-loop law with i_ld = i_gd + sC_f v_cd:
///        D     = Z_i Z_v + 1 + sC_f (Z_i + sL_f + R_f)
///        H     = Z_i Z_v / D
///        Z_out = (Z_i + sL_f + R_f) / D
/// At f == 0 with integral action the limits are returned.
AxisEquivalents axis_equivalents(const SystemParams& sys, const ControlParams& ctrl, double f);

}  // namespace invstab
