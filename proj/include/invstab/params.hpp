#pragma once

// =============================================================================
// Per-unit system, circuit parameters and per-mode controller constants for a
// single inverter connected to an infinite bus through an LC filter and line.
// =============================================================================

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

namespace invstab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class ControlMode { GfmDroop, GflPll, HybridDroop, HybridPll };

std::string_view to_string(ControlMode mode);
/// Accepts the lower-case scenario spelling, e.g. "hybrid_pll".
ControlMode parse_control_mode(std::string_view text);

inline bool uses_droop(ControlMode m) { return m == ControlMode::GfmDroop || m == ControlMode::HybridDroop; }
inline bool uses_pll(ControlMode m) { return !uses_droop(m); }
/// d-axis voltage loop present (GFM and both hybrid modes).
inline bool has_d_voltage_loop(ControlMode m) { return m != ControlMode::GflPll; }
inline bool has_q_voltage_loop(ControlMode m) { return m == ControlMode::GfmDroop; }

struct Bases {
    double s_base = 0.0;      // W
    double v_base = 0.0;      // line-to-line RMS, V
    double f_base = 0.0;      // Hz
    double omega_base = 0.0;  // rad/s
    double z_base = 0.0;      // ohm
    double l_base = 0.0;      // H
    double c_base = 0.0;      // F

    /// Peak phase voltage, the amplitude-invariant dq magnitude of v_base.
    double v_peak() const { return std::sqrt(2.0 / 3.0) * v_base; }
    /// Peak phase current matching s_base at v_peak (s = 3/2 * v * i).
    double i_peak() const { return s_base / (1.5 * v_peak()); }
};

Bases derive_bases(double s_base, double v_ll, double f);

struct SystemParams {
    double f_g = 50.0;      // Hz
    double v_g = 200.0;     // line-to-line RMS, V
    double v_dc = 500.0;    // V, constant
    double c_dc = 1.5e-3;   // F, unused by the ac-side model
    double l_f = 3.6e-3;    // H
    double r_f = 0.08;      // ohm
    double c_f = 30e-6;     // F
    double l_g = 0.0;       // H
    double r_g = 0.33;      // ohm
    double s_base = 1500.0; // W

    double omega_g() const { return kTwoPi * f_g; }
    double v_g_peak() const { return std::sqrt(2.0 / 3.0) * v_g; }
    Bases bases() const { return derive_bases(s_base, v_g, f_g); }
};

/// Throws ConfigError on a negative element or a non-positive L_f / C_f.
void validate(const SystemParams& sys);

enum class DelayKind { None, FirstOrderPade };

struct DelaySpec {
    DelayKind kind = DelayKind::None;
    double t_d = 0.0;  // s

    /// PADE with t_d == 0 degenerates to unity.
    bool active() const { return kind == DelayKind::FirstOrderPade && t_d > 0.0; }
};

/// Controller constants. Gains left as NaN are "not configured"; assemble()
/// rejects a missing gain only when the mode needs it.
struct ControlParams {
    ControlMode mode = ControlMode::HybridPll;
    double kpv_d = NAN, kiv_d = NAN;
    double kpv_q = NAN, kiv_q = NAN;
    double kpi_d = NAN, kii_d = NAN;
    double kpi_q = NAN, kii_q = NAN;
    double m_p = NAN;      // rad/s per W
    double omega_f = NAN;  // rad/s
    double kp_pll = NAN, ki_pll = NAN;
    double v_cd_ref = NAN;  // V, controller-frame amplitude
    double i_ld_ref = 0.0;  // A, GFL only (set by the equilibrium closure)
    double i_lq_ref = 0.0;  // A
    double p_ref = NAN;     // W, droop modes
    DelaySpec delay{};
};

/// Table values for every gain, operating references at the default
/// desk-scale point (v*_cd = 1 p.u., P* = 0.5 p.u., i*_lq = 0).
ControlParams default_control(ControlMode mode, const SystemParams& sys = {});

/// Table values with the line set from the weak-grid default SCR = 1.4.
SystemParams default_system();

inline constexpr double kDefaultScr = 1.4;

struct LineImpedance {
    double l_g = 0.0;    // H
    double z_g_pu = 0.0; // |Z_g| / z_base
};

/// SCR = 1/|Z_g,pu| with |Z_g| including R_g.
LineImpedance scr_to_line(double scr, double r_g, const Bases& bases);
/// Inverse of scr_to_line on (l_g, r_g).
double line_to_scr(double l_g, double r_g, const Bases& bases);

enum class Quantity { Voltage, Current, Impedance, Inductance, Capacitance, Power };

/// Voltage/current use the peak-phase (amplitude-invariant dq) bases.
double base_of(Quantity kind, const Bases& bases);
inline double to_pu(double value, Quantity kind, const Bases& bases) { return value / base_of(kind, bases); }
inline double from_pu(double value, Quantity kind, const Bases& bases) { return value * base_of(kind, bases); }

}  // namespace invstab
