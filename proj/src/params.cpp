#include "invstab/params.hpp"

#include "invstab/errors.hpp"

#include <string>

namespace invstab {

std::string_view to_string(ControlMode mode) {
    switch (mode) {
    case ControlMode::GfmDroop: return "gfm_droop";
    case ControlMode::GflPll: return "gfl_pll";
    case ControlMode::HybridDroop: return "hybrid_droop";
    case ControlMode::HybridPll: return "hybrid_pll";
    }
    return "unknown";
}

ControlMode parse_control_mode(std::string_view text) {
    if (text == "gfm_droop" || text == "gfm") return ControlMode::GfmDroop;
    if (text == "gfl_pll" || text == "gfl") return ControlMode::GflPll;
    if (text == "hybrid_droop") return ControlMode::HybridDroop;
    if (text == "hybrid_pll") return ControlMode::HybridPll;
    throw ConfigError("unknown control mode '" + std::string(text) + "'");
}

Bases derive_bases(double s_base, double v_ll, double f) {
    if (!(s_base > 0.0) || !(v_ll > 0.0) || !(f > 0.0)) {
        throw DomainError("derive_bases: power, voltage and frequency must be positive");
    }
    Bases b;
    b.s_base = s_base;
    b.v_base = v_ll;
    b.f_base = f;
    b.omega_base = kTwoPi * f;
    b.z_base = v_ll * v_ll / s_base;
    b.l_base = b.z_base / b.omega_base;
    b.c_base = 1.0 / (b.z_base * b.omega_base);
    return b;
}

void validate(const SystemParams& sys) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("system parameter ") + what);
    };
    require(sys.f_g > 0.0, "f_g must be positive");
    require(sys.v_g > 0.0, "v_g must be positive");
    require(sys.s_base > 0.0, "s_base must be positive");
    require(sys.l_f > 0.0, "l_f must be positive");
    require(sys.c_f > 0.0, "c_f must be positive");
    require(sys.r_f >= 0.0, "r_f must be non-negative");
    require(sys.l_g > 0.0, "l_g must be positive");
    require(sys.r_g >= 0.0, "r_g must be non-negative");
    require(sys.v_dc >= 0.0 && sys.c_dc >= 0.0, "dc-link values must be non-negative");
}

ControlParams default_control(ControlMode mode, const SystemParams& sys) {
    const Bases b = sys.bases();
    ControlParams c;
    c.mode = mode;
    c.kpv_d = c.kpv_q = 0.1;
    c.kiv_d = c.kiv_q = 10.0;
    c.kpi_d = c.kpi_q = 12.0;
    c.kii_d = c.kii_q = 5.0;
    c.m_p = kTwoPi * 2.5e-5;
    c.omega_f = kTwoPi * 1.0;
    c.kp_pll = 0.5;
    c.ki_pll = 12.0;
    c.v_cd_ref = b.v_peak();
    c.p_ref = 0.5 * b.s_base;
    c.i_ld_ref = c.p_ref / (1.5 * b.v_peak());
    c.i_lq_ref = 0.0;
    return c;
}

SystemParams default_system() {
    SystemParams s;
    s.l_g = scr_to_line(kDefaultScr, s.r_g, s.bases()).l_g;
    return s;
}

LineImpedance scr_to_line(double scr, double r_g, const Bases& bases) {
    if (!(scr > 0.0)) throw DomainError("scr_to_line: SCR must be positive");
    if (!(r_g >= 0.0)) throw DomainError("scr_to_line: R_g must be non-negative");
    const double z_mag = bases.z_base / scr;
    if (r_g > z_mag) {
        throw DomainError("scr_to_line: infeasible impedance, R_g exceeds |Z_g| = " + std::to_string(z_mag) + " ohm");
    }
    LineImpedance out;
    out.l_g = std::sqrt(z_mag * z_mag - r_g * r_g) / bases.omega_base;
    out.z_g_pu = 1.0 / scr;
    return out;
}

double line_to_scr(double l_g, double r_g, const Bases& bases) {
    const double x = bases.omega_base * l_g;
    const double z = std::hypot(r_g, x);
    if (!(z > 0.0)) throw DomainError("line_to_scr: zero line impedance");
    return bases.z_base / z;
}

double base_of(Quantity kind, const Bases& b) {
    switch (kind) {
    case Quantity::Voltage: return b.v_peak();
    case Quantity::Current: return b.i_peak();
    case Quantity::Impedance: return b.z_base;
    case Quantity::Inductance: return b.l_base;
    case Quantity::Capacitance: return b.c_base;
    case Quantity::Power: return b.s_base;
    }
    return 1.0;
}

}  // namespace invstab
