#include "invstab/plant.hpp"

#include "invstab/errors.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace invstab {

namespace {

constexpr std::array<std::string_view, static_cast<std::size_t>(StateId::Count)> kLabels = {
    "i_ld", "i_lq", "v_cd", "v_cq", "i_gd", "i_gq",
    "xi_vd", "xi_vq", "xi_id", "xi_iq", "p_f", "xi_pll", "delta",
    "x_del_d", "x_del_q"};

std::vector<StateId> layout_for(ControlMode mode, bool with_delay) {
    std::vector<StateId> ids = {StateId::Ild, StateId::Ilq, StateId::Vcd, StateId::Vcq, StateId::Igd, StateId::Igq};
    switch (mode) {
    case ControlMode::GfmDroop:
        ids.insert(ids.end(), {StateId::XiVd, StateId::XiVq, StateId::XiId, StateId::XiIq, StateId::Pf, StateId::Delta});
        break;
    case ControlMode::GflPll:
        ids.insert(ids.end(), {StateId::XiId, StateId::XiIq, StateId::XiPll, StateId::Delta});
        break;
    case ControlMode::HybridDroop:
        ids.insert(ids.end(), {StateId::XiVd, StateId::XiId, StateId::XiIq, StateId::Pf, StateId::Delta});
        break;
    case ControlMode::HybridPll:
        ids.insert(ids.end(), {StateId::XiVd, StateId::XiId, StateId::XiIq, StateId::XiPll, StateId::Delta});
        break;
    }
    if (with_delay) ids.insert(ids.end(), {StateId::DelD, StateId::DelQ});
    return ids;
}

double scale_for(StateId id, const Bases& b) {
    switch (id) {
    case StateId::Ild: case StateId::Ilq: case StateId::Igd: case StateId::Igq:
    case StateId::XiId: case StateId::XiIq:
        return b.i_peak();
    case StateId::Vcd: case StateId::Vcq: case StateId::XiVd: case StateId::XiVq:
    case StateId::XiPll: case StateId::DelD: case StateId::DelQ:
        return b.v_peak();
    case StateId::Pf:
        return b.s_base;
    case StateId::Delta:
    case StateId::Count:
        return 1.0;
    }
    return 1.0;
}

void require_gain(double value, const char* name, ControlMode mode) {
    if (!std::isfinite(value) || value < 0.0) {
        throw ConfigError(std::string("control gain '") + name + "' is required by mode " +
                          std::string(to_string(mode)) + " and must be finite and >= 0");
    }
}

}  // namespace

std::string_view state_label(StateId id) { return kLabels[static_cast<std::size_t>(id)]; }

double References::get(InputId id) const {
    switch (id) {
    case InputId::VcdRef: return v_cd_ref;
    case InputId::IldRef: return i_ld_ref;
    case InputId::IlqRef: return i_lq_ref;
    case InputId::PRef: return p_ref;
    }
    return 0.0;
}

void References::set(InputId id, double value) {
    switch (id) {
    case InputId::VcdRef: v_cd_ref = value; break;
    case InputId::IldRef: i_ld_ref = value; break;
    case InputId::IlqRef: i_lq_ref = value; break;
    case InputId::PRef: p_ref = value; break;
    }
}

NonlinearModel assemble(ControlMode mode, const SystemParams& sys, const ControlParams& ctrl) {
    if (ctrl.mode != mode) {
        throw ConfigError("control parameters are for mode " + std::string(to_string(ctrl.mode)) +
                          ", model requested for " + std::string(to_string(mode)));
    }
    validate(sys);

    require_gain(ctrl.kpi_d, "kpi_d", mode);
    require_gain(ctrl.kii_d, "kii_d", mode);
    require_gain(ctrl.kpi_q, "kpi_q", mode);
    require_gain(ctrl.kii_q, "kii_q", mode);
    if (has_d_voltage_loop(mode)) {
        require_gain(ctrl.kpv_d, "kpv_d", mode);
        require_gain(ctrl.kiv_d, "kiv_d", mode);
        if (!std::isfinite(ctrl.v_cd_ref)) throw ConfigError("reference 'v_cd_ref' is required by mode " + std::string(to_string(mode)));
    }
    if (has_q_voltage_loop(mode)) {
        require_gain(ctrl.kpv_q, "kpv_q", mode);
        require_gain(ctrl.kiv_q, "kiv_q", mode);
    }
    if (uses_droop(mode)) {
        require_gain(ctrl.m_p, "m_p", mode);
        require_gain(ctrl.omega_f, "omega_f", mode);
        if (!(ctrl.omega_f > 0.0)) throw ConfigError("control gain 'omega_f' must be positive");
        if (!std::isfinite(ctrl.p_ref)) throw ConfigError("reference 'p_ref' is required by mode " + std::string(to_string(mode)));
    } else {
        require_gain(ctrl.kp_pll, "kp_pll", mode);
        require_gain(ctrl.ki_pll, "ki_pll", mode);
    }
    if (!std::isfinite(ctrl.i_lq_ref) || !std::isfinite(ctrl.i_ld_ref)) {
        throw ConfigError("current references must be finite");
    }
    if (!(ctrl.delay.t_d >= 0.0) || !std::isfinite(ctrl.delay.t_d)) throw ConfigError("delay t_d must be >= 0");

    NonlinearModel m;
    m.mode_ = mode;
    m.sys_ = sys;
    m.ctrl_ = ctrl;
    m.ids_ = layout_for(mode, ctrl.delay.active());
    m.index_.fill(-1);
    const Bases b = sys.bases();
    for (std::size_t k = 0; k < m.ids_.size(); ++k) {
        m.index_[static_cast<std::size_t>(m.ids_[k])] = static_cast<int>(k);
        m.labels_.emplace_back(state_label(m.ids_[k]));
        m.scales_.push_back(scale_for(m.ids_[k], b));
    }
    return m;
}

References NonlinearModel::references() const {
    References r;
    r.v_cd_ref = ctrl_.v_cd_ref;
    r.i_ld_ref = ctrl_.i_ld_ref;
    r.i_lq_ref = ctrl_.i_lq_ref;
    r.p_ref = ctrl_.p_ref;
    return r;
}

std::vector<double> NonlinearModel::derivatives(std::span<const double> x) const {
    std::vector<double> dx(n_states());
    derivatives(x, dx);
    return dx;
}

void NonlinearModel::derivatives(std::span<const double> x, std::span<double> dx) const {
    evaluate(x, references(), PortOptions{}, dx);
}

SignalSet NonlinearModel::outputs(std::span<const double> x) const {
    std::vector<double> dx(n_states());
    return evaluate(x, references(), PortOptions{}, dx);
}

SignalSet NonlinearModel::evaluate(std::span<const double> x, const References& refs, const PortOptions& port,
                                   std::span<double> dx) const {
    if (x.size() != n_states() || dx.size() != n_states()) {
        throw NumericError("state vector has " + std::to_string(x.size()) + " entries, model expects " +
                           std::to_string(n_states()));
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k])) throw NumericError("non-finite state '" + labels_[k] + "'");
    }
    auto val = [&](StateId id) {
        const int k = index(id);
        return k >= 0 ? x[static_cast<std::size_t>(k)] : 0.0;
    };
    auto put = [&](StateId id, double v) {
        const int k = index(id);
        if (k >= 0) dx[static_cast<std::size_t>(k)] = v;
    };

    SignalSet sig;
    sig.i_l = {val(StateId::Ild), val(StateId::Ilq)};
    sig.v_c = {val(StateId::Vcd), val(StateId::Vcq)};
    sig.i_g = {val(StateId::Igd), val(StateId::Igq)};
    sig.delta = val(StateId::Delta);

    const double omega_star = sys_.omega_g();
    const double vg = sys_.v_g_peak();
    sig.v_g = {vg * std::cos(sig.delta), -vg * std::sin(sig.delta)};
    sig.p = 1.5 * (sig.v_c.d * sig.i_g.d + sig.v_c.q * sig.i_g.q);
    sig.q = 1.5 * (sig.v_c.q * sig.i_g.d - sig.v_c.d * sig.i_g.q);

    // Synchronization.
    if (uses_droop(mode_)) {
        const double p_f = val(StateId::Pf);
        sig.omega_ctrl = droop_eval(ctrl_.m_p, omega_star, refs.p_ref, p_f);
        put(StateId::Pf, lpf_eval(ctrl_.omega_f, p_f, sig.p));
    } else {
        const BlockOutput pll = pll_eval(omega_star, ctrl_.kp_pll, ctrl_.ki_pll, val(StateId::XiPll), sig.v_c.q);
        sig.omega_ctrl = pll.y;
        put(StateId::XiPll, pll.dx_dt);
    }
    put(StateId::Delta, sig.omega_ctrl - omega_star);

    // Current references.
    double i_ref_d = refs.i_ld_ref;
    double i_ref_q = refs.i_lq_ref;
    if (has_d_voltage_loop(mode_)) {
        const BlockOutput v_d = pi_eval({ctrl_.kpv_d, ctrl_.kiv_d}, val(StateId::XiVd), refs.v_cd_ref - sig.v_c.d);
        i_ref_d = v_d.y;
        put(StateId::XiVd, v_d.dx_dt);
    }
    if (has_q_voltage_loop(mode_)) {
        const BlockOutput v_q = pi_eval({ctrl_.kpv_q, ctrl_.kiv_q}, val(StateId::XiVq), 0.0 - sig.v_c.q);
        i_ref_q = v_q.y;
        put(StateId::XiVq, v_q.dx_dt);
    }

    // Current loops and modulation delay.
    const BlockOutput c_d = pi_eval({ctrl_.kpi_d, ctrl_.kii_d}, val(StateId::XiId), i_ref_d - sig.i_l.d);
    const BlockOutput c_q = pi_eval({ctrl_.kpi_q, ctrl_.kii_q}, val(StateId::XiIq), i_ref_q - sig.i_l.q);
    put(StateId::XiId, c_d.dx_dt);
    put(StateId::XiIq, c_q.dx_dt);
    const BlockOutput del_d = delay_eval(ctrl_.delay, val(StateId::DelD), c_d.y);
    const BlockOutput del_q = delay_eval(ctrl_.delay, val(StateId::DelQ), c_q.y);
    put(StateId::DelD, del_d.dx_dt);
    put(StateId::DelQ, del_q.dx_dt);
    sig.v_i = port.freeze_controller ? port.frozen_v_i : Dq{del_d.y, del_q.y};

    // LC filter and line in the frame rotating at omega_ctrl.
    const double w = port.freeze_sync ? port.frozen_omega : sig.omega_ctrl;
    const double lf = sys_.l_f, rf = sys_.r_f, cf = sys_.c_f, lg = sys_.l_g, rg = sys_.r_g;
    put(StateId::Ild, (sig.v_i.d - sig.v_c.d - rf * sig.i_l.d + w * lf * sig.i_l.q) / lf);
    put(StateId::Ilq, (sig.v_i.q - sig.v_c.q - rf * sig.i_l.q - w * lf * sig.i_l.d) / lf);
    put(StateId::Vcd, (sig.i_l.d - sig.i_g.d + w * cf * sig.v_c.q) / cf);
    put(StateId::Vcq, (sig.i_l.q - sig.i_g.q - w * cf * sig.v_c.d) / cf);
    if (port.grid_branch_removed) {
        put(StateId::Igd, 0.0);
        put(StateId::Igq, 0.0);
    } else {
        put(StateId::Igd, (sig.v_c.d - sig.v_g.d - rg * sig.i_g.d + w * lg * sig.i_g.q) / lg);
        put(StateId::Igq, (sig.v_c.q - sig.v_g.q - rg * sig.i_g.q - w * lg * sig.i_g.d) / lg);
    }
    return sig;
}

NonlinearModel NonlinearModel::with_line_inductance(double l_g) const {
    SystemParams s = sys_;
    s.l_g = l_g;
    return assemble(mode_, s, ctrl_);
}

NonlinearModel NonlinearModel::with_references(const References& refs) const {
    ControlParams c = ctrl_;
    c.v_cd_ref = refs.v_cd_ref;
    c.i_ld_ref = refs.i_ld_ref;
    c.i_lq_ref = refs.i_lq_ref;
    c.p_ref = refs.p_ref;
    NonlinearModel m = *this;
    m.ctrl_ = c;
    return m;
}

double NonlinearModel::stored_energy(std::span<const double> x) const {
    auto sq = [&](StateId a, StateId b) {
        const double u = x[static_cast<std::size_t>(index(a))], v = x[static_cast<std::size_t>(index(b))];
        return u * u + v * v;
    };
    return 0.75 * (sys_.l_f * sq(StateId::Ild, StateId::Ilq) + sys_.c_f * sq(StateId::Vcd, StateId::Vcq) +
                   sys_.l_g * sq(StateId::Igd, StateId::Igq));
}

PowerBalance power_balance(const NonlinearModel& m, std::span<const double> x) {
    std::vector<double> dx(m.n_states());
    const SignalSet s = m.evaluate(x, m.references(), PortOptions{}, dx);
    auto rate = [&](StateId id) { return dx[static_cast<std::size_t>(m.index(id))]; };
    const SystemParams& p = m.system();
    PowerBalance pb;
    pb.p_converter = 1.5 * (s.v_i.d * s.i_l.d + s.v_i.q * s.i_l.q);
    pb.p_grid = 1.5 * (s.v_g.d * s.i_g.d + s.v_g.q * s.i_g.q);
    pb.losses = 1.5 * (p.r_f * (s.i_l.d * s.i_l.d + s.i_l.q * s.i_l.q) + p.r_g * (s.i_g.d * s.i_g.d + s.i_g.q * s.i_g.q));
    pb.d_energy = 1.5 * (p.l_f * (s.i_l.d * rate(StateId::Ild) + s.i_l.q * rate(StateId::Ilq)) +
                         p.c_f * (s.v_c.d * rate(StateId::Vcd) + s.v_c.q * rate(StateId::Vcq)) +
                         p.l_g * (s.i_g.d * rate(StateId::Igd) + s.i_g.q * rate(StateId::Igq)));
    return pb;
}

}  // namespace invstab
