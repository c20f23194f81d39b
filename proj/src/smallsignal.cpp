#include "invstab/smallsignal.hpp"

#include "invstab/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <optional>

namespace invstab {

namespace {

double input_scale(InputId id, const Bases& b) {
    switch (id) {
    case InputId::VcdRef: return b.v_peak();
    case InputId::IldRef:
    case InputId::IlqRef: return b.i_peak();
    case InputId::PRef: return b.s_base;
    }
    return 1.0;
}

double output_value(OutputId id, const SignalSet& s) {
    switch (id) {
    case OutputId::P: return s.p;
    case OutputId::Q: return s.q;
    case OutputId::Vcd: return s.v_c.d;
    case OutputId::Vcq: return s.v_c.q;
    case OutputId::Ild: return s.i_l.d;
    case OutputId::Ilq: return s.i_l.q;
    case OutputId::Igd: return s.i_g.d;
    case OutputId::Igq: return s.i_g.q;
    case OutputId::Omega: return s.omega_ctrl;
    case OutputId::Delta: return s.delta;
    case OutputId::Vid: return s.v_i.d;
    case OutputId::Viq: return s.v_i.q;
    }
    return 0.0;
}

Eigen::Index idx(const NonlinearModel& m, StateId id) {
    if (!m.has(id)) throw ConfigError("state '" + std::string(state_label(id)) + "' is not part of this model");
    return m.index(id);
}

/// c (sI - A_ss)^-1 b on a state subset.
Complex sub_transfer(const Eigen::MatrixXd& a_ss, const Eigen::VectorXd& b, const Eigen::RowVectorXd& c, double f) {
    const Eigen::Index n = a_ss.rows();
    const Complex s{0.0, kTwoPi * f};
    Eigen::MatrixXcd m = s * Eigen::MatrixXcd::Identity(n, n) - a_ss.cast<Complex>();
    const Eigen::VectorXcd sol = m.partialPivLu().solve(b.cast<Complex>());
    return (c.cast<Complex>() * sol)(0);
}

}  // namespace

std::string_view input_label(InputId id) {
    switch (id) {
    case InputId::VcdRef: return "v_cd_ref";
    case InputId::IldRef: return "i_ld_ref";
    case InputId::IlqRef: return "i_lq_ref";
    case InputId::PRef: return "p_ref";
    }
    return "?";
}

std::string_view output_label(OutputId id) {
    static constexpr std::string_view names[] = {"p", "q", "v_cd", "v_cq", "i_ld", "i_lq",
                                                 "i_gd", "i_gq", "omega", "delta", "v_id", "v_iq"};
    return names[static_cast<int>(id)];
}

Eigen::MatrixXd state_matrix(const NonlinearModel& m, std::span<const double> x, const PortOptions& port,
                             const StepRule& rule) {
    const References refs = m.references();
    const VectorFunction f = [&](std::span<const double> xx, std::span<double> out) {
        m.evaluate(xx, refs, port, out);
    };
    return central_jacobian(f, x, m.n_states(), m.state_scales(), rule);
}

LinearModel linearize(const Equilibrium& eq, std::span<const InputId> inputs, std::span<const OutputId> outputs,
                      const StepRule& rule) {
    if (!eq.converged) throw NumericError("linearize: equilibrium did not converge");
    const NonlinearModel& m = eq.model;
    const std::size_t n = m.n_states();
    const std::size_t nu = inputs.size();
    const std::size_t ny = outputs.size();
    const References base_refs = m.references();
    const Bases b = m.system().bases();

    // Stack [x; u] -> [f; y] and difference once.
    std::vector<double> z(eq.x_star);
    std::vector<double> scales(m.state_scales());
    for (InputId id : inputs) {
        z.push_back(base_refs.get(id));
        scales.push_back(input_scale(id, b));
    }
    const VectorFunction f = [&](std::span<const double> zz, std::span<double> out) {
        References r = base_refs;
        for (std::size_t k = 0; k < nu; ++k) r.set(inputs[k], zz[n + k]);
        const SignalSet s = m.evaluate(zz.subspan(0, n), r, PortOptions{}, out.subspan(0, n));
        for (std::size_t k = 0; k < ny; ++k) out[n + k] = output_value(outputs[k], s);
    };
    const Eigen::MatrixXd jac = central_jacobian(f, z, n + ny, scales, rule);

    const auto N = static_cast<Eigen::Index>(n), NU = static_cast<Eigen::Index>(nu), NY = static_cast<Eigen::Index>(ny);
    LinearModel lin;
    lin.a = jac.block(0, 0, N, N);
    lin.b = jac.block(0, N, N, NU);
    lin.c = jac.block(N, 0, NY, N);
    lin.d = jac.block(N, N, NY, NU);
    lin.state_labels = m.state_labels();
    for (InputId id : inputs) lin.input_labels.emplace_back(input_label(id));
    for (OutputId id : outputs) lin.output_labels.emplace_back(output_label(id));
    return lin;
}

std::vector<Complex> eigenvalues(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw NumericError("eigenvalues: matrix is not square");
    if (!a.allFinite()) throw NumericError("eigenvalues: matrix has non-finite entries");
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
    if (solver.info() != Eigen::Success) throw NumericError("eigenvalues: QR iteration did not converge");
    std::vector<Complex> out(solver.eigenvalues().begin(), solver.eigenvalues().end());
    std::sort(out.begin(), out.end(), [](const Complex& l, const Complex& r) {
        if (l.real() != r.real()) return l.real() > r.real();
        return l.imag() > r.imag();
    });
    return out;
}

ModeInfo dominant_mode(std::span<const Complex> eigs) {
    if (eigs.empty()) throw NumericError("dominant_mode: no eigenvalues");
    const double threshold = kTwoPi * kOscillatoryThresholdHz;
    std::optional<Complex> best;
    for (const Complex& e : eigs) {
        if (std::abs(e.imag()) <= threshold) continue;
        if (!best || e.real() > best->real() ||
            (e.real() == best->real() && std::abs(e.imag()) > std::abs(best->imag())) ||
            (e.real() == best->real() && std::abs(e.imag()) == std::abs(best->imag()) && e.imag() > best->imag())) {
            best = e;
        }
    }
    ModeInfo info;
    if (best) {
        info.eigenvalue = {best->real(), std::abs(best->imag())};
        info.freq = std::abs(best->imag()) / kTwoPi;
    } else {
        Complex r = eigs.front();
        for (const Complex& e : eigs) {
            if (e.real() > r.real()) r = e;
        }
        info.eigenvalue = {r.real(), 0.0};
        info.freq = 0.0;
    }
    info.sigma = info.eigenvalue.real();
    const double mag = std::abs(info.eigenvalue);
    info.damping_ratio = mag > 0.0 ? -info.sigma / mag : 1.0;
    return info;
}

std::vector<double> linear_sweep(double start, double stop, std::size_t points) {
    if (points == 0) return {};
    if (points == 1) return {start};
    std::vector<double> out(points);
    for (std::size_t k = 0; k < points; ++k) {
        out[k] = start + (stop - start) * static_cast<double>(k) / static_cast<double>(points - 1);
    }
    return out;
}

PoleMap pole_sweep(ControlMode mode, const SystemParams& sys, const ControlParams& ctrl, const OperatingTarget& target,
                   std::span<const double> zg_values) {
    PoleMap map;
    map.mode = mode;
    const Bases b = sys.bases();
    std::optional<std::vector<double>> warm;
    for (double zg : zg_values) {
        PoleMapPoint pt;
        pt.zg_pu = zg;
        pt.scr = zg > 0.0 ? 1.0 / zg : 0.0;
        try {
            SystemParams s = sys;
            s.l_g = scr_to_line(pt.scr, sys.r_g, b).l_g;
            const NonlinearModel m = assemble(mode, s, ctrl);
            Equilibrium eq;
            try {
                eq = warm ? solve(m, target, std::span<const double>(*warm)) : solve(m, target);
            } catch (const EquilibriumError&) {
                if (!warm) throw;
                eq = solve(m, target);
            }
            pt.eigs = eigenvalues(state_matrix(eq.model, eq.x_star));
            pt.x_star = eq.x_star;
            pt.feasible = true;
            pt.stable = std::all_of(pt.eigs.begin(), pt.eigs.end(), [](const Complex& e) { return e.real() < 0.0; });
            warm = eq.x_star;
        } catch (const DomainError& e) {
            pt.note = e.what();
        } catch (const NumericError& e) {
            pt.note = e.what();
        }
        map.points.push_back(std::move(pt));
    }
    return map;
}

ComplexVectorPair complex_vector_reduce(const Eigen::Matrix2cd& y) {
    const Complex j{0.0, 1.0};
    return {((y(0, 0) + y(1, 1)) + j * (y(1, 0) - y(0, 1))) / 2.0,
            ((y(0, 0) - y(1, 1)) + j * (y(1, 0) + y(0, 1))) / 2.0};
}

Eigen::Matrix2cd complex_vector_expand(const ComplexVectorPair& at_f, const ComplexVectorPair& at_minus_f) {
    // With Y(-f) = conj(Y(f)): Ydd + Yqq = Y+(f) + conj(Y+(-f)), Yqd - Ydq = -j (Y+(f) - conj(Y+(-f))),
    // and likewise for Y- with Ydd - Yqq and Yqd + Ydq.
    const Complex j{0.0, 1.0};
    const Complex sum_diag = at_f.plus + std::conj(at_minus_f.plus);
    const Complex anti = -j * (at_f.plus - std::conj(at_minus_f.plus));
    const Complex diff_diag = at_f.minus + std::conj(at_minus_f.minus);
    const Complex sym = -j * (at_f.minus - std::conj(at_minus_f.minus));
    Eigen::Matrix2cd y;
    y(0, 0) = (sum_diag + diff_diag) / 2.0;
    y(1, 1) = (sum_diag - diff_diag) / 2.0;
    y(1, 0) = (anti + sym) / 2.0;
    y(0, 1) = (sym - anti) / 2.0;
    return y;
}

std::vector<double> signed_log_grid(double f_min, double f_max, std::size_t per_sign) {
    if (!(f_min > 0.0) || !(f_max > f_min) || per_sign < 2) {
        throw ConfigError("frequency grid needs 0 < f_min < f_max and at least 2 points per sign");
    }
    std::vector<double> pos(per_sign);
    const double l0 = std::log10(f_min), l1 = std::log10(f_max);
    for (std::size_t k = 0; k < per_sign; ++k) {
        pos[k] = std::pow(10.0, l0 + (l1 - l0) * static_cast<double>(k) / static_cast<double>(per_sign - 1));
    }
    std::vector<double> out;
    out.reserve(2 * per_sign);
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) out.push_back(-*it);
    out.insert(out.end(), pos.begin(), pos.end());
    return out;
}

Eigen::Matrix2cd passive_port_admittance(const SystemParams& sys, double omega, double f) {
    const Complex s{0.0, kTwoPi * f};
    Eigen::Matrix2cd jrot;
    jrot << 0.0, -1.0, 1.0, 0.0;
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    const Eigen::Matrix2cd branch = (s * sys.l_f + sys.r_f) * id + (omega * sys.l_f) * jrot;
    const Eigen::Matrix2cd shunt = (s * sys.c_f) * id + (omega * sys.c_f) * jrot;
    return -(branch.inverse() + shunt);
}

AdmittanceResponse port_admittance(const Equilibrium& eq, std::span<const double> freqs, const PortScanOptions& opts) {
    if (!eq.converged) throw NumericError("port_admittance: equilibrium did not converge");
    const NonlinearModel& m = eq.model;
    PortOptions port;
    port.grid_branch_removed = true;
    port.freeze_controller = opts.freeze_controller;
    port.frozen_v_i = eq.signals.v_i;
    port.freeze_sync = opts.freeze_controller;
    port.frozen_omega = eq.signals.omega_ctrl;
    // Without the grid branch the model is at most bilinear in the states, so
    // central differences are exact for any step; a wide one limits rounding.
    StepRule rule;
    rule.relative = 1e-3;
    rule.absolute_pu = 1e-3;
    const Eigen::MatrixXd jac = state_matrix(m, eq.x_star, port, rule);

    const Eigen::Index igd = idx(m, StateId::Igd), igq = idx(m, StateId::Igq);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < jac.rows(); ++k) {
        if (k != igd && k != igq) keep.push_back(k);
    }
    const auto n = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd a(n, n), b(n, 2), c = Eigen::MatrixXd::Zero(2, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index col = 0; col < n; ++col) a(r, col) = jac(keep[r], keep[col]);
        b(r, 0) = jac(keep[r], igd);
        b(r, 1) = jac(keep[r], igq);
        if (keep[r] == m.index(StateId::Vcd)) c(0, r) = 1.0;
        if (keep[r] == m.index(StateId::Vcq)) c(1, r) = 1.0;
    }

    AdmittanceResponse resp;
    resp.mode = m.mode();
    resp.z_base = m.system().bases().z_base;
    const Eigen::MatrixXcd ac = a.cast<Complex>(), bc = b.cast<Complex>(), cc = c.cast<Complex>();
    for (double f : freqs) {
        AdmittancePoint pt;
        pt.freq = f;
        const Complex s{0.0, kTwoPi * f};
        const Eigen::MatrixXcd pencil = s * Eigen::MatrixXcd::Identity(n, n) - ac;
        const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(pencil);
        if (!(lu.rcond() > 1e-13)) {
            pt.singular = true;
        } else {
            const Eigen::Matrix2cd z = cc * lu.solve(bc);
            const Eigen::PartialPivLU<Eigen::Matrix2cd> zlu(z);
            if (!(zlu.rcond() > 1e-13)) {
                pt.singular = true;
            } else {
                pt.y_dq = z.inverse();
                pt.y_pm = complex_vector_reduce(pt.y_dq);
            }
        }
        if (pt.singular) {
            pt.y_dq.setZero();
            pt.y_pm = {};
        }
        resp.points.push_back(pt);
    }
    return resp;
}

AdmittanceResponse port_admittance(ControlMode mode, const SystemParams& sys, const ControlParams& ctrl,
                                   const OperatingTarget& target, std::span<const double> freqs,
                                   const PortScanOptions& opts) {
    const Equilibrium eq = solve(assemble(mode, sys, ctrl), target);
    return port_admittance(eq, freqs, opts);
}

namespace {

PortOptions sync_frozen(const Equilibrium& eq) {
    PortOptions port;
    port.freeze_sync = true;
    port.frozen_omega = eq.signals.omega_ctrl;
    return port;
}

}  // namespace

NortonQ extract_norton_q(const Equilibrium& eq, double f) {
    const NonlinearModel& m = eq.model;
    if (has_q_voltage_loop(m.mode())) throw ConfigError("q-axis Norton equivalent needs a current-controlled q-axis");
    const std::array<InputId, 1> in{InputId::IlqRef};
    const LinearModel lin = linearize(eq, in);
    const Eigen::MatrixXd a_sync = state_matrix(m, eq.x_star, sync_frozen(eq));

    std::vector<Eigen::Index> sub{idx(m, StateId::Ilq), idx(m, StateId::XiIq)};
    if (m.has(StateId::DelQ)) sub.push_back(m.index(StateId::DelQ));
    const auto n = static_cast<Eigen::Index>(sub.size());
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd b_ref(n), b_v(n);
    const Eigen::Index vcq = idx(m, StateId::Vcq);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) a(r, c) = a_sync(sub[r], sub[c]);
        b_ref(r) = lin.b(sub[r], 0);
        b_v(r) = a_sync(sub[r], vcq);
    }
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(n);
    c(0) = 1.0;
    return {sub_transfer(a, b_ref, c, f), -sub_transfer(a, b_v, c, f)};
}

TheveninD extract_thevenin_d(const Equilibrium& eq, double f) {
    const NonlinearModel& m = eq.model;
    if (!has_d_voltage_loop(m.mode())) throw ConfigError("d-axis Thevenin equivalent needs a d-axis voltage loop");
    const std::array<InputId, 1> in{InputId::VcdRef};
    const LinearModel lin = linearize(eq, in);
    const Eigen::MatrixXd a_sync = state_matrix(m, eq.x_star, sync_frozen(eq));

    std::vector<Eigen::Index> sub{idx(m, StateId::Vcd), idx(m, StateId::Ild), idx(m, StateId::XiVd),
                                  idx(m, StateId::XiId)};
    if (m.has(StateId::DelD)) sub.push_back(m.index(StateId::DelD));
    const auto n = static_cast<Eigen::Index>(sub.size());
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd b_ref(n), b_i(n);
    const Eigen::Index igd = idx(m, StateId::Igd);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) a(r, c) = a_sync(sub[r], sub[c]);
        b_ref(r) = lin.b(sub[r], 0);
        b_i(r) = a_sync(sub[r], igd);
    }
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(n);
    c(0) = 1.0;
    return {sub_transfer(a, b_ref, c, f), -sub_transfer(a, b_i, c, f)};
}

}  // namespace invstab
