#include "invstab/equilibrium.hpp"

#include "invstab/jacobian.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace invstab {

namespace {

double inf_norm(std::span<const double> v) {
    double r = 0.0;
    for (double e : v) r = std::max(r, std::abs(e));
    return r;
}

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a;
}

/// Augmented unknowns and residuals for one model/target pair.
class ClosedProblem {
public:
    ClosedProblem(const NonlinearModel& m, const OperatingTarget& t) : model_(m), target_(t) {
        refs_ = m.references();
        if (uses_droop(m.mode())) refs_.p_ref = t.p_target;
        n_ = m.n_states();
        extras_ = m.mode() == ControlMode::GflPll ? 2 : 0;
        const Bases b = m.system().bases();
        scales_ = m.state_scales();
        if (extras_ > 0) {
            scales_.push_back(b.i_peak());
            scales_.push_back(b.i_peak());
        }
        s_base_ = b.s_base;
    }

    std::size_t size() const { return n_ + extras_; }
    const std::vector<double>& scales() const { return scales_; }

    std::vector<double> pack(std::span<const double> x) const {
        std::vector<double> z(x.begin(), x.end());
        if (extras_ > 0) {
            z.push_back(refs_.i_ld_ref);
            z.push_back(refs_.i_lq_ref);
        }
        return z;
    }

    References references_at(std::span<const double> z) const {
        References r = refs_;
        if (extras_ > 0) {
            r.i_ld_ref = z[n_];
            r.i_lq_ref = z[n_ + 1];
        }
        return r;
    }

    void residuals(std::span<const double> z, std::span<double> out) const {
        const References r = references_at(z);
        std::span<double> dx = out.subspan(0, n_);
        const SignalSet s = model_.evaluate(z.subspan(0, n_), r, PortOptions{}, dx);
        const auto& sc = model_.state_scales();
        for (std::size_t i = 0; i < n_; ++i) dx[i] /= sc[i];
        if (extras_ > 0) {
            out[n_] = (s.p - target_.p_target) / s_base_;
            out[n_ + 1] = (s.q - target_.q_target) / s_base_;
        }
    }

    double norm(std::span<const double> z) const {
        std::vector<double> f(size());
        residuals(z, f);
        return inf_norm(f);
    }

    NonlinearModel closed_model(std::span<const double> z) const { return model_.with_references(references_at(z)); }

private:
    const NonlinearModel& model_;
    OperatingTarget target_;
    References refs_;
    std::size_t n_ = 0;
    std::size_t extras_ = 0;
    std::vector<double> scales_;
    double s_base_ = 1.0;
};

}  // namespace

double residual(const NonlinearModel& m, std::span<const double> x) {
    std::vector<double> dx = m.derivatives(x);
    const auto& sc = m.state_scales();
    double r = 0.0;
    for (std::size_t i = 0; i < dx.size(); ++i) r = std::max(r, std::abs(dx[i]) / sc[i]);
    return r;
}

std::vector<double> flat_start(const NonlinearModel& m, const OperatingTarget& target, std::optional<double> delta0) {
    const SystemParams& sys = m.system();
    const ControlParams& c = m.control();
    const double w = sys.omega_g();
    const double vg = sys.v_g_peak();
    const double v = has_d_voltage_loop(m.mode()) ? c.v_cd_ref : vg;
    const double i_d = target.p_target / (1.5 * v);

    double i_gq = 0.0;
    double i_lq = i_gq + w * sys.c_f * v;
    if (m.mode() == ControlMode::HybridDroop || m.mode() == ControlMode::HybridPll) {
        i_lq = c.i_lq_ref;
        i_gq = i_lq - w * sys.c_f * v;
    } else if (m.mode() == ControlMode::GflPll) {
        i_gq = -target.q_target / (1.5 * v);
        i_lq = i_gq + w * sys.c_f * v;
    }

    const double x_g = w * sys.l_g;
    const double delta = delta0.value_or(std::asin(std::clamp(target.p_target * x_g / (1.5 * v * vg), -0.9, 0.9)));

    std::vector<double> x(m.n_states(), 0.0);
    auto set = [&](StateId id, double value) {
        if (m.has(id)) x[static_cast<std::size_t>(m.index(id))] = value;
    };
    auto safe_div = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };

    const double v_id = v + sys.r_f * i_d - w * sys.l_f * i_lq;
    const double v_iq = sys.r_f * i_lq + w * sys.l_f * i_d;
    set(StateId::Ild, i_d);
    set(StateId::Ilq, i_lq);
    set(StateId::Vcd, v);
    set(StateId::Igd, i_d);
    set(StateId::Igq, i_gq);
    set(StateId::XiVd, safe_div(i_d, c.kiv_d));
    set(StateId::XiVq, safe_div(i_lq, c.kiv_q));
    set(StateId::XiId, safe_div(v_id, c.kii_d));
    set(StateId::XiIq, safe_div(v_iq, c.kii_q));
    set(StateId::Pf, target.p_target);
    set(StateId::Delta, delta);
    set(StateId::DelD, v_id);
    set(StateId::DelQ, v_iq);
    return x;
}

Equilibrium try_solve(const NonlinearModel& m, const OperatingTarget& target,
                      std::optional<std::span<const double>> guess, const SolveOptions& opts) {
    ClosedProblem prob(m, target);
    const std::size_t n = prob.size();
    std::vector<double> x0 = guess ? std::vector<double>(guess->begin(), guess->end()) : flat_start(m, target);
    if (x0.size() != m.n_states()) throw ConfigError("initial guess has the wrong number of states");
    std::vector<double> z = prob.pack(x0);
    const std::vector<double>& scales = prob.scales();

    const VectorFunction f = [&prob](std::span<const double> zz, std::span<double> out) { prob.residuals(zz, out); };

    std::vector<double> fz(n);
    double norm = std::numeric_limits<double>::infinity();
    try {
        prob.residuals(z, fz);
        norm = inf_norm(fz);
    } catch (const NumericError&) {
    }

    int it = 0;
    while (it < opts.max_iterations && norm > opts.polish && std::isfinite(norm)) {
        Eigen::MatrixXd jac = central_jacobian(f, z, n, scales);
        for (std::size_t j = 0; j < n; ++j) jac.col(static_cast<Eigen::Index>(j)) *= scales[j];
        const Eigen::Map<const Eigen::VectorXd> rhs(fz.data(), static_cast<Eigen::Index>(n));
        const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-rhs);
        if (!step.allFinite()) break;

        double alpha = 1.0;
        bool accepted = false;
        std::vector<double> trial(n), ftrial(n);
        while (alpha >= opts.min_step) {
            for (std::size_t j = 0; j < n; ++j) trial[j] = z[j] + alpha * step(static_cast<Eigen::Index>(j)) * scales[j];
            try {
                prob.residuals(trial, ftrial);
                const double tn = inf_norm(ftrial);
                if (tn < norm) {
                    accepted = true;
                    z = trial;
                    fz = ftrial;
                    norm = tn;
                    break;
                }
            } catch (const NumericError&) {
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
        ++it;
    }

    Equilibrium eq;
    eq.iterations = it;
    eq.model = prob.closed_model(z);
    eq.x_star.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(m.n_states()));
    eq.residual_inf = norm;
    eq.converged = std::isfinite(norm) && norm < opts.tolerance;
    if (eq.converged) {
        eq.residual_inf = residual(eq.model, eq.x_star);
        eq.converged = eq.residual_inf < opts.tolerance;
        eq.signals = eq.model.outputs(eq.x_star);
    }
    return eq;
}

Equilibrium solve(const NonlinearModel& m, const OperatingTarget& target,
                  std::optional<std::span<const double>> guess, const SolveOptions& opts) {
    auto low_angle = [&](Equilibrium& eq) {
        if (!eq.converged) return false;
        auto& d = eq.x_star[static_cast<std::size_t>(eq.model.index(StateId::Delta))];
        const double wrapped = wrap_angle(d);
        if (std::abs(wrapped) >= std::numbers::pi / 2.0) return false;
        if (wrapped != d) {
            // Frame angle is only defined modulo 2 pi.
            d = wrapped;
            eq.signals = eq.model.outputs(eq.x_star);
        }
        return true;
    };

    Equilibrium eq = try_solve(m, target, guess, opts);
    if (low_angle(eq)) return eq;

    const std::vector<double> restart = flat_start(m, target, 0.1);
    Equilibrium retry = try_solve(m, target, std::span<const double>(restart), opts);
    if (low_angle(retry)) return retry;

    const Equilibrium& last = retry.residual_inf < eq.residual_inf ? retry : eq;
    std::ostringstream msg;
    msg.precision(6);
    if (last.converged) {
        msg << "no equilibrium on the low-angle branch (delta* outside (-pi/2, pi/2)) for mode "
            << to_string(m.mode());
    } else {
        msg << "no equilibrium found for mode " << to_string(m.mode()) << ": final residual " << last.residual_inf
            << " after " << last.iterations << " Newton iterations (power may exceed the transfer limit)";
    }
    throw EquilibriumError(msg.str(), last.residual_inf, last.x_star);
}

}  // namespace invstab
