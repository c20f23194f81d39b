#include "invstab/errors.hpp"
#include "invstab/smallsignal.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace invstab;

namespace {

constexpr ControlMode kModes[] = {ControlMode::GfmDroop, ControlMode::GflPll, ControlMode::HybridDroop,
                                  ControlMode::HybridPll};

Equilibrium solved(ControlMode mode, DelaySpec delay = {}) {
    const SystemParams s = default_system();
    ControlParams c = default_control(mode, s);
    c.delay = delay;
    return solve(assemble(mode, s, c), OperatingTarget{});
}

bool conjugate_closed(const std::vector<Complex>& eigs, double tol) {
    for (const Complex& e : eigs) {
        const bool found = std::any_of(eigs.begin(), eigs.end(), [&](const Complex& o) {
            return std::abs(o - std::conj(e)) <= tol * std::max(1.0, std::abs(e));
        });
        if (!found) return false;
    }
    return true;
}

double rel(Complex a, Complex b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("plant sub-block of the jacobian is the hand-written circuit matrix") {
    const Equilibrium eq = solved(ControlMode::GfmDroop);
    const NonlinearModel& m = eq.model;
    PortOptions port;
    port.freeze_controller = true;
    port.frozen_v_i = eq.signals.v_i;
    port.freeze_sync = true;
    port.frozen_omega = eq.signals.omega_ctrl;
    const Eigen::MatrixXd a = state_matrix(m, eq.x_star, port);
    const SystemParams& s = m.system();
    const double w = eq.signals.omega_ctrl;
    const double lf = s.l_f, rf = s.r_f, cf = s.c_f, lg = s.l_g, rg = s.r_g;
    Eigen::MatrixXd h(6, 6);
    h << -rf / lf, w, -1 / lf, 0, 0, 0,
         -w, -rf / lf, 0, -1 / lf, 0, 0,
         1 / cf, 0, 0, w, -1 / cf, 0,
         0, 1 / cf, -w, 0, 0, -1 / cf,
         0, 0, 1 / lg, 0, -rg / lg, w,
         0, 0, 0, 1 / lg, -w, -rg / lg;
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            CAPTURE(i);
            CAPTURE(j);
            if (h(i, j) == 0.0) {
                CHECK(std::abs(a(i, j)) < 1e-6 * h.cwiseAbs().maxCoeff());
            } else {
                CHECK(a(i, j) == doctest::Approx(h(i, j)).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("halving the difference step barely moves A") {
    for (ControlMode mode : kModes) {
        const Equilibrium eq = solved(mode);
        const Eigen::MatrixXd a1 = state_matrix(eq.model, eq.x_star);
        StepRule half;
        half.factor = 0.5;
        const Eigen::MatrixXd a2 = state_matrix(eq.model, eq.x_star, {}, half);
        const double floor = 1e-9 * a1.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < a1.rows(); ++i) {
            for (Eigen::Index j = 0; j < a1.cols(); ++j) {
                CHECK(std::abs(a1(i, j) - a2(i, j)) <= 1e-4 * std::abs(a1(i, j)) + floor);
            }
        }
    }
}

TEST_CASE("eigenvalues of constructed matrices") {
    const double w = 7.5;
    Eigen::MatrixXd osc(2, 2);
    osc << 0, 1, -w * w, 0;
    const auto e = eigenvalues(osc);
    CHECK(std::abs(e[0] - Complex(0, w)) < 1e-12);
    CHECK(std::abs(e[1] - Complex(0, -w)) < 1e-12);

    Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(4, 4);
    diag.diagonal() << -3, 2, 0.5, -8;
    const auto d = eigenvalues(diag);
    const double want[] = {2, 0.5, -3, -8};
    for (int k = 0; k < 4; ++k) CHECK(d[static_cast<std::size_t>(k)] == Complex(want[k], 0));

    std::mt19937_64 rng(42);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(6, 6);
        std::vector<Complex> expect;
        for (int k = 0; k < 6; k += 2) {
            const double re = -1.0 - 3.0 * std::abs(g(rng)), im = 1.0 + 10.0 * std::abs(g(rng));
            lam.block(k, k, 2, 2) << re, im, -im, re;
            expect.push_back({re, im});
            expect.push_back({re, -im});
        }
        Eigen::MatrixXd q = Eigen::MatrixXd::Identity(6, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) q(i, j) += 0.3 * g(rng);
        const Eigen::MatrixXd a = q * lam * q.inverse();
        const auto got = eigenvalues(a);
        for (const Complex& x : expect) {
            double best = 1e9;
            for (const Complex& y : got) best = std::min(best, std::abs(x - y) / std::abs(x));
            CHECK(best < 1e-7);
        }
    }
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    bad(0, 1) = NAN;
    CHECK_THROWS_AS(eigenvalues(bad), NumericError);
}

TEST_CASE("linearized spectra are conjugate-closed") {
    for (ControlMode mode : kModes) {
        for (DelaySpec d : {DelaySpec{}, DelaySpec{DelayKind::FirstOrderPade, 150e-6}}) {
            const Equilibrium eq = solved(mode, d);
            const auto eigs = eigenvalues(state_matrix(eq.model, eq.x_star));
            CHECK(eigs.size() == eq.model.n_states());
            CHECK(conjugate_closed(eigs, 1e-9));
        }
    }
}

TEST_CASE("a stable default case") {
    const Equilibrium eq = solved(ControlMode::HybridDroop);
    for (const Complex& e : eigenvalues(state_matrix(eq.model, eq.x_star))) CHECK(e.real() < 0.0);
}

TEST_CASE("dominant mode selection") {
    const double w = kTwoPi * 38.8;
    const std::vector<Complex> a = {{-1, w}, {-1, -w}, {-50, 0}};
    ModeInfo m = dominant_mode(a);
    CHECK(m.sigma == -1.0);
    CHECK(m.freq == doctest::Approx(38.8));
    CHECK(m.damping_ratio == doctest::Approx(1.0 / std::hypot(1.0, w)));

    m = dominant_mode(std::vector<Complex>{{-5, 0}, {-1, 0}});
    CHECK(m.sigma == -1.0);
    CHECK(m.freq == 0.0);
    CHECK(m.damping_ratio == 1.0);

    m = dominant_mode(std::vector<Complex>{{-1, 10}, {-1, -10}, {-1, 20}, {-1, -20}});
    CHECK(m.eigenvalue.imag() == 20.0);

    // Slow pairs below 0.5 Hz count as real.
    m = dominant_mode(std::vector<Complex>{{0.2, 1.0}, {0.2, -1.0}, {-3, 40}, {-3, -40}});
    CHECK(m.sigma == -3.0);
    CHECK_THROWS_AS(dominant_mode(std::vector<Complex>{}), NumericError);
}

TEST_CASE("linear input/output channels") {
    const Equilibrium eq = solved(ControlMode::HybridPll);
    const std::array<InputId, 2> in{InputId::VcdRef, InputId::IlqRef};
    const std::array<OutputId, 3> out{OutputId::P, OutputId::Vcd, OutputId::Ilq};
    const LinearModel lin = linearize(eq, in, out);
    CHECK(lin.a.rows() == 11);
    CHECK(lin.b.cols() == 2);
    CHECK(lin.c.rows() == 3);
    CHECK(lin.d.cols() == 2);
    CHECK(lin.input_labels[1] == "i_lq_ref");
    CHECK(lin.output_labels[0] == "p");
    // v_cd is a state: C picks it and D is zero.
    CHECK(lin.c(1, 2) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(lin.d(1, 0)) < 1e-9);
    CHECK(lin.a.allFinite());
    // The q-current PI feeds i_lq directly from its reference.
    CHECK(lin.b(0 + 1, 1) == doctest::Approx(12.0 / 3.6e-3).epsilon(1e-6));
}

TEST_CASE("pole sweep bookkeeping") {
    const SystemParams s = default_system();
    const ControlMode mode = ControlMode::HybridDroop;
    // 0.005 p.u. is below R_g alone (0.33 ohm = 0.0124 p.u.): infeasible.
    const std::vector<double> zg = {0.3, 0.005, 0.4, 0.5};
    const PoleMap map = pole_sweep(mode, s, default_control(mode, s), OperatingTarget{}, zg);
    REQUIRE(map.points.size() == 4);
    CHECK(map.points[0].feasible);
    CHECK(!map.points[1].feasible);
    CHECK(!map.points[1].note.empty());
    CHECK(map.points[2].feasible);
    CHECK(map.points[3].feasible);
    for (const PoleMapPoint& p : map.points) {
        if (!p.feasible) continue;
        CHECK(p.scr == doctest::Approx(1.0 / p.zg_pu));
        CHECK(conjugate_closed(p.eigs, 1e-9));
        const double max_re = p.eigs.front().real();
        CHECK(p.stable == (max_re < 0.0));
        const ModeInfo dm = dominant_mode(p.eigs);
        if (std::abs(p.eigs.front().imag()) > kTwoPi * kOscillatoryThresholdHz) CHECK(p.stable == (dm.sigma < 0.0));
    }
    CHECK(linear_sweep(0.2, 0.9, 17).size() == 17);
    CHECK(linear_sweep(0.2, 0.9, 17).back() == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("complex-vector reduction") {
    const Complex y{0.3, -1.2}, g{0.0, 0.0};
    Eigen::Matrix2cd sym;
    sym << y, 0.0, 0.0, y;
    ComplexVectorPair p = complex_vector_reduce(sym);
    CHECK(p.plus == y);
    CHECK(p.minus == Complex(0.0, 0.0));

    const Complex gg{2.5, 0.0};
    Eigen::Matrix2cd gyr;
    gyr << 0.0, gg, -gg, 0.0;
    p = complex_vector_reduce(gyr);
    CHECK(std::abs(p.plus - Complex(0, -1) * gg) < 1e-15);
    CHECK(std::abs(p.minus) < 1e-15);
    (void)g;

    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    for (int k = 0; k < 100; ++k) {
        Eigen::Matrix2cd r;
        r << n(rng), n(rng), n(rng), n(rng);
        const ComplexVectorPair q = complex_vector_reduce(r);
        const Eigen::Matrix2cd back = complex_vector_expand(q, q);
        CHECK((back - r).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("complex-vector pair at mirrored frequencies recovers a frequency response") {
    const Equilibrium eq = solved(ControlMode::GfmDroop);
    const std::vector<double> f = {-37.0, 37.0};
    const AdmittanceResponse r = port_admittance(eq, f);
    const Eigen::Matrix2cd back = complex_vector_expand(r.points[1].y_pm, r.points[0].y_pm);
    CHECK((back - r.points[1].y_dq).cwiseAbs().maxCoeff() < 1e-12 * r.points[1].y_dq.cwiseAbs().maxCoeff());
}

TEST_CASE("signed log grid") {
    const auto g = signed_log_grid(0.1, 5000.0, 400);
    REQUIRE(g.size() == 800);
    CHECK(g.front() == doctest::Approx(-5000.0));
    CHECK(g.back() == doctest::Approx(5000.0));
    CHECK(g[399] == doctest::Approx(-0.1));
    CHECK(g[400] == doctest::Approx(0.1));
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK_THROWS_AS(signed_log_grid(0.0, 10.0, 5), ConfigError);
}

TEST_CASE("frozen-controller port is the passive LC network") {
    for (ControlMode mode : kModes) {
        const Equilibrium eq = solved(mode);
        const auto freqs = signed_log_grid(0.1, 5000.0, 40);
        const AdmittanceResponse r = port_admittance(eq, freqs, PortScanOptions{true});
        for (const AdmittancePoint& p : r.points) {
            const Eigen::Matrix2cd y = passive_port_admittance(eq.model.system(), eq.signals.omega_ctrl, p.freq);
            CHECK(!p.singular);
            CHECK((p.y_dq - y).cwiseAbs().maxCoeff() <= 1e-8 * y.cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("controlled port approaches the passive network at high frequency") {
    for (ControlMode mode : kModes) {
        const Equilibrium eq = solved(mode);
        const std::vector<double> freqs = {-5000.0, 5000.0, 8000.0};
        const AdmittanceResponse r = port_admittance(eq, freqs);
        const AdmittanceResponse frozen = port_admittance(eq, freqs, PortScanOptions{true});
        for (std::size_t k = 0; k < freqs.size(); ++k) {
            CAPTURE(to_string(mode));
            CAPTURE(freqs[k]);
            const double a = std::abs(r.points[k].y_pm.plus), b = std::abs(frozen.points[k].y_pm.plus);
            CHECK(std::abs(a - b) <= 0.05 * b);
        }
    }
}

TEST_CASE("admittance of a real-coefficient model is conjugate-symmetric in frequency") {
    for (ControlMode mode : kModes) {
        const Equilibrium eq = solved(mode);
        std::vector<double> freqs;
        for (int k = 0; k < 10; ++k) {
            const double f = 0.7 * std::pow(2.6, k);
            freqs.push_back(f);
            freqs.push_back(-f);
        }
        const AdmittanceResponse r = port_admittance(eq, freqs);
        for (std::size_t k = 0; k < freqs.size(); k += 2) {
            const Eigen::Matrix2cd& a = r.points[k].y_dq;
            const Eigen::Matrix2cd& b = r.points[k + 1].y_dq;
            CHECK((a - b.conjugate()).cwiseAbs().maxCoeff() <= 1e-9 * a.cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("norton and thevenin extractions match the closed forms") {
    for (DelaySpec d : {DelaySpec{}, DelaySpec{DelayKind::FirstOrderPade, 150e-6}}) {
        for (ControlMode mode : {ControlMode::GflPll, ControlMode::HybridDroop, ControlMode::HybridPll}) {
            const Equilibrium eq = solved(mode, d);
            for (int k = 0; k < 10; ++k) {
                const double f = std::pow(10.0, 3.0 * k / 9.0);
                const AxisEquivalents ax = axis_equivalents(eq.model.system(), eq.model.control(), f);
                CAPTURE(to_string(mode));
                CAPTURE(d.kind == DelayKind::None);
                CAPTURE(f);
                const NortonQ n = extract_norton_q(eq, f);
                CHECK(rel(n.gain, ax.norton_q.gain) < 1e-6);
                CHECK(rel(n.y_out, ax.norton_q.y_out) < 1e-6);
                if (has_d_voltage_loop(mode)) {
                    const TheveninD t = extract_thevenin_d(eq, f);
                    CHECK(rel(t.gain, ax.thevenin_d.gain) < 1e-6);
                    CHECK(rel(t.z_out, ax.thevenin_d.z_out) < 1e-6);
                }
            }
        }
    }
    CHECK_THROWS_AS(extract_norton_q(solved(ControlMode::GfmDroop), 10.0), ConfigError);
    CHECK_THROWS_AS(extract_thevenin_d(solved(ControlMode::GflPll), 10.0), ConfigError);
}
