#include "invstab/control_blocks.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace invstab;

TEST_CASE("park of aligned and quadrature sets") {
    const Dq a = park(1.0, -0.5, -0.5, 0.0);
    CHECK(a.d == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(a.q) < 1e-15);

    // Phase set lagging the frame by pi/2.
    const double amp = 163.3, theta = 0.37;
    const double ph = theta - std::numbers::pi / 2.0;
    const Dq b = park(amp * std::cos(ph), amp * std::cos(ph - kTwoPi / 3.0), amp * std::cos(ph + kTwoPi / 3.0), theta);
    CHECK(std::abs(b.d) < 1e-12);
    CHECK(b.q == doctest::Approx(-amp).epsilon(1e-14));
}

TEST_CASE("park round trip over random inputs") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-200.0, 200.0), th(-10.0, 10.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double a = u(rng), b = u(rng), c = u(rng), t = th(rng);
        const auto back = inverse_park(park(a, b, c, t), t);
        worst = std::max({worst, std::abs(back[0] - a), std::abs(back[1] - b), std::abs(back[2] - c)});
    }
    // 1e-13 relative to the 200 V input range.
    CHECK(worst < 1e-13 * 200.0);
}

TEST_CASE("balanced set tracked by the frame gives constant dq") {
    const double amp = 10.0, w = kTwoPi * 50.0, phi = 0.3;
    const Dq ref = park(amp * std::cos(phi), amp * std::cos(phi - kTwoPi / 3.0), amp * std::cos(phi + kTwoPi / 3.0), 0.0);
    double ripple = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double t = k * 1e-4, th = w * t;
        const Dq x = park(amp * std::cos(th + phi), amp * std::cos(th + phi - kTwoPi / 3.0),
                          amp * std::cos(th + phi + kTwoPi / 3.0), th);
        ripple = std::max({ripple, std::abs(x.d - ref.d), std::abs(x.q - ref.q)});
    }
    CHECK(ripple < 1e-12 * amp * 10.0);
}

TEST_CASE("pi block") {
    BlockOutput o = pi_eval({12.0, 5.0}, 0.0, 1.0);
    CHECK(o.y == 12.0);
    CHECK(o.dx_dt == 1.0);
    o = pi_eval({12.0, 5.0}, 0.4, 0.0);
    CHECK(o.y == 5.0 * 0.4);
    CHECK(o.dx_dt == 0.0);
    CHECK(pi_eval({0.1, 10.0}, 0.2, 0.5).y == doctest::Approx(2.05).epsilon(1e-15));
}

TEST_CASE("low-pass filter") {
    CHECK(lpf_eval(kTwoPi, 3.0, 3.0) == 0.0);
    CHECK(lpf_eval(kTwoPi, 0.0, 1.0) == doctest::Approx(kTwoPi));
    // Exact-in-time integration of the step response to t = 1/omega_f.
    const double wf = kTwoPi, dt = 1e-5;
    double x = 0.0;
    const int n = static_cast<int>(std::round(1.0 / wf / dt));
    for (int k = 0; k < n; ++k) {
        const double k1 = lpf_eval(wf, x, 1.0), k2 = lpf_eval(wf, x + 0.5 * dt * k1, 1.0);
        const double k3 = lpf_eval(wf, x + 0.5 * dt * k2, 1.0), k4 = lpf_eval(wf, x + dt * k3, 1.0);
        x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    CHECK(x == doctest::Approx(1.0 - std::exp(-wf * n * dt)).epsilon(1e-10));
    CHECK(x == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-4));
}

TEST_CASE("pll block") {
    const double w0 = kTwoPi * 50.0;
    CHECK(pll_eval(w0, 0.5, 12.0, 0.0, 0.0).y == w0);
    CHECK(pll_eval(w0, 0.5, 12.0, 0.0, 1.0).y == doctest::Approx(w0 + 0.5));
    double xi = 0.0;
    for (int k = 0; k < 10; ++k) xi += 1e-3 * pll_eval(w0, 0.5, 12.0, xi, 2e-3).dx_dt;
    CHECK(xi == doctest::Approx(10 * 1e-3 * 2e-3));
}

TEST_CASE("droop block") {
    const double w0 = kTwoPi * 50.0, mp = kTwoPi * 2.5e-5;
    CHECK(droop_eval(mp, w0, 750.0, 750.0) == w0);
    CHECK((droop_eval(mp, w0, 1500.0, 0.0) - w0) / kTwoPi == doctest::Approx(0.0375));
    CHECK(droop_eval(0.0, w0, 1500.0, -12.0) == w0);
}

TEST_CASE("delay block") {
    CHECK(delay_eval({}, 0.0, 5.0).y == 5.0);
    const DelaySpec pade{DelayKind::FirstOrderPade, 150e-6};
    const BlockOutput ss = delay_eval(pade, 3.0, 3.0);
    CHECK(ss.y == 3.0);
    CHECK(ss.dx_dt == 0.0);
    const double phase = std::arg(delay_tf(pade, Complex{0.0, kTwoPi * 1000.0})) * 180.0 / std::numbers::pi;
    CHECK(phase == doctest::Approx(-2.0 * std::atan(kTwoPi * 1000.0 * 75e-6) * 180.0 / std::numbers::pi));
    CHECK(phase == doctest::Approx(-50.5).epsilon(0.01));
    // The pure delay it approximates sits at -w t_d = -54 deg.
    CHECK(std::abs(phase + 54.0) < 4.0);
    CHECK(std::abs(delay_tf(pade, Complex{0.0, 123.0})) == doctest::Approx(1.0));
    const DelaySpec zero{DelayKind::FirstOrderPade, 0.0};
    CHECK(!zero.active());
    CHECK(delay_eval(zero, 9.0, 2.0).y == 2.0);
}

TEST_CASE("block functions are pure") {
    for (int k = 0; k < 3; ++k) {
        CHECK(pi_eval({0.1, 10.0}, 0.123, 0.456).y == pi_eval({0.1, 10.0}, 0.123, 0.456).y);
        CHECK(pll_eval(1.0, 0.5, 12.0, 0.3, 0.7).y == pll_eval(1.0, 0.5, 12.0, 0.3, 0.7).y);
    }
}

TEST_CASE("norton equivalent against direct complex arithmetic") {
    SystemParams sys = default_system();
    const ControlParams c = default_control(ControlMode::HybridPll, sys);
    const AxisEquivalents eq = axis_equivalents(sys, c, 100.0);
    const Complex s{0.0, kTwoPi * 100.0};
    const Complex z = 12.0 + 5.0 / s;
    const Complex den = z + s * 3.6e-3 + 0.08;
    CHECK(std::abs(eq.norton_q.gain - z / den) < 1e-14);
    CHECK(std::abs(eq.norton_q.y_out - 1.0 / den) < 1e-14);
}

TEST_CASE("axis equivalents near dc") {
    const SystemParams sys = default_system();
    const ControlParams c = default_control(ControlMode::HybridPll, sys);
    const AxisEquivalents lim = axis_equivalents(sys, c, 0.0);
    CHECK(lim.norton_q.gain == Complex{1.0, 0.0});
    CHECK(lim.norton_q.y_out == Complex{0.0, 0.0});
    CHECK(lim.thevenin_d.gain == Complex{1.0, 0.0});
    CHECK(lim.thevenin_d.z_out == Complex{0.0, 0.0});
    const AxisEquivalents near = axis_equivalents(sys, c, 1e-6);
    CHECK(std::abs(near.norton_q.gain) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(near.norton_q.y_out) == doctest::Approx(kTwoPi * 1e-6 / 5.0).epsilon(1e-3));
    CHECK(std::abs(near.thevenin_d.gain) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(near.thevenin_d.z_out) < 1e-6);
}

TEST_CASE("thevenin equivalent satisfies the dual-loop law") {
    // v_i = Z_i (Z_v (v* - v) - i_l), i_l = i_g + sC v, v_i = v + Z_L i_l.
    const SystemParams sys = default_system();
    const ControlParams c = default_control(ControlMode::HybridDroop, sys);
    for (double f : {0.3, 3.0, 30.0, 300.0, 3000.0, -45.0}) {
        const TheveninD th = axis_equivalents(sys, c, f).thevenin_d;
        const Complex s{0.0, kTwoPi * f};
        const Complex zi = 12.0 + 5.0 / s, zv = 0.1 + 10.0 / s, zl = s * sys.l_f + sys.r_f;
        const Complex vref = {0.7, -0.2}, ig = {1.3, 0.4};
        const Complex v = th.gain * vref - th.z_out * ig;
        const Complex il = ig + s * sys.c_f * v;
        const Complex lhs = v + zl * il;
        const Complex rhs = zi * (zv * (vref - v) - il);
        CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(rhs));
    }
}
