#include "invstab/csv.hpp"
#include "invstab/scenario.hpp"

#include <doctest.h>

#include <cmath>

using namespace invstab;

namespace {

double num(std::string_view s) {
    double v = 0.0;
    REQUIRE(parse_double(s, v));
    return v;
}

int parse_error_line(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

}  // namespace

TEST_CASE("minimal scenario takes every default") {
    const Scenario sc = parse_scenario("mode = hybrid_pll\nanalysis = equilibrium\n");
    REQUIRE(sc.modes.size() == 1);
    CHECK(sc.modes[0] == ControlMode::HybridPll);
    CHECK(sc.analysis == AnalysisKind::Equilibrium);
    const SystemParams d = default_system();
    CHECK(sc.system.l_g == d.l_g);
    CHECK(sc.system.l_f == d.l_f);
    CHECK(sc.system.r_g == d.r_g);
    const ControlParams c = sc.control_for(ControlMode::HybridPll);
    const ControlParams dc = default_control(ControlMode::HybridPll, d);
    CHECK(c.kpi_q == dc.kpi_q);
    CHECK(c.kp_pll == dc.kp_pll);
    CHECK(c.v_cd_ref == dc.v_cd_ref);
    CHECK(sc.operating.p_target == 750.0);
}

TEST_CASE("duplicate keys are rejected") {
    const std::string text = "mode = gfl_pll\nanalysis = equilibrium\n[system]\nscr = 1.4\nscr = 1.2\n";
    CHECK(parse_error_line(text) == 5);
    CHECK_THROWS_WITH_AS(parse_scenario(text), doctest::Contains("duplicate"), ParseError);
}

TEST_CASE("current PI gains round-trip exactly") {
    const Scenario sc = parse_scenario("mode = gfm_droop\nanalysis = equilibrium\n[control]\nkpi_q = 12\nkii_q = 5\n");
    const ControlParams c = sc.control_for(ControlMode::GfmDroop);
    CHECK(c.kpi_q == 12.0);
    CHECK(c.kii_q == 5.0);
}

TEST_CASE("errors carry the line number") {
    CHECK(parse_error_line("mode = gfl_pll\n\n[system]\nbogus = 3\n") == 4);
    CHECK(parse_error_line("mode = gfl_pll\n[control]\nkpi_q = 1x2\n") == 3);
    CHECK(parse_error_line("mode = warp_drive\n") == 1);
    CHECK(parse_error_line("mode = gfl_pll\n[nowhere]\n") == 2);
    CHECK(parse_error_line("mode = gfl_pll\njust some words\n") == 2);
    CHECK(parse_error_line("mode = gfl_pll\n[system]\nscr = 1.4\nl_g = 0.01\n") > 0);
    CHECK(parse_error_line("[system]\nscr = 1.4\n") > 0);
}

TEST_CASE("admittance frequency lists") {
    CHECK(parse_error_line("mode = gfl_pll\nanalysis = admittance\n[analysis]\nfreqs =\n") == 4);
    Scenario sc = parse_scenario("mode = gfl_pll\nanalysis = admittance\n[analysis]\nfreqs = -1, 1, 10\n");
    CHECK(sc.admittance.freqs == std::vector<double>{-1.0, 1.0, 10.0});
    sc = parse_scenario("mode = gfl_pll\nanalysis = admittance\n");
    CHECK(sc.admittance.freqs.size() == 800);
    CHECK(!sc.admittance.freeze_controller);
}

TEST_CASE("per-unit twins and comments") {
    const Scenario sc = parse_scenario(
        "name = twin  # trailing comment\n"
        "modes = gfm_droop, hybrid_droop\n"
        "analysis = poles\n"
        "# whole-line comment\n"
        "[system]\n"
        "z_g_pu = 0.5\n"
        "[operating]\n"
        "p_target_pu = 0.25\n"
        "[analysis]\n"
        "zg_start = 0.2\nzg_stop = 0.14\nzg_points = 4\n");
    CHECK(sc.name == "twin");
    CHECK(sc.modes.size() == 2);
    CHECK(sc.operating.p_target == doctest::Approx(375.0).epsilon(1e-15));
    CHECK(line_to_scr(sc.system.l_g, sc.system.r_g, sc.system.bases()) == doctest::Approx(2.0).epsilon(1e-12));
    REQUIRE(sc.poles.zg_values.size() == 4);
    CHECK(sc.poles.zg_values.front() == 0.2);
    CHECK(sc.poles.zg_values.back() == doctest::Approx(0.14).epsilon(1e-15));
}

TEST_CASE("simulate settings") {
    const Scenario sc = parse_scenario(
        "mode = gfl_pll\nanalysis = simulate\n[analysis]\npre_roll = 1\npost_event = 3\nevent_scr = 1.2\n");
    const SimConfig cfg = sc.simulate.config();
    CHECK(cfg.t_end == 4.0);
    REQUIRE(cfg.events.size() == 1);
    CHECK(cfg.events[0].time == 1.0);
    CHECK(cfg.events[0].scr == 1.2);
    CHECK(parse_error_line("mode = gfl_pll\nanalysis = simulate\n[analysis]\ndt = 3e-5\npre_roll = 1.00001\nevent_scr = 1.2\n") > 0);
}

TEST_CASE("rendered scenario parses back to the same parameters") {
    const Scenario sc = parse_scenario(
        "name = rt\nmode = hybrid_pll\nanalysis = admittance\n[system]\nscr = 3.3\nl_f = 3.1e-3\n"
        "[control]\nkpv_d = 0.2\ndelay = pade\nt_d = 1.5e-4\n[operating]\np_target = 600\n"
        "[analysis]\nfreqs = 1, 2\n");
    const std::string text = render_scenario(sc, ControlMode::HybridPll);
    const Scenario back = parse_scenario(text);
    CHECK(render_scenario(back, ControlMode::HybridPll) == text);
    CHECK(back.system.l_g == sc.system.l_g);
    CHECK(back.system.l_f == 3.1e-3);
    const ControlParams a = sc.control_for(ControlMode::HybridPll), b = back.control_for(ControlMode::HybridPll);
    CHECK(b.kpv_d == a.kpv_d);
    CHECK(b.delay.kind == DelayKind::FirstOrderPade);
    CHECK(b.delay.t_d == 1.5e-4);
    CHECK(back.operating.p_target == 600.0);
    CHECK(back.admittance.freqs == sc.admittance.freqs);
}

TEST_CASE("csv formatting") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(-2.0) == "-2");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(num(" +1.5e3 ") == 1500.0);
    CHECK(num(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CsvTable t({"a", "b"});
    t.cell(1.0).cell(std::string_view("x,y"));
    t.end_row();
    t.cell(2LL);
    t.end_row();
    CHECK(t.text() == "a,b\n1,\"x,y\"\n2,\n");
    const CsvData d = read_csv(t.text());
    CHECK(d.header == std::vector<std::string>{"a", "b"});
    CHECK(d.rows[0][1] == "x,y");
}
