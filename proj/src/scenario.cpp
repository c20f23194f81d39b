#include "invstab/scenario.hpp"

#include "invstab/csv.hpp"
#include "invstab/smallsignal.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace invstab {

namespace {

struct Entry {
    std::string value;
    int line = 0;
};

using Section = std::map<std::string, Entry>;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(v);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

const std::set<std::string> kTopKeys = {"name", "mode", "modes", "analysis"};
const std::set<std::string> kSystemKeys = {"f_g", "v_g", "v_dc", "c_dc", "l_f", "l_f_pu", "r_f", "r_f_pu",
                                           "c_f", "c_f_pu", "l_g", "l_g_pu", "r_g", "r_g_pu", "s_base",
                                           "scr", "z_g_pu"};
const std::vector<std::string> kGainKeys = {"kpv_d", "kiv_d", "kpv_q", "kiv_q", "kpi_d", "kii_d",
                                            "kpi_q", "kii_q", "m_p", "omega_f", "kp_pll", "ki_pll"};
const std::vector<std::string> kRefKeys = {"v_cd_ref", "i_ld_ref", "i_lq_ref", "p_ref"};
const std::set<std::string> kOperatingKeys = {"p_target", "p_target_pu", "q_target", "q_target_pu"};

std::set<std::string> control_keys() {
    std::set<std::string> k(kGainKeys.begin(), kGainKeys.end());
    for (const auto& r : kRefKeys) {
        k.insert(r);
        k.insert(r + "_pu");
    }
    k.insert("delay");
    k.insert("t_d");
    return k;
}

std::set<std::string> analysis_keys(AnalysisKind kind) {
    switch (kind) {
    case AnalysisKind::Equilibrium: return {};
    case AnalysisKind::Poles: return {"zg_values", "zg_start", "zg_stop", "zg_points"};
    case AnalysisKind::Admittance: return {"freqs", "f_min", "f_max", "points_per_sign", "freeze_controller"};
    case AnalysisKind::Simulate:
        return {"dt", "decimation", "pre_roll", "post_event", "event_scr", "metrics_signal"};
    }
    return {};
}

AnalysisKind parse_analysis(const Entry& e) {
    if (e.value == "equilibrium") return AnalysisKind::Equilibrium;
    if (e.value == "poles") return AnalysisKind::Poles;
    if (e.value == "admittance") return AnalysisKind::Admittance;
    if (e.value == "simulate") return AnalysisKind::Simulate;
    throw ParseError(e.line, "unknown analysis '" + e.value + "' (equilibrium, poles, admittance, simulate)");
}

class Reader {
public:
    explicit Reader(std::map<std::string, Section> s, int last_line) : sections_(std::move(s)), last_line_(last_line) {}

    const Section& section(const std::string& name) const {
        static const Section empty;
        const auto it = sections_.find(name);
        return it == sections_.end() ? empty : it->second;
    }

    const Entry* find(const std::string& sec, const std::string& key) const {
        const Section& s = section(sec);
        const auto it = s.find(key);
        return it == s.end() ? nullptr : &it->second;
    }

    void check_keys(const std::string& sec, const std::set<std::string>& allowed) const {
        for (const auto& [k, e] : section(sec)) {
            if (!allowed.count(k)) {
                const std::string where = sec.empty() ? "top level" : "[" + sec + "]";
                throw ParseError(e.line, "unknown key '" + k + "' in " + where);
            }
        }
    }

    static double number(const Entry& e, const std::string& key) {
        double v = 0.0;
        if (!parse_double(e.value, v) || !std::isfinite(v)) {
            throw ParseError(e.line, "malformed number for '" + key + "': '" + e.value + "'");
        }
        return v;
    }

    std::optional<double> number(const std::string& sec, const std::string& key) const {
        const Entry* e = find(sec, key);
        if (!e) return std::nullopt;
        return number(*e, key);
    }

    std::vector<double> numbers(const std::string& sec, const std::string& key) const {
        const Entry* e = find(sec, key);
        std::vector<double> out;
        for (const auto& tok : split_list(e->value)) out.push_back(number(Entry{tok, e->line}, key));
        if (out.empty()) throw ParseError(e->line, "'" + key + "' must list at least one value");
        return out;
    }

    /// SI key or its _pu twin, not both.
    std::optional<double> si_or_pu(const std::string& sec, const std::string& key, Quantity q, const Bases& b) const {
        const Entry* si = find(sec, key);
        const Entry* pu = find(sec, key + "_pu");
        if (si && pu) throw ParseError(pu->line, "'" + key + "' and '" + key + "_pu' are both set");
        if (si) return number(*si, key);
        if (pu) return from_pu(number(*pu, key + "_pu"), q, b);
        return std::nullopt;
    }

    int last_line() const { return last_line_; }

private:
    std::map<std::string, Section> sections_;
    int last_line_;
};

bool parse_bool(const Entry& e, const std::string& key) {
    if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
    if (e.value == "false" || e.value == "0" || e.value == "no") return false;
    throw ParseError(e.line, "'" + key + "' must be true or false");
}

int whole_number(const Entry& e, const std::string& key, int min) {
    const double v = Reader::number(e, key);
    if (v != std::floor(v) || v < min || v > 1e7) {
        throw ParseError(e.line, "'" + key + "' must be an integer >= " + std::to_string(min));
    }
    return static_cast<int>(v);
}

SystemParams resolve_system(const Reader& r) {
    r.check_keys("system", kSystemKeys);
    SystemParams s;
    auto set = [&](const char* key, double& field) {
        if (auto v = r.number("system", key)) field = *v;
    };
    set("f_g", s.f_g);
    set("v_g", s.v_g);
    set("v_dc", s.v_dc);
    set("c_dc", s.c_dc);
    set("s_base", s.s_base);
    if (!(s.f_g > 0.0) || !(s.v_g > 0.0) || !(s.s_base > 0.0)) {
        throw ConfigError("[system] f_g, v_g and s_base must be positive");
    }
    const Bases b = s.bases();
    if (auto v = r.si_or_pu("system", "l_f", Quantity::Inductance, b)) s.l_f = *v;
    if (auto v = r.si_or_pu("system", "r_f", Quantity::Impedance, b)) s.r_f = *v;
    if (auto v = r.si_or_pu("system", "c_f", Quantity::Capacitance, b)) s.c_f = *v;
    if (auto v = r.si_or_pu("system", "r_g", Quantity::Impedance, b)) s.r_g = *v;

    const Entry* line_spec = nullptr;
    for (const char* key : {"l_g", "l_g_pu", "scr", "z_g_pu"}) {
        const Entry* e = r.find("system", key);
        if (!e) continue;
        if (line_spec) throw ParseError(e->line, "the line is set twice (use one of l_g, l_g_pu, scr, z_g_pu)");
        line_spec = e;
        const double v = Reader::number(*e, key);
        try {
            const std::string k = key;
            if (k == "l_g") s.l_g = v;
            else if (k == "l_g_pu") s.l_g = from_pu(v, Quantity::Inductance, b);
            else if (k == "scr") s.l_g = scr_to_line(v, s.r_g, b).l_g;
            else s.l_g = scr_to_line(1.0 / v, s.r_g, b).l_g;
        } catch (const DomainError& err) {
            throw ParseError(e->line, err.what());
        }
    }
    if (!line_spec) s.l_g = scr_to_line(kDefaultScr, s.r_g, b).l_g;
    validate(s);
    return s;
}

}  // namespace

std::string_view to_string(AnalysisKind kind) {
    switch (kind) {
    case AnalysisKind::Equilibrium: return "equilibrium";
    case AnalysisKind::Poles: return "poles";
    case AnalysisKind::Admittance: return "admittance";
    case AnalysisKind::Simulate: return "simulate";
    }
    return "?";
}

SimConfig SimulateSpec::config() const {
    SimConfig c;
    c.dt = dt;
    c.t_end = pre_roll + post_event;
    c.record_decimation = record_decimation;
    if (event_scr) c.events.push_back({pre_roll, *event_scr});
    return c;
}

ControlParams Scenario::control_for(ControlMode mode) const {
    ControlParams c = default_control(mode, system);
    for (const auto& [key, v] : control_overrides) {
        if (key == "kpv_d") c.kpv_d = v;
        else if (key == "kiv_d") c.kiv_d = v;
        else if (key == "kpv_q") c.kpv_q = v;
        else if (key == "kiv_q") c.kiv_q = v;
        else if (key == "kpi_d") c.kpi_d = v;
        else if (key == "kii_d") c.kii_d = v;
        else if (key == "kpi_q") c.kpi_q = v;
        else if (key == "kii_q") c.kii_q = v;
        else if (key == "m_p") c.m_p = v;
        else if (key == "omega_f") c.omega_f = v;
        else if (key == "kp_pll") c.kp_pll = v;
        else if (key == "ki_pll") c.ki_pll = v;
        else if (key == "v_cd_ref") c.v_cd_ref = v;
        else if (key == "i_ld_ref") c.i_ld_ref = v;
        else if (key == "i_lq_ref") c.i_lq_ref = v;
        else if (key == "p_ref") c.p_ref = v;
    }
    if (delay_given) c.delay = delay;
    return c;
}

Scenario parse_scenario(const std::string& text) {
    std::map<std::string, Section> sections;
    static const std::set<std::string> kSections = {"system", "control", "operating", "analysis"};
    std::string current;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(line_no, "malformed section header '" + line + "'");
            current = trim(line.substr(1, line.size() - 2));
            if (!kSections.count(current)) throw ParseError(line_no, "unknown section [" + current + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, "missing key before '='");
        auto& sec = sections[current];
        const auto it = sec.find(key);
        if (it != sec.end()) {
            throw ParseError(line_no, "duplicate key '" + key + "' (first set on line " +
                                          std::to_string(it->second.line) + ")");
        }
        sec.emplace(key, Entry{value, line_no});
    }
    const Reader r(std::move(sections), std::max(line_no, 1));

    Scenario sc;
    r.check_keys("", kTopKeys);
    if (const Entry* e = r.find("", "name")) {
        const bool ok = !e->value.empty() && std::all_of(e->value.begin(), e->value.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
        });
        if (!ok) throw ParseError(e->line, "name must be a non-empty identifier ([A-Za-z0-9_-])");
        sc.name = e->value;
    }

    const Entry* mode = r.find("", "mode");
    const Entry* modes = r.find("", "modes");
    if (mode && modes) throw ParseError(modes->line, "'mode' and 'modes' are both set");
    if (!mode && !modes) throw ParseError(r.last_line(), "missing required key 'mode' (or 'modes')");
    try {
        if (mode) {
            sc.modes.push_back(parse_control_mode(mode->value));
        } else {
            for (const auto& tok : split_list(modes->value)) {
                const ControlMode m = parse_control_mode(tok);
                if (std::find(sc.modes.begin(), sc.modes.end(), m) != sc.modes.end()) {
                    throw ConfigError("mode '" + tok + "' listed twice");
                }
                sc.modes.push_back(m);
            }
            if (sc.modes.empty()) throw ConfigError("'modes' is empty");
        }
    } catch (const ParseError&) {
        throw;
    } catch (const ConfigError& err) {
        throw ParseError((mode ? mode : modes)->line, err.what());
    }

    const Entry* analysis = r.find("", "analysis");
    if (!analysis) throw ParseError(r.last_line(), "missing required key 'analysis'");
    sc.analysis = parse_analysis(*analysis);

    sc.system = resolve_system(r);
    const Bases b = sc.system.bases();

    r.check_keys("control", control_keys());
    for (const auto& k : kGainKeys) {
        if (auto v = r.number("control", k)) sc.control_overrides[k] = *v;
    }
    for (const auto& k : kRefKeys) {
        const Quantity q = k == "v_cd_ref" ? Quantity::Voltage : k == "p_ref" ? Quantity::Power : Quantity::Current;
        if (auto v = r.si_or_pu("control", k, q, b)) sc.control_overrides[k] = *v;
    }
    if (const Entry* e = r.find("control", "delay")) {
        sc.delay_given = true;
        if (e->value == "none") sc.delay.kind = DelayKind::None;
        else if (e->value == "pade") sc.delay.kind = DelayKind::FirstOrderPade;
        else throw ParseError(e->line, "delay must be 'none' or 'pade'");
    }
    if (const Entry* e = r.find("control", "t_d")) {
        sc.delay_given = true;
        sc.delay.t_d = Reader::number(*e, "t_d");
        if (sc.delay.t_d < 0.0) throw ParseError(e->line, "t_d must be >= 0");
        if (!r.find("control", "delay") && sc.delay.t_d > 0.0) sc.delay.kind = DelayKind::FirstOrderPade;
    }

    r.check_keys("operating", kOperatingKeys);
    if (auto v = r.si_or_pu("operating", "p_target", Quantity::Power, b)) sc.operating.p_target = *v;
    if (auto v = r.si_or_pu("operating", "q_target", Quantity::Power, b)) sc.operating.q_target = *v;

    r.check_keys("analysis", analysis_keys(sc.analysis));
    switch (sc.analysis) {
    case AnalysisKind::Equilibrium: break;
    case AnalysisKind::Poles: {
        const bool list = r.find("analysis", "zg_values") != nullptr;
        const bool range = r.find("analysis", "zg_start") || r.find("analysis", "zg_stop") ||
                           r.find("analysis", "zg_points");
        if (list && range) {
            throw ParseError(r.find("analysis", "zg_values")->line, "use either zg_values or zg_start/zg_stop/zg_points");
        }
        if (list) {
            sc.poles.zg_values = r.numbers("analysis", "zg_values");
        } else {
            for (const char* k : {"zg_start", "zg_stop", "zg_points"}) {
                if (!r.find("analysis", k)) throw ParseError(r.last_line(), std::string("missing required key '") + k + "'");
            }
            const int n = whole_number(*r.find("analysis", "zg_points"), "zg_points", 1);
            sc.poles.zg_values = linear_sweep(*r.number("analysis", "zg_start"), *r.number("analysis", "zg_stop"),
                                              static_cast<std::size_t>(n));
        }
        for (double z : sc.poles.zg_values) {
            if (!(z > 0.0)) throw ParseError(r.last_line(), "sweep values must be positive per-unit impedances");
        }
        break;
    }
    case AnalysisKind::Admittance: {
        if (const Entry* e = r.find("analysis", "freeze_controller")) {
            sc.admittance.freeze_controller = parse_bool(*e, "freeze_controller");
        }
        const bool list = r.find("analysis", "freqs") != nullptr;
        const bool grid = r.find("analysis", "f_min") || r.find("analysis", "f_max") ||
                          r.find("analysis", "points_per_sign");
        if (list && grid) throw ParseError(r.find("analysis", "freqs")->line, "use either freqs or f_min/f_max/points_per_sign");
        if (list) {
            sc.admittance.freqs = r.numbers("analysis", "freqs");
        } else {
            const double f_min = r.number("analysis", "f_min").value_or(0.1);
            const double f_max = r.number("analysis", "f_max").value_or(5000.0);
            int n = 400;
            if (const Entry* e = r.find("analysis", "points_per_sign")) n = whole_number(*e, "points_per_sign", 2);
            try {
                sc.admittance.freqs = signed_log_grid(f_min, f_max, static_cast<std::size_t>(n));
            } catch (const ConfigError& err) {
                throw ParseError(r.last_line(), err.what());
            }
        }
        break;
    }
    case AnalysisKind::Simulate: {
        SimulateSpec& s = sc.simulate;
        if (auto v = r.number("analysis", "dt")) s.dt = *v;
        if (const Entry* e = r.find("analysis", "decimation")) s.record_decimation = whole_number(*e, "decimation", 1);
        if (auto v = r.number("analysis", "pre_roll")) s.pre_roll = *v;
        if (auto v = r.number("analysis", "post_event")) s.post_event = *v;
        if (auto v = r.number("analysis", "event_scr")) s.event_scr = *v;
        if (const Entry* e = r.find("analysis", "metrics_signal")) s.metrics_signal = e->value;
        try {
            validate(s.config());
        } catch (const ConfigError& err) {
            throw ParseError(r.last_line(), err.what());
        }
        if (s.event_scr) {
            try {
                scr_to_line(*s.event_scr, sc.system.r_g, b);
            } catch (const DomainError& err) {
                throw ParseError(r.find("analysis", "event_scr")->line, err.what());
            }
        }
        break;
    }
    }
    return sc;
}

std::string render_scenario(const Scenario& sc, ControlMode mode) {
    std::ostringstream o;
    auto kv = [&o](std::string_view k, double v) { o << k << " = " << format_double(v) << '\n'; };
    auto list = [&o](std::string_view k, const std::vector<double>& v) {
        o << k << " =";
        for (std::size_t i = 0; i < v.size(); ++i) o << (i ? ", " : " ") << format_double(v[i]);
        o << '\n';
    };
    o << "name = " << sc.name << '\n';
    o << "mode = " << to_string(mode) << '\n';
    o << "analysis = " << to_string(sc.analysis) << "\n\n";

    const SystemParams& s = sc.system;
    o << "[system]\n";
    kv("f_g", s.f_g);
    kv("v_g", s.v_g);
    kv("v_dc", s.v_dc);
    kv("c_dc", s.c_dc);
    kv("s_base", s.s_base);
    kv("l_f", s.l_f);
    kv("r_f", s.r_f);
    kv("c_f", s.c_f);
    kv("r_g", s.r_g);
    kv("l_g", s.l_g);

    const ControlParams c = sc.control_for(mode);
    o << "\n[control]\n";
    const std::pair<const char*, double> gains[] = {
        {"kpv_d", c.kpv_d}, {"kiv_d", c.kiv_d}, {"kpv_q", c.kpv_q}, {"kiv_q", c.kiv_q},
        {"kpi_d", c.kpi_d}, {"kii_d", c.kii_d}, {"kpi_q", c.kpi_q}, {"kii_q", c.kii_q},
        {"m_p", c.m_p}, {"omega_f", c.omega_f}, {"kp_pll", c.kp_pll}, {"ki_pll", c.ki_pll},
        {"v_cd_ref", c.v_cd_ref}, {"i_ld_ref", c.i_ld_ref}, {"i_lq_ref", c.i_lq_ref}, {"p_ref", c.p_ref}};
    for (const auto& [k, v] : gains) {
        if (std::isfinite(v)) kv(k, v);
    }
    o << "delay = " << (c.delay.kind == DelayKind::FirstOrderPade ? "pade" : "none") << '\n';
    kv("t_d", c.delay.t_d);

    o << "\n[operating]\n";
    kv("p_target", sc.operating.p_target);
    kv("q_target", sc.operating.q_target);

    o << "\n[analysis]\n";
    switch (sc.analysis) {
    case AnalysisKind::Equilibrium: break;
    case AnalysisKind::Poles: list("zg_values", sc.poles.zg_values); break;
    case AnalysisKind::Admittance:
        list("freqs", sc.admittance.freqs);
        o << "freeze_controller = " << (sc.admittance.freeze_controller ? "true" : "false") << '\n';
        break;
    case AnalysisKind::Simulate:
        kv("dt", sc.simulate.dt);
        o << "decimation = " << sc.simulate.record_decimation << '\n';
        kv("pre_roll", sc.simulate.pre_roll);
        kv("post_event", sc.simulate.post_event);
        if (sc.simulate.event_scr) kv("event_scr", *sc.simulate.event_scr);
        o << "metrics_signal = " << sc.simulate.metrics_signal << '\n';
        break;
    }
    return o.str();
}

}  // namespace invstab
