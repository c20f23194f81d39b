#include "invstab/commands.hpp"

#include "invstab/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <sstream>

namespace invstab {

namespace {

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + p.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw ConfigError("write failed for '" + p.string() + "'");
}

std::string stem(const Scenario& sc, ControlMode mode) { return sc.name + "_" + std::string(to_string(mode)); }

/// Named columns of an earlier equilibrium CSV.
std::map<std::string, double> read_guess(const std::filesystem::path& p) {
    const CsvData d = read_csv(read_text(p));
    if (d.rows.size() != 1 || d.rows[0].size() != d.header.size()) {
        throw ConfigError("guess file '" + p.string() + "' is not a one-row equilibrium CSV");
    }
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < d.header.size(); ++i) {
        double v = 0.0;
        if (parse_double(d.rows[0][i], v)) out[d.header[i]] = v;
    }
    return out;
}

double signal_scale(const NonlinearModel& m, const std::string& name) {
    const auto& labels = m.state_labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == name) return m.state_scales()[i];
    }
    if (name == "p" || name == "q") return m.system().s_base;
    if (name == "omega") return m.system().omega_g();
    if (name == "freq_hz") return m.system().f_g;
    throw ConfigError("unknown metrics signal '" + name + "'");
}

/// Post-window deviation limit that keeps the fit in the small-signal regime.
inline constexpr double kLinearRegimePu = 0.2;

std::string metrics_csv(const Scenario& sc, const NonlinearModel& m, const SimTrace& tr, const SimulateSpec& spec) {
    CsvTable t({"signal", "status", "t0_s", "t1_s", "oscillating", "freq_hz", "sigma_per_s", "amplitude",
                "divergence_time_s", "eig_freq_hz", "eig_sigma_per_s", "eig_max_re_per_s"});
    const std::vector<double> y = trace_signal(tr, spec.metrics_signal);
    const double scale = signal_scale(m, spec.metrics_signal);
    const double t0 = spec.pre_roll;
    const auto first = static_cast<std::size_t>(std::lower_bound(tr.times.begin(), tr.times.end(), t0 - 1e-12) -
                                                tr.times.begin());

    // Linearized dominant mode at the post-event operating point.
    std::optional<double> y_post;
    double eig_f = NAN, eig_s = NAN, eig_max = NAN;
    try {
        SystemParams s = m.system();
        if (spec.event_scr) s.l_g = scr_to_line(*spec.event_scr, s.r_g, s.bases()).l_g;
        const NonlinearModel post = assemble(m.mode(), s, m.control());
        const Equilibrium eq = solve(post, sc.operating);
        const std::vector<Complex> eigs = eigenvalues(state_matrix(eq.model, eq.x_star));
        const ModeInfo mi = dominant_mode(eigs);
        eig_f = mi.freq;
        eig_s = mi.sigma;
        eig_max = eigs.front().real();
        SimTrace probe;
        probe.state_labels = eq.model.state_labels();
        probe.states.push_back(eq.x_star);
        probe.signals.push_back(eq.signals);
        y_post = trace_signal(probe, spec.metrics_signal).front();
    } catch (const NumericError&) {
    }

    double t1 = tr.times.empty() ? t0 : tr.times.back();
    if (first < y.size()) {
        const double ref = y_post.value_or(y[first]);
        for (std::size_t i = first; i < y.size(); ++i) {
            if (std::abs(y[i] - ref) > kLinearRegimePu * scale) {
                t1 = tr.times[i];
                break;
            }
        }
    }

    std::string status = tr.diverged ? "diverged" : "settled";
    OscillationMetrics om;
    bool have = false;
    if (first < y.size() && t1 - t0 >= kMinMetricsWindow) {
        om = oscillation_metrics(tr.times, y, t0, t1);
        have = true;
        if (!om.oscillating && !tr.diverged) status = "no_oscillation";
    } else if (!tr.diverged) {
        status = "window_too_short";
    }

    t.cell(spec.metrics_signal).cell(status);
    if (have) {
        t.cell(om.t0).cell(om.t1).cell(static_cast<long long>(om.oscillating)).cell(om.freq).cell(om.sigma).cell(om.amplitude);
    } else {
        t.cell(t0).cell(t1).cell(0LL).cell("").cell("").cell("");
    }
    if (tr.diverged) t.cell(tr.divergence_time);
    else t.cell("");
    if (std::isfinite(eig_f)) t.cell(eig_f).cell(eig_s).cell(eig_max);
    else t.cell("").cell("").cell("");
    t.end_row();
    return t.text();
}

}  // namespace

std::string equilibrium_csv(const Equilibrium& eq) {
    std::vector<std::string> header = eq.model.state_labels();
    for (const char* k : {"v_cd_ref", "i_ld_ref", "i_lq_ref", "p_ref", "p_w", "q_var", "omega_rad_s", "v_id", "v_iq",
                          "residual_inf"}) {
        header.emplace_back(k);
    }
    CsvTable t(header);
    for (double v : eq.x_star) t.cell(v);
    const References r = eq.model.references();
    const SignalSet& s = eq.signals;
    t.cell(r.v_cd_ref).cell(r.i_ld_ref).cell(r.i_lq_ref).cell(r.p_ref);
    t.cell(s.p).cell(s.q).cell(s.omega_ctrl).cell(s.v_i.d).cell(s.v_i.q).cell(eq.residual_inf);
    t.end_row();
    return t.text();
}

std::string poles_csv(const PoleMap& map) {
    CsvTable t({"zg_pu", "scr", "eig_index", "re_rad_s", "im_rad_s", "freq_hz", "stable_flag"});
    for (const PoleMapPoint& p : map.points) {
        if (!p.feasible) {
            t.cell(p.zg_pu).cell(p.scr).cell("").cell("").cell("").cell("").cell("infeasible");
            t.end_row();
            continue;
        }
        for (std::size_t k = 0; k < p.eigs.size(); ++k) {
            const Complex e = p.eigs[k];
            t.cell(p.zg_pu).cell(p.scr).cell(static_cast<long long>(k)).cell(e.real()).cell(e.imag());
            t.cell(std::abs(e.imag()) / kTwoPi).cell(static_cast<long long>(p.stable));
            t.end_row();
        }
    }
    return t.text();
}

std::string admittance_csv(const AdmittanceResponse& resp) {
    CsvTable t({"freq_hz", "re_ydd", "im_ydd", "re_ydq", "im_ydq", "re_yqd", "im_yqd", "re_yqq", "im_yqq",
                "abs_yp", "abs_ym", "abs_yp_pu", "abs_ym_pu", "flag"});
    for (const AdmittancePoint& p : resp.points) {
        t.cell(p.freq);
        if (p.singular) {
            for (int i = 0; i < 12; ++i) t.cell("");
            t.cell("singular");
        } else {
            for (const auto& [r, c] : {std::pair{0, 0}, {0, 1}, {1, 0}, {1, 1}}) {
                t.cell(p.y_dq(r, c).real()).cell(p.y_dq(r, c).imag());
            }
            t.cell(std::abs(p.y_pm.plus)).cell(std::abs(p.y_pm.minus));
            t.cell(std::abs(p.y_pm.plus) * resp.z_base).cell(std::abs(p.y_pm.minus) * resp.z_base);
            t.cell("ok");
        }
        t.end_row();
    }
    return t.text();
}

std::string trace_csv(const SimTrace& trace) {
    std::vector<std::string> header{"t_s"};
    header.insert(header.end(), trace.state_labels.begin(), trace.state_labels.end());
    header.emplace_back("p_w");
    header.emplace_back("q_var");
    header.emplace_back("freq_hz");
    CsvTable t(header);
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        t.cell(trace.times[i]);
        for (double v : trace.states[i]) t.cell(v);
        const SignalSet& s = trace.signals[i];
        t.cell(s.p).cell(s.q).cell(s.omega_ctrl / kTwoPi);
        t.end_row();
    }
    return t.text();
}

ModeArtifacts run_mode(const Scenario& sc, ControlMode mode, const RunOptions& opts) {
    ModeArtifacts art;
    art.mode = mode;
    const std::string base = stem(sc, mode);
    ControlParams ctrl = sc.control_for(mode);

    switch (sc.analysis) {
    case AnalysisKind::Equilibrium: {
        std::optional<std::vector<double>> guess;
        if (opts.guess) {
            const auto cols = read_guess(*opts.guess);
            const NonlinearModel probe = assemble(mode, sc.system, ctrl);
            std::vector<double> x;
            for (const auto& label : probe.state_labels()) {
                const auto it = cols.find(label);
                if (it == cols.end()) throw ConfigError("guess file lacks state column '" + label + "'");
                x.push_back(it->second);
            }
            if (mode == ControlMode::GflPll) {
                if (cols.count("i_ld_ref")) ctrl.i_ld_ref = cols.at("i_ld_ref");
                if (cols.count("i_lq_ref")) ctrl.i_lq_ref = cols.at("i_lq_ref");
            }
            guess = std::move(x);
        }
        const NonlinearModel m = assemble(mode, sc.system, ctrl);
        const Equilibrium eq = guess ? solve(m, sc.operating, std::span<const double>(*guess)) : solve(m, sc.operating);
        art.files.emplace_back(base + "_equilibrium.csv", equilibrium_csv(eq));
        art.log.push_back("equilibrium residual " + format_double(eq.residual_inf));
        break;
    }
    case AnalysisKind::Poles: {
        const PoleMap map = pole_sweep(mode, sc.system, ctrl, sc.operating, sc.poles.zg_values);
        std::size_t stable = 0, feasible = 0;
        for (const auto& p : map.points) {
            feasible += p.feasible;
            stable += p.feasible && p.stable;
        }
        art.files.emplace_back(base + "_poles.csv", poles_csv(map));
        art.log.push_back(std::to_string(map.points.size()) + " sweep points, " + std::to_string(feasible) +
                          " feasible, " + std::to_string(stable) + " stable");
        break;
    }
    case AnalysisKind::Admittance: {
        const AdmittanceResponse resp = port_admittance(mode, sc.system, ctrl, sc.operating, sc.admittance.freqs,
                                                        PortScanOptions{sc.admittance.freeze_controller});
        art.files.emplace_back(base + "_admittance.csv", admittance_csv(resp));
        art.log.push_back(std::to_string(resp.points.size()) + " frequency points");
        break;
    }
    case AnalysisKind::Simulate: {
        SimulateSpec spec = sc.simulate;
        if (opts.pre_roll) spec.pre_roll = *opts.pre_roll;
        const SimConfig cfg = spec.config();
        validate(cfg);
        const NonlinearModel m = assemble(mode, sc.system, ctrl);
        const Equilibrium eq = solve(m, sc.operating);
        const SimTrace tr = simulate(eq.model, eq.x_star, cfg);
        art.files.emplace_back(base + "_trace.csv", trace_csv(tr));
        art.files.emplace_back(base + "_metrics.csv", metrics_csv(sc, eq.model, tr, spec));
        art.log.push_back(tr.diverged ? "diverged at t = " + format_double(tr.divergence_time) + " s"
                                      : "completed " + std::to_string(tr.times.size()) + " samples");
        break;
    }
    }
    return art;
}

int run_scenario(const Scenario& sc, const std::string& source_text, const RunOptions& opts, std::ostream& out,
                 std::ostream& err) {
    std::filesystem::create_directories(opts.out_dir);

    struct Outcome {
        ModeArtifacts art;
        int code = 0;
        std::string error;
        double wall = 0.0;
    };
    std::vector<std::future<Outcome>> jobs;
    for (ControlMode mode : sc.modes) {
        jobs.push_back(std::async(std::launch::async, [&sc, &opts, mode] {
            Outcome o;
            const auto start = std::chrono::steady_clock::now();
            try {
                o.art = run_mode(sc, mode, opts);
            } catch (const ConfigError& e) {
                o.code = 2;
                o.error = e.what();
            } catch (const DomainError& e) {
                o.code = 2;
                o.error = e.what();
            } catch (const NumericError& e) {
                o.code = 3;
                o.error = e.what();
            }
            o.art.mode = mode;
            o.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return o;
        }));
    }

    int code = 0;
    for (auto& job : jobs) {
        Outcome o = job.get();
        const std::string tag = sc.name + "/" + std::string(to_string(o.art.mode));
        if (o.code != 0) {
            err << tag << ": error: " << o.error << '\n';
            if (code == 0) code = o.code;
            continue;
        }
        nlohmann::ordered_json manifest;
        manifest["scenario"] = sc.name;
        manifest["mode"] = to_string(o.art.mode);
        manifest["analysis"] = to_string(sc.analysis);
        manifest["tool_version"] = kToolVersion;
        manifest["wall_time_s"] = o.wall;
        manifest["artifacts"] = nlohmann::json::array();
        for (const auto& [name, text] : o.art.files) {
            write_text(opts.out_dir / name, text);
            manifest["artifacts"].push_back(name);
        }
        manifest["resolved_scenario"] = render_scenario(sc, o.art.mode);
        manifest["source_scenario"] = source_text;
        if (opts.pre_roll) manifest["pre_roll_override_s"] = *opts.pre_roll;
        const std::string mname = stem(sc, o.art.mode) + "_manifest.json";
        write_text(opts.out_dir / mname, manifest.dump(2) + "\n");
        for (const auto& line : o.art.log) out << tag << ": " << line << '\n';
        for (const auto& [name, text] : o.art.files) out << tag << ": wrote " << (opts.out_dir / name).string() << '\n';
    }
    return code;
}

int run_file(const std::filesystem::path& path, RunOptions opts, std::ostream& out, std::ostream& err) {
    std::string text;
    Scenario sc;
    try {
        text = read_text(path);
        sc = parse_scenario(text);
    } catch (const ConfigError& e) {
        err << path.string() << ": " << e.what() << '\n';
        return 2;
    }
    try {
        return run_scenario(sc, text, opts, out, err);
    } catch (const ConfigError& e) {
        err << path.string() << ": " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << e.what() << '\n';
        return 2;
    }
}

}  // namespace invstab
