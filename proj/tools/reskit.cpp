// reskit: command-line front end for two-frequency resonance-zone analysis.
//
// Every command reads a single JSON config and writes CSV/JSON results into
// the output directory.  Runs are deterministic for a fixed config and seed.
//
// Exit codes: 0 success, 2 config error, 3 range error, 4 structural
// precondition error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "reskit/reskit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reskit;
namespace pend = reskit::pendulum;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

double require_param(const json& params, const std::string& key) {
    if (!params.contains(key))
        throw ConfigError("missing parameter key: " + key);
    if (!params[key].is_number())
        throw ConfigError("parameter is not a number: " + key);
    return params[key].get<double>();
}

double optional_number(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError("option is not a number: " + key);
    return j[key].get<double>();
}

int optional_int(const json& j, const std::string& key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw ConfigError("option is not an integer: " + key);
    return j[key].get<int>();
}

/// One parsed run of the single registered system "pendulum-q2": the
/// two-frequency forced pendulum on its oscillation cell.
struct Run {
    pend::Params params;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    long seed = 1;
    int workers = 0;
    json options;  // command-specific block

    static Run parse(const json& cfg) {
        if (!cfg.contains("system")) throw ConfigError("missing parameter key: system");
        const std::string system = cfg["system"].get<std::string>();
        if (system != "pendulum-q2")
            throw ConfigError("unknown system id: " + system + " (expected pendulum-q2)");
        if (!cfg.contains("params")) throw ConfigError("missing parameter key: params");
        const json& p = cfg["params"];
        Run run;
        run.params.p1 = require_param(p, "p1");
        run.params.p2 = require_param(p, "p2");
        run.params.p3 = require_param(p, "p3");
        run.params.epsilon = require_param(p, "epsilon");
        run.params.omega1 = optional_number(p, "omega1", 1.0);
        run.params.omega2 = optional_number(p, "omega2", pend::resonance_setup().omega2);
        run.gamma1 = optional_number(p, "gamma1", 0.0);
        run.gamma2 = optional_number(p, "gamma2", 0.0);
        run.seed = static_cast<long>(optional_number(cfg, "seed", 1));
        run.workers = io::worker_count(optional_int(cfg, "workers", 0));
        run.options = cfg.contains("options") ? cfg["options"] : json::object();
        try {
            run.params.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        return run;
    }

    AveragedModel model() const {
        const ModelForm form = options.value("form", std::string("full")) == "symmetric"
                                   ? ModelForm::symmetric
                                   : ModelForm::full;
        const double k = optional_number(options, "k_level", 0.0);
        auto m = pend::make_averaged_model(params, gamma1, gamma2, form, k);
        if (options.contains("b2_override"))
            m.B2_override = options["b2_override"].get<double>();
        return m;
    }
};

io::Json run_echo(const Run& run) {
    auto j = io::Json::object();
    j.set("system", "pendulum-q2");
    auto p = io::Json::object();
    p.set("p1", run.params.p1)
        .set("p2", run.params.p2)
        .set("p3", run.params.p3)
        .set("omega1", run.params.omega1)
        .set("omega2", run.params.omega2)
        .set("epsilon", run.params.epsilon)
        .set("gamma1", run.gamma1)
        .set("gamma2", run.gamma2);
    j.set("params", std::move(p));
    j.set("seed", run.seed);
    return j;
}

// -- genfun ------------------------------------------------------------------

int cmd_genfun(const Run& run, const fs::path& out) {
    const double k_min = optional_number(run.options, "k_min", 0.02);
    const double k_max = optional_number(run.options, "k_max", 0.98);
    const int count = optional_int(run.options, "count", 512);
    if (count < 2 || !(k_min > 0.0 && k_max < 1.0 && k_min < k_max))
        throw ConfigError("genfun: invalid modulus grid");

    io::CsvWriter csv((out / "genfun.csv").string(), {"k", "I", "B0", "B1", "B2"});
    for (int i = 0; i < count; ++i) {
        const double k = k_min + (k_max - k_min) * i / (count - 1.0);
        csv.row({k, pend::action_from_modulus(k), pend::generating_b0(k, run.params.p1),
                 pend::generating_b1(k, run.params.p1), pend::generating_b2(k, run.params.p1)});
    }

    const Interval cell{pend::action_from_modulus(k_min), pend::action_from_modulus(k_max)};
    const auto roots = find_simple_roots(pend::make_generating_function(run.params.p1), cell);
    const auto dc = pend::find_double_cycle();

    auto report = run_echo(run);
    auto roots_json = io::Json::array();
    for (const auto& r : roots) {
        auto rj = io::Json::object();
        rj.set("I", r.u)
            .set("k", pend::modulus_from_action(r.u))
            .set("B1", r.slope)
            .set("stable", r.stable);
        roots_json.push(std::move(rj));
    }
    report.set("roots", std::move(roots_json));
    auto dj = io::Json::object();
    dj.set("p1", dc.p1).set("k", dc.k).set("I", dc.I).set("B2", dc.b2);
    dj.set("at_config_p1", std::fabs(run.params.p1 - dc.p1) < 1e-3);
    report.set("double_root", std::move(dj));
    io::write_file((out / "genfun.json").string(), report.dump());
    return 0;
}

// -- resonance ---------------------------------------------------------------

int cmd_resonance(const Run& run, const fs::path& out) {
    ResonanceIndex idx{optional_int(run.options, "n", 3), optional_int(run.options, "m1", 1),
                       optional_int(run.options, "m2", 1)};
    try {
        idx.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto profile = pend::make_frequency_profile();
    const Interval cell{1e-4, pend::action_cell_max() - 1e-6};
    const double I_res =
        solve_resonance(profile, idx, run.params.omega1, run.params.omega2, cell);
    const double k_res = pend::modulus_from_action(I_res);

    const double B0 = pend::generating_b0(k_res, run.params.p1);
    const double B1 = pend::generating_b1(k_res, run.params.p1);
    auto report = run_echo(run);
    auto rj = io::Json::object();
    rj.set("n", idx.n).set("m1", idx.m1).set("m2", idx.m2);
    report.set("index", std::move(rj));
    report.set("I_res", I_res)
        .set("k_res", k_res)
        .set("omega", profile.omega(I_res))
        .set("b1", profile.b1(I_res))
        .set("b2", profile.b2(I_res))
        .set("b3", profile.b3(I_res))
        .set("B0", B0)
        .set("B1", B1)
        .set("coincident", std::fabs(B0) < 1e-6 && std::fabs(B1) < 1e-6);
    io::write_file((out / "resonance.json").string(), report.dump());
    return 0;
}

// -- portrait ----------------------------------------------------------------

int cmd_portrait(const Run& run, const fs::path& out) {
    auto model = run.model();
    PortraitOptions popt;
    popt.grid_v = optional_int(run.options, "grid", 20);
    popt.grid_u = popt.grid_v;
    popt.horizon = optional_number(run.options, "horizon", 200.0);
    popt.escape_factor = optional_number(run.options, "escape", 3.0);
    popt.threads = run.workers;
    const auto pp = classify_portrait(model, popt);

    auto report = run_echo(run);
    report.set("form", to_string(model.form));
    report.set("B2_effective", model.B2v());
    auto eqs = io::Json::array();
    for (const auto& e : pp.equilibria) {
        auto ej = io::Json::object();
        ej.set("v", e.v).set("u", e.u).set("kind", to_string(e.kind));
        ej.set("eig_re", e.eig1.real()).set("eig_im", std::fabs(e.eig1.imag()));
        eqs.push(std::move(ej));
    }
    report.set("equilibria", std::move(eqs));
    auto cyc = io::Json::array();
    for (const auto& c : pp.limit_cycles) {
        auto cj = io::Json::object();
        cj.set("location", to_string(c.location))
            .set("stable", c.stable)
            .set("u_section", c.u_section)
            .set("v_section", c.v_section)
            .set("period", c.period)
            .set("multiplier", c.multiplier);
        cyc.push(std::move(cj));
    }
    report.set("limit_cycles", std::move(cyc));
    report.set("taxonomy", to_string(pp.taxonomy));
    report.set("figure", pp.figure);
    report.set("any_traversal", pp.any_traversal);
    report.set("cycle_loop_merge", pp.cycle_loop_merge);
    if (pp.delta1) report.set("delta1", *pp.delta1);
    io::write_file((out / "portrait.json").string(), report.dump());

    io::CsvWriter traj((out / "trajectories.csv").string(), {"trajectory", "v", "u"});
    for (std::size_t i = 0; i < pp.trajectories.size(); ++i)
        for (const auto& p : pp.trajectories[i].points)
            traj.row({static_cast<double>(i), p[0], p[1]});
    io::CsvWriter sep((out / "separatrices.csv").string(), {"branch", "v", "u"});
    for (std::size_t i = 0; i < pp.separatrices.size(); ++i)
        for (const auto& p : pp.separatrices[i].points)
            sep.row({static_cast<double>(i), p[0], p[1]});
    io::CsvWriter cycles_csv((out / "cycles.csv").string(), {"cycle", "v", "u"});
    for (std::size_t i = 0; i < pp.limit_cycles.size(); ++i)
        for (const auto& p : pp.limit_cycles[i].points)
            cycles_csv.row({static_cast<double>(i), p[0], p[1]});
    return 0;
}

// -- melnikov ----------------------------------------------------------------

int cmd_melnikov(const Run& run, const fs::path& out) {
    const auto model = run.model();
    const MelnikovResult mel = melnikov_delta1(model);
    ShootingGap gap;
    const bool shoot = run.options.value("shooting", true);
    if (shoot) gap = measure_separatrix_gap(model);

    auto report = run_echo(run);
    report.set("saddle_v0", mel.saddle_v0)
        .set("delta1", mel.delta1)
        .set("classification", to_string(mel.classification));
    if (shoot) {
        const double mu = model.coeffs.mu;
        report.set("shooting_u_unstable", gap.u_unstable)
            .set("shooting_u_stable", gap.u_stable)
            .set("shooting_gap", gap.gap)
            .set("shooting_energy_gap", gap.energy_gap)
            .set("predicted_energy_gap", mu * mu * mel.delta1)
            .set("sign_agreement",
                 gap.energy_gap * mel.delta1 > 0.0 ||
                     (std::fabs(mel.delta1) < 1e-9 && std::fabs(gap.energy_gap) < 1e-6));
    }
    io::write_file((out / "melnikov.json").string(), report.dump());
    return 0;
}

// -- simulate ----------------------------------------------------------------

int cmd_simulate(const Run& run, const fs::path& out) {
    const auto sys = pend::make_system(run.params);
    try {
        sys.validate();  // incommensurability and periodicity of the forcing
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto chart = pend::make_chart();
    SimulateOptions sopt;
    sopt.index = {optional_int(run.options, "n", 3), optional_int(run.options, "m1", 1),
                  optional_int(run.options, "m2", 1)};
    sopt.sample_dt = optional_number(run.options, "sample_dt", 0.25);
    sopt.ode.rtol = optional_number(run.options, "rtol", 1e-9);
    sopt.ode.atol = optional_number(run.options, "atol", 1e-9);
    const double T = optional_number(run.options, "T", 1000.0);
    if (!(T > 0.0) || !(sopt.sample_dt > 0.0))
        throw ConfigError("simulate: T and sample_dt must be > 0");

    double x0, y0;
    if (run.options.contains("x0") && run.options.contains("y0")) {
        x0 = run.options["x0"].get<double>();
        y0 = run.options["y0"].get<double>();
    } else {
        // start from cell coordinates (k0, theta0)
        const double k0 = optional_number(run.options, "k0", 0.5);
        const double th0 = optional_number(run.options, "theta0", 0.0);
        if (!(k0 > 0.0 && k0 < 1.0)) throw ConfigError("simulate: k0 outside (0,1)");
        const double I0 = pend::action_from_modulus(k0);
        x0 = chart.x_of(I0, th0);
        y0 = chart.y_of(I0, th0);
        sopt.I_seed = I0;
        sopt.theta_seed = th0;
    }
    const auto tr = integrate_full_system(sys, chart, x0, y0, T, sopt);

    io::CsvWriter csv((out / "trajectory.csv").string(), {"t", "x", "y", "I", "v"});
    for (std::size_t i = 0; i < tr.t.size(); ++i)
        csv.row({tr.t[i], tr.x[i], tr.y[i], tr.I[i], tr.v[i]});

    // reference level for the drift metrics
    double I_ref;
    if (run.options.contains("k_ref")) {
        I_ref = pend::action_from_modulus(run.options["k_ref"].get<double>());
    } else {
        I_ref = pend::find_double_cycle().I;
    }
    const auto rep = drift_report(tr, I_ref, sopt.index.n);
    auto report = run_echo(run);
    report.set("T", T)
        .set("samples", static_cast<long>(tr.t.size()))
        .set("I_ref", I_ref)
        .set("max_abs_dI", rep.max_abs_dI)
        .set("band_5_sqrt_eps", 5.0 * std::sqrt(run.params.epsilon))
        .set("within_band", rep.max_abs_dI <= 5.0 * std::sqrt(run.params.epsilon))
        .set("v_span", rep.v_span)
        .set("crossed_full_period", rep.crossed_full_period)
        .set("exited_cell", tr.exited);
    if (tr.exited) report.set("exit_time", tr.exit_time);
    io::write_file((out / "simulate.json").string(), report.dump());
    return 0;
}

// -- sweep -------------------------------------------------------------------

int cmd_sweep(const Run& run, const fs::path& out) {
    const std::string parameter = run.options.value("parameter", std::string());
    const std::string analyze = run.options.value("analyze", std::string("genfun"));
    const double from = optional_number(run.options, "from", 0.0);
    const double to = optional_number(run.options, "to", 1.0);
    const int count = optional_int(run.options, "count", 11);
    if (parameter.empty()) throw ConfigError("missing parameter key: options.parameter");
    if (count < 2) throw ConfigError("sweep: count must be >= 2");

    auto with_value = [&](double value) {
        Run r = run;
        if (parameter == "p1") r.params.p1 = value;
        else if (parameter == "p2") r.params.p2 = value;
        else if (parameter == "p3") r.params.p3 = value;
        else if (parameter == "epsilon") r.params.epsilon = value;
        else if (parameter == "gamma1") r.gamma1 = value;
        else if (parameter == "gamma2") r.gamma2 = value;
        else if (parameter == "b2_override") r.options["b2_override"] = value;
        else throw ConfigError("sweep: unknown parameter: " + parameter);
        return r;
    };

    if (analyze == "genfun") {
        io::CsvWriter csv((out / "sweep.csv").string(),
                          {"value", "root_count", "first_root_k", "second_root_k"});
        const Interval cell{pend::action_from_modulus(0.02), pend::action_from_modulus(0.98)};
        for (int i = 0; i < count; ++i) {
            const double value = from + (to - from) * i / (count - 1.0);
            const Run r = with_value(value);
            const auto roots =
                find_simple_roots(pend::make_generating_function(r.params.p1), cell);
            csv.row({value, static_cast<double>(roots.size()),
                     roots.empty() ? NAN : pend::modulus_from_action(roots[0].u),
                     roots.size() < 2 ? NAN : pend::modulus_from_action(roots[1].u)});
        }
    } else if (analyze == "melnikov") {
        io::CsvWriter csv((out / "sweep.csv").string(), {"value", "delta1"});
        for (int i = 0; i < count; ++i) {
            const double value = from + (to - from) * i / (count - 1.0);
            const auto mel = melnikov_delta1(with_value(value).model());
            csv.row({value, mel.delta1});
        }
    } else if (analyze == "cycles") {
        io::CsvWriter csv((out / "sweep.csv").string(),
                          {"value", "cycle_count", "first_u", "first_stable"});
        for (int i = 0; i < count; ++i) {
            const double value = from + (to - from) * i / (count - 1.0);
            const auto cycles = find_limit_cycles(with_value(value).model());
            csv.row({value, static_cast<double>(cycles.size()),
                     cycles.empty() ? NAN : cycles[0].u_section,
                     cycles.empty() ? NAN : static_cast<double>(cycles[0].stable)});
        }
    } else {
        throw ConfigError("sweep: unknown analysis: " + analyze);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-frequency resonance-zone analysis toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    for (const char* name : {"genfun", "resonance", "portrait", "melnikov", "simulate", "sweep"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory (default: current)");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        const json cfg = load_config(config_path);
        const Run run = Run::parse(cfg);
        fs::path out(out_dir);
        std::error_code ec;
        fs::create_directories(out, ec);
        if (!fs::is_directory(out))
            throw ConfigError("output directory is not writable: " + out_dir);

        if (command == "genfun") return cmd_genfun(run, out);
        if (command == "resonance") return cmd_resonance(run, out);
        if (command == "portrait") return cmd_portrait(run, out);
        if (command == "melnikov") return cmd_melnikov(run, out);
        if (command == "simulate") return cmd_simulate(run, out);
        if (command == "sweep") return cmd_sweep(run, out);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "range error: " << e.what() << "\n";
        return 3;
    } catch (const std::domain_error& e) {
        std::cerr << "range error: " << e.what() << "\n";
        return 3;
    } catch (const std::logic_error& e) {
        std::cerr << "precondition error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
