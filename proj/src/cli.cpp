#include "pllhb/cli.hpp"

#include "pllhb/analysis.hpp"
#include "pllhb/error.hpp"
#include "pllhb/hb.hpp"
#include "pllhb/io.hpp"
#include "pllhb/model.hpp"
#include "pllhb/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>

#ifndef PLLHB_VERSION
#define PLLHB_VERSION "0.0.0"
#endif

namespace pllhb::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Options of one leaf subcommand together with formatters for the manifest.
class OptionSet {
public:
    explicit OptionSet(CLI::App* app) : app_(app) {}

    CLI::Option* add(const std::string& name, double& v, const std::string& desc) {
        entries_.emplace_back(name, [&v] { return io::format_double(v); });
        return app_->add_option("--" + name, v, desc);
    }
    CLI::Option* add(const std::string& name, std::size_t& v, const std::string& desc) {
        entries_.emplace_back(name, [&v] { return std::to_string(v); });
        return app_->add_option("--" + name, v, desc);
    }
    CLI::Option* add(const std::string& name, std::string& v, const std::string& desc) {
        entries_.emplace_back(name, [&v] { return v; });
        return app_->add_option("--" + name, v, desc);
    }
    CLI::Option* add(const std::string& name, bool& v, const std::string& desc) {
        entries_.emplace_back(name, [&v] { return std::string(v ? "true" : "false"); });
        return app_->add_option("--" + name, v, desc);
    }

    [[nodiscard]] ordered_json resolved() const {
        ordered_json j = ordered_json::object();
        for (const auto& [name, fmt] : entries_) {
            j[name] = fmt();
        }
        return j;
    }

    CLI::App* app() { return app_; }

private:
    CLI::App* app_;
    std::vector<std::pair<std::string, std::function<std::string()>>> entries_;
};

struct ModelOptions {
    double omega_e_free = kNaN;
    double k_vco = 250.0;
    double tau1 = 0.0448;
    double tau2 = 0.0185;

    void attach(OptionSet& set) {
        set.add("omega-e-free", omega_e_free, "free-running frequency deviation, rad/s")->required();
        set.add("k-vco", k_vco, "VCO gain, rad/s");
        set.add("tau1", tau1, "filter time constant tau1, s");
        set.add("tau2", tau2, "filter time constant tau2, s");
    }

    [[nodiscard]] PllParameters params() const {
        PllParameters p{k_vco, omega_e_free, {tau1, tau2}};
        validate(p);
        return p;
    }
};

struct IntegratorOptions {
    IntegratorSettings s;

    void attach(OptionSet& set) {
        set.add("t-final", s.t_final, "simulation horizon, s");
        set.add("max-step", s.max_step, "maximum step size, s");
        set.add("rel-tol", s.rel_tol, "relative tolerance");
        set.add("abs-tol", s.abs_tol, "absolute tolerance");
        set.add("sample-interval", s.sample_interval, "output sample spacing, s");
    }
};

struct ClassifierOptions {
    ClassifierSettings s;

    void attach(OptionSet& set) {
        set.add("transient-fraction", s.transient_fraction, "leading share of samples discarded");
        set.add("beta-min", s.beta_min, "modulation depth separating periodic from unmodulated drift");
    }
};

struct HbOptions {
    double delta = 1.0;
    std::size_t n_omega = 500;
    std::size_t n_beta = 500;
    double omega_min = kNaN;
    double omega_max = kNaN;
    double beta_min = kNaN;
    double beta_max = kNaN;
    std::string formulation = "rederived";

    void attach(OptionSet& set) {
        set.add("delta", delta, "scan tolerance");
        set.add("n-omega", n_omega, "grid points along omega_c");
        set.add("n-beta", n_beta, "grid points along beta_c");
        set.add("omega-min", omega_min, "lower omega_c bound (default 1.05 |omega_e_free| / n-omega)");
        set.add("omega-max", omega_max, "upper omega_c bound (default 1.05 |omega_e_free|)");
        set.add("beta-min", beta_min, "lower beta_c bound (default 1.2 / n-beta)");
        set.add("beta-max", beta_max, "upper beta_c bound (default 1.2)");
        set.add("formulation", formulation, "rederived or paper-verbatim");
    }

    /// Fills defaults in place so the manifest records the resolved grid.
    ScanSettings resolve(const PllParameters& p) {
        ScanSettings s = ScanSettings::defaults_for(p);
        s.n_omega = n_omega;
        s.n_beta = n_beta;
        const double w_max = 1.05 * std::abs(p.omega_e_free);
        if (std::isnan(omega_max)) {
            omega_max = w_max;
        }
        if (std::isnan(omega_min)) {
            omega_min = w_max / static_cast<double>(std::max<std::size_t>(n_omega, 1));
        }
        if (std::isnan(beta_max)) {
            beta_max = 1.2;
        }
        if (std::isnan(beta_min)) {
            beta_min = 1.2 / static_cast<double>(std::max<std::size_t>(n_beta, 1));
        }
        s.omega_range = {omega_min, omega_max};
        s.beta_range = {beta_min, beta_max};
        s.delta = delta;
        s.formulation = parse_formulation(formulation);
        s.validate();
        return s;
    }
};

struct SeedOptions {
    double omega_c = kNaN;
    double beta_c = kNaN;
    double theta_c = kNaN;

    void attach(OptionSet& set) {
        set.add("omega-c", omega_c, "HB frequency; omit to take it from a scan");
        set.add("beta-c", beta_c, "HB modulation depth");
        set.add("theta-c", theta_c, "HB phase");
    }

    [[nodiscard]] bool given() const {
        const int count = !std::isnan(omega_c) + !std::isnan(beta_c) + !std::isnan(theta_c);
        if (count != 0 && count != 3) {
            throw ParameterError("--omega-c, --beta-c and --theta-c must be given together");
        }
        return count == 3;
    }
};

IntegratorSettings parse_settings_entry(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        io::KeyValueConfig tmp{{"v", item}};
        v.push_back(io::require_double(tmp, "v"));
    }
    if (v.size() != 3) {
        throw ParameterError("settings entry '" + text + "' must be max_step,rel_tol,abs_tol");
    }
    IntegratorSettings s;
    s.max_step = v[0];
    s.rel_tol = v[1];
    s.abs_tol = v[2];
    return s;
}

std::vector<IntegratorSettings> parse_settings_list(const std::string& text, double t_final, double sample_interval) {
    std::vector<IntegratorSettings> list;
    std::stringstream ss(text);
    std::string entry;
    while (std::getline(ss, entry, ';')) {
        if (entry.empty()) {
            continue;
        }
        IntegratorSettings s = parse_settings_entry(entry);
        s.t_final = t_final;
        s.sample_interval = sample_interval;
        s.validate();
        list.push_back(s);
    }
    return list;
}

/// Reads `--config` as key=value text or as a manifest written by this tool.
io::KeyValueConfig load_config(const fs::path& path) {
    const std::string text = io::read_file(path);
    const auto start = text.find_first_not_of(" \t\r\n");
    if (start != std::string::npos && text[start] == '{') {
        ordered_json j;
        try {
            j = ordered_json::parse(text);
        } catch (const ordered_json::parse_error& e) {
            throw ParameterError("config " + path.string() + ": " + e.what());
        }
        const ordered_json& inputs = j.contains("inputs") ? j.at("inputs") : j;
        if (!inputs.is_object()) {
            throw ParameterError("config " + path.string() + ": inputs must be an object");
        }
        io::KeyValueConfig config;
        for (const auto& [key, value] : inputs.items()) {
            config[key] = value.is_string() ? value.get<std::string>() : value.dump();
        }
        return config;
    }
    return io::parse_key_value(text);
}

bool given_explicitly(const std::vector<std::string>& args, const std::string& name) {
    const std::string flag = "--" + name;
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
        return a == flag || a.rfind(flag + "=", 0) == 0;
    });
}

/// Appends `--key=value` for every config key not already on the command line.
void merge_config(std::vector<std::string>& args) {
    std::optional<std::string> path;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) {
            path = args[k + 1];
        } else if (args[k].rfind("--config=", 0) == 0) {
            path = args[k].substr(9);
        }
    }
    if (!path) {
        return;
    }
    const io::KeyValueConfig config = load_config(*path);
    const std::vector<std::string> original = args;
    for (const auto& [raw_key, value] : config) {
        std::string key = raw_key;
        std::replace(key.begin(), key.end(), '_', '-');
        if (!given_explicitly(original, key)) {
            args.push_back("--" + key + "=" + value);
        }
    }
}

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        io::write_file_atomic(dir_ / name, content);
        names_.push_back(name);
    }

    [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
    [[nodiscard]] const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> names_;
};

std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    return os.str();
}

std::string region_summary(const ScanResult& result, const std::vector<ScanCluster>& clusters) {
    ordered_json j;
    j["formulation"] = to_string(result.settings.formulation);
    j["delta"] = result.settings.delta;
    j["grid"] = {{"omega_min", result.settings.omega_range.first},
                 {"omega_max", result.settings.omega_range.second},
                 {"n_omega", result.settings.n_omega},
                 {"beta_min", result.settings.beta_range.first},
                 {"beta_max", result.settings.beta_range.second},
                 {"n_beta", result.settings.n_beta}};
    j["count_eq1"] = result.points_eq1.size();
    j["count_eq2"] = result.points_eq2.size();
    j["count_intersection"] = result.intersection.size();
    ordered_json list = ordered_json::array();
    for (const ScanCluster& c : clusters) {
        list.push_back({{"size", c.members.size()},
                        {"omega_centroid", c.omega_centroid},
                        {"beta_centroid", c.beta_centroid},
                        {"theta_centroid", c.theta_centroid},
                        {"omega_min", c.omega_min},
                        {"omega_max", c.omega_max},
                        {"beta_min", c.beta_min},
                        {"beta_max", c.beta_max}});
    }
    j["clusters"] = std::move(list);
    return j.dump(2);
}

/// Scan, then Newton from the centroid of the largest intersection cluster.
HbSolution solve_from_scan(const PllParameters& p, const ScanSettings& s) {
    const ScanResult result = scan(p, s);
    const std::vector<ScanCluster> clusters = intersection_clusters(result);
    if (clusters.empty()) {
        throw NumericalError("scan intersection is empty; nothing to refine");
    }
    const ScanCluster& c = clusters.front();
    return refine({c.omega_centroid, c.beta_centroid, c.theta_centroid}, p);
}

CutoffPolicy parse_cutoff(const std::string& text) {
    for (CutoffPolicy c : {CutoffPolicy::Unbounded, CutoffPolicy::InverseTau2, CutoffPolicy::InverseTau1}) {
        if (to_string(c) == text) {
            return c;
        }
    }
    throw ParameterError("unknown cutoff policy '" + text + "'");
}

}  // namespace

std::string version() { return PLLHB_VERSION; }

int run(int argc, const char* const* argv) {
    CLI::App app{"Harmonic balance and simulation of a PLL with a lead-lag filter", "pllhb"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir = ".";
    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value file or a previous manifest.json");
        sub->add_option("--output-dir", output_dir, "directory receiving the outputs");
    };

    // simulate
    CLI::App* simulate = app.add_subcommand("simulate", "integrate from one initial state and classify");
    common(simulate);
    OptionSet sim_set(simulate);
    ModelOptions sim_model;
    IntegratorOptions sim_int;
    ClassifierOptions sim_cls;
    double theta0 = 0.0;
    double x0 = 0.0;
    bool from_equilibrium = false;
    sim_model.attach(sim_set);
    sim_int.attach(sim_set);
    sim_cls.attach(sim_set);
    sim_set.add("theta0", theta0, "initial phase error, rad");
    sim_set.add("x0", x0, "initial filter state");
    sim_set.add("from-equilibrium", from_equilibrium, "start at the stable equilibrium (true/false)");

    // hb scan / hb solve
    CLI::App* hb = app.add_subcommand("hb", "harmonic balance");
    hb->require_subcommand(1);
    CLI::App* hb_scan = hb->add_subcommand("scan", "tolerance scan over (omega_c, beta_c)");
    common(hb_scan);
    OptionSet scan_set(hb_scan);
    ModelOptions scan_model;
    HbOptions scan_hb;
    scan_model.attach(scan_set);
    scan_hb.attach(scan_set);

    CLI::App* hb_solve = hb->add_subcommand("solve", "refine a harmonic-balance solution by Newton iteration");
    common(hb_solve);
    OptionSet solve_set(hb_solve);
    ModelOptions solve_model;
    HbOptions solve_hb;
    SeedOptions solve_seed;
    std::string cutoff = "unbounded";
    bool allow_large_beta = false;
    solve_model.attach(solve_set);
    solve_hb.attach(solve_set);
    solve_seed.attach(solve_set);
    solve_set.add("cutoff", cutoff, "unbounded, inverse-tau2 or inverse-tau1");
    solve_set.add("allow-beta-ge-one", allow_large_beta, "accept beta_c >= 1 as feasible (true/false)");

    // compare
    CLI::App* compare = app.add_subcommand("compare", "compare an HB solution with simulation from zero state");
    common(compare);
    OptionSet cmp_set(compare);
    ModelOptions cmp_model;
    IntegratorOptions cmp_int;
    ClassifierOptions cmp_cls;
    HbOptions cmp_hb;
    SeedOptions cmp_seed;
    ComparisonSettings cmp_settings;
    cmp_model.attach(cmp_set);
    cmp_int.attach(cmp_set);
    cmp_cls.attach(cmp_set);
    cmp_seed.attach(cmp_set);
    cmp_set.add("delta", cmp_hb.delta, "scan tolerance when no HB solution is given");
    cmp_set.add("frequency-tolerance", cmp_settings.frequency_tolerance, "relative frequency tolerance");
    cmp_set.add("depth-tolerance", cmp_settings.depth_tolerance, "relative depth tolerance");

    // sensitivity
    CLI::App* sensitivity = app.add_subcommand("sensitivity", "repeat one simulation under several integrator settings");
    common(sensitivity);
    OptionSet sens_set(sensitivity);
    ModelOptions sens_model;
    ClassifierOptions sens_cls;
    std::string settings_text = "0.01,2e-3,2e-3;0.001,2e-6,2e-6";
    double sens_t_final = 500.0;
    double sens_sample = 0.01;
    double sens_theta0 = 0.0;
    double sens_x0 = 0.0;
    sens_model.attach(sens_set);
    sens_cls.attach(sens_set);
    sens_set.add("settings", settings_text, "';'-separated max_step,rel_tol,abs_tol entries");
    sens_set.add("t-final", sens_t_final, "simulation horizon, s");
    sens_set.add("sample-interval", sens_sample, "output sample spacing, s");
    sens_set.add("theta0", sens_theta0, "initial phase error, rad");
    sens_set.add("x0", sens_x0, "initial filter state");

    // pullin
    CLI::App* pullin = app.add_subcommand("pullin", "bracket the pull-in range by multi-start simulation");
    common(pullin);
    OptionSet pull_set(pullin);
    ModelOptions pull_model;
    IntegratorOptions pull_int;
    ClassifierOptions pull_cls;
    PullInSettings pull_settings;
    double dev_min = 0.0;
    double dev_max = kNaN;
    pull_model.omega_e_free = 0.0;
    pull_model.attach(pull_set);
    pullin->get_option("--omega-e-free")->required(false);
    pull_int.attach(pull_set);
    pull_cls.attach(pull_set);
    pull_set.add("deviation-min", dev_min, "lower end of the searched omega_e_free range, rad/s");
    pull_set.add("deviation-max", dev_max, "upper end (default 0.99 k_vco / 2), rad/s");
    pull_set.add("starts", pull_settings.starts_per_level, "initial states per level");
    pull_set.add("bracket-width", pull_settings.bracket_width, "stop when the bracket is narrower, rad/s");

    std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
    try {
        merge_config(args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "pllhb: " << e.what() << '\n';
        return 2;
    }

    try {
        std::error_code ec;
        fs::create_directories(output_dir, ec);
        if (!fs::is_directory(output_dir)) {
            throw ParameterError("output directory '" + output_dir + "' is not usable");
        }
        Outputs out(output_dir);
        std::string command;
        const OptionSet* used = nullptr;

        if (simulate->parsed()) {
            command = "simulate";
            used = &sim_set;
            const PllParameters p = sim_model.params();
            sim_int.s.validate();
            sim_cls.s.validate();
            const FilterRealization r = realize_lead_lag(p.filter);
            SystemState initial{x0, theta0};
            if (from_equilibrium) {
                const std::vector<SystemState> eq = equilibria(p, r);
                if (eq.empty()) {
                    throw DomainError("no equilibrium exists for |2 omega_e_free / k_vco| > 1");
                }
                initial = eq.front();
            }
            const Trajectory traj = integrate(p, r, initial, sim_int.s);
            const SimulationVerdict verdict = classify(traj, p, r, sim_cls.s);
            out.write("trajectory.csv", trajectory_csv(traj));
            out.write("verdict.json", verdict_json(verdict));
            std::cout << to_string(verdict.kind) << '\n';
        } else if (hb_scan->parsed()) {
            command = "hb scan";
            used = &scan_set;
            const PllParameters p = scan_model.params();
            const ScanSettings s = scan_hb.resolve(p);
            const ScanResult result = scan(p, s);
            const std::vector<ScanCluster> clusters = intersection_clusters(result);
            std::ostringstream csv;
            write_scan_csv(csv, result);
            out.write("scan.csv", csv.str());
            out.write("regions.json", region_summary(result, clusters));
            std::cout << result.intersection.size() << " intersection points in " << clusters.size()
                      << " regions\n";
        } else if (hb_solve->parsed()) {
            command = "hb solve";
            used = &solve_set;
            const PllParameters p = solve_model.params();
            const ScanSettings s = solve_hb.resolve(p);
            const FeasibilityPolicy policy{!allow_large_beta, parse_cutoff(cutoff)};
            const HbSolution sol = solve_seed.given()
                                       ? refine({solve_seed.omega_c, solve_seed.beta_c, solve_seed.theta_c}, p)
                                       : solve_from_scan(p, s);
            const bool ok = feasible(sol, p.filter, policy);
            out.write("solution.json", solution_json(sol, s.formulation, ok));
            std::cout << io::format_double(sol.omega_c) << ' ' << io::format_double(sol.beta_c) << ' '
                      << io::format_double(sol.theta_c) << '\n';
        } else if (compare->parsed()) {
            command = "compare";
            used = &cmp_set;
            const PllParameters p = cmp_model.params();
            cmp_settings.integrator = cmp_int.s;
            cmp_settings.classifier = cmp_cls.s;
            cmp_settings.integrator.validate();
            cmp_settings.classifier.validate();
            HbSolution hb_sol;
            if (cmp_seed.given()) {
                hb_sol = {cmp_seed.omega_c, cmp_seed.beta_c, cmp_seed.theta_c};
                hb_sol.residual_norm = euclidean_norm(hb_residuals_full(hb_sol, p));
            } else {
                hb_sol = solve_from_scan(p, cmp_hb.resolve(p));
            }
            const Trajectory traj = integrate(p, realize_lead_lag(p.filter), {0.0, 0.0}, cmp_settings.integrator);
            const ComparisonReport report = compare_with_trajectory(traj, p, hb_sol, cmp_settings);
            std::ostringstream cols;
            write_waveform_columns(cols, traj, report);
            out.write("comparison.json", comparison_json(report));
            out.write("waveform.txt", cols.str());
            out.write("trajectory.csv", trajectory_csv(traj));
            std::cout << (report.agrees ? "agrees" : "disagrees") << '\n';
        } else if (sensitivity->parsed()) {
            command = "sensitivity";
            used = &sens_set;
            const PllParameters p = sens_model.params();
            sens_cls.s.validate();
            const auto list = parse_settings_list(settings_text, sens_t_final, sens_sample);
            const SensitivityReport report = precision_sensitivity(p, {sens_x0, sens_theta0}, list, sens_cls.s);
            out.write("sensitivity.json", sensitivity_json(report));
            for (std::size_t k = 0; k < report.entries.size(); ++k) {
                if (report.entries[k].trajectory) {
                    out.write("trajectory_" + std::to_string(k) + ".csv",
                              trajectory_csv(*report.entries[k].trajectory));
                }
            }
            std::cout << (report.consistent ? "consistent" : "inconsistent") << '\n';
        } else if (pullin->parsed()) {
            command = "pullin";
            used = &pull_set;
            const PllParameters p = pull_model.params();
            if (std::isnan(dev_max)) {
                dev_max = 0.99 * 0.5 * p.k_vco;
            }
            pull_settings.integrator = pull_int.s;
            pull_settings.classifier = pull_cls.s;
            const PullInEstimate est = pull_in_scan(p, {dev_min, dev_max}, pull_settings);
            std::ostringstream transcript;
            transcript << "# deviation passed locked starts\n";
            for (const PullInLevel& level : est.transcript) {
                const auto locked = std::count_if(level.starts.begin(), level.starts.end(),
                                                  [](const StartOutcome& s) { return s.kind == VerdictKind::Locked; });
                transcript << io::format_double(level.deviation) << ' ' << (level.passed ? 1 : 0) << ' ' << locked
                           << ' ' << level.starts.size() << '\n';
            }
            out.write("pullin.json", pull_in_json(est));
            out.write("pullin_transcript.txt", transcript.str());
            std::cout << (est.lower ? io::format_double(*est.lower) : std::string("none")) << ' '
                      << io::format_double(est.upper) << '\n';
        }

        ordered_json manifest;
        manifest["tool"] = "pllhb";
        manifest["version"] = version();
        manifest["command"] = command;
        manifest["inputs"] = used->resolved();
        manifest["outputs"] = out.names();
        out.write("manifest.json", manifest.dump(2) + "\n");
        return 0;
    } catch (const ParameterError& e) {
        std::cerr << "pllhb: invalid argument: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "pllhb: invalid argument: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "pllhb: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace pllhb::cli
