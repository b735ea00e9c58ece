#include "pllhb/analysis.hpp"

#include "pllhb/error.hpp"
#include "pllhb/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <ostream>

namespace pllhb {

namespace {

using nlohmann::ordered_json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Alignment {
    double shift = 0.0;
    double offset = 0.0;
    double rmse = std::numeric_limits<double>::quiet_NaN();
};

Alignment align_waveform(const Trajectory& traj, const HbSolution& hb, std::size_t first) {
    const std::size_t n = traj.size();
    Alignment best;
    if (first >= n) {
        return best;
    }
    const double dt = n > 1 ? traj.times[1] - traj.times[0] : 0.0;
    std::size_t shifts = 1;
    if (dt > 0.0 && std::isfinite(hb.omega_c) && hb.omega_c > 0.0) {
        shifts = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(kTwoPi / hb.omega_c / dt)));
    }
    const auto count = static_cast<double>(n - first);
    std::vector<double> diff(n - first);
    for (std::size_t s = 0; s < shifts; ++s) {
        const double tau = static_cast<double>(s) * dt;
        double mean = 0.0;
        for (std::size_t k = first; k < n; ++k) {
            diff[k - first] = traj.states[k].theta_e - hb_waveform(hb, traj.times[k] + tau);
            mean += diff[k - first];
        }
        mean /= count;
        double sq = 0.0;
        for (double d : diff) {
            sq += (d - mean) * (d - mean);
        }
        const double rmse = std::sqrt(sq / count);
        if (!(rmse >= best.rmse)) {
            best = {tau, mean, rmse};
        }
    }
    return best;
}

double interpolate_theta(const Trajectory& traj, double t) {
    const auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
    if (it == traj.times.begin()) {
        return traj.states.front().theta_e;
    }
    if (it == traj.times.end()) {
        return traj.states.back().theta_e;
    }
    const auto hi = static_cast<std::size_t>(it - traj.times.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - traj.times[lo]) / (traj.times[hi] - traj.times[lo]);
    return traj.states[lo].theta_e + w * (traj.states[hi].theta_e - traj.states[lo].theta_e);
}

ordered_json state_json(const SystemState& s) { return {{"x", s.x}, {"theta_e", s.theta_e}}; }

ordered_json verdict_object(const SimulationVerdict& v) {
    ordered_json j;
    j["kind"] = to_string(v.kind);
    j["equilibrium"] = v.equilibrium ? state_json(*v.equilibrium) : ordered_json(nullptr);
    j["mean_frequency"] = v.mean_frequency;
    j["modulation_depth"] = v.modulation_depth;
    j["diagnostics"] = v.diagnostics;
    return j;
}

ordered_json settings_object(const IntegratorSettings& s) {
    return {{"max_step", s.max_step},
            {"rel_tol", s.rel_tol},
            {"abs_tol", s.abs_tol},
            {"t_final", s.t_final},
            {"sample_interval", s.sample_interval}};
}

ordered_json stats_object(const IntegrationStats& s) {
    return {{"accepted_steps", s.accepted_steps},
            {"rejected_steps", s.rejected_steps},
            {"rhs_evaluations", s.rhs_evaluations},
            {"min_step", s.min_step},
            {"max_step_taken", s.max_step_taken}};
}

ordered_json start_object(const StartOutcome& s) {
    ordered_json j;
    j["initial"] = state_json(s.initial);
    j["kind"] = to_string(s.kind);
    if (!s.error.empty()) {
        j["error"] = s.error;
    }
    return j;
}

double radical_inverse(std::size_t index, std::size_t base) {
    double result = 0.0;
    double f = 1.0 / static_cast<double>(base);
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= static_cast<double>(base);
    }
    return result;
}

}  // namespace

ComparisonReport compare_with_trajectory(const Trajectory& trajectory, const PllParameters& params,
                                         const HbSolution& hb, const ComparisonSettings& settings) {
    if (!std::isfinite(hb.omega_c) || !std::isfinite(hb.beta_c) || !std::isfinite(hb.theta_c)) {
        throw ParameterError("HB solution must be finite");
    }
    settings.classifier.validate();
    ComparisonReport report;
    report.hb = hb;
    report.verdict = classify(trajectory, params, realize_lead_lag(params.filter), settings.classifier);
    try {
        report.sim_fit = fit_drift_cycle(trajectory, settings.classifier.transient_fraction);
    } catch (const NumericalError&) {
        report.sim_fit = {};
    }

    const Alignment a = align_waveform(trajectory, hb, transient_cut(trajectory.size(), settings.classifier.transient_fraction));
    report.alignment_shift = a.shift;
    report.alignment_offset = a.offset;
    report.waveform_rmse = a.rmse;

    report.frequency_rel_error = std::abs(report.sim_fit.mean_frequency - hb.omega_c) / std::abs(hb.omega_c);
    report.depth_rel_error = std::abs(report.sim_fit.modulation_depth - hb.beta_c) / std::max(hb.beta_c, 0.1);
    report.agrees = report.frequency_rel_error < settings.frequency_tolerance &&
                    report.depth_rel_error < settings.depth_tolerance;
    return report;
}

ComparisonReport compare_hb_sim(const PllParameters& params, const HbSolution& hb, const ComparisonSettings& settings) {
    validate(params);
    const Trajectory traj = integrate(params, realize_lead_lag(params.filter), {0.0, 0.0}, settings.integrator);
    return compare_with_trajectory(traj, params, hb, settings);
}

double aligned_hb_waveform(const ComparisonReport& report, double t) {
    return hb_waveform(report.hb, t + report.alignment_shift) + report.alignment_offset;
}

void write_waveform_columns(std::ostream& os, const Trajectory& trajectory, const ComparisonReport& report) {
    os << "# t theta_hb theta_sim\n";
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        const double t = trajectory.times[k];
        os << io::format_double(t) << ' ' << io::format_double(aligned_hb_waveform(report, t)) << ' '
           << io::format_double(trajectory.states[k].theta_e) << '\n';
    }
}

SensitivityReport precision_sensitivity(const PllParameters& params, const SystemState& initial,
                                        const std::vector<IntegratorSettings>& settings_list,
                                        const ClassifierSettings& classifier) {
    validate(params);
    classifier.validate();
    if (settings_list.size() < 2) {
        throw ParameterError("precision_sensitivity needs at least two settings entries");
    }
    for (const IntegratorSettings& s : settings_list) {
        s.validate();
    }
    const FilterRealization r = realize_lead_lag(params.filter);

    SensitivityReport report;
    for (const IntegratorSettings& s : settings_list) {
        SensitivityEntry entry;
        entry.settings = s;
        try {
            entry.trajectory = integrate(params, r, initial, s);
            entry.verdict = classify(*entry.trajectory, params, r, classifier);
        } catch (const Error& e) {
            entry.error = e.what();
        }
        report.entries.push_back(std::move(entry));
    }

    std::vector<const SensitivityEntry*> ok;
    for (const SensitivityEntry& e : report.entries) {
        if (e.error.empty()) {
            ok.push_back(&e);
        }
    }
    if (ok.size() < 2) {
        report.max_divergence = std::numeric_limits<double>::quiet_NaN();
        report.consistent = false;
        return report;
    }

    const SensitivityEntry* coarse = ok.front();
    double horizon = std::numeric_limits<double>::infinity();
    for (const SensitivityEntry* e : ok) {
        if (e->settings.sample_interval > coarse->settings.sample_interval) {
            coarse = e;
        }
        horizon = std::min(horizon, e->trajectory->times.back());
    }
    double divergence = 0.0;
    for (std::size_t i = 0; i < ok.size(); ++i) {
        for (std::size_t j = i + 1; j < ok.size(); ++j) {
            for (double t : coarse->trajectory->times) {
                if (t > horizon) {
                    break;
                }
                const double d = std::abs(interpolate_theta(*ok[i]->trajectory, t) -
                                          interpolate_theta(*ok[j]->trajectory, t));
                divergence = std::max(divergence, d);
            }
        }
    }
    report.max_divergence = divergence;

    bool same_kind = ok.size() == report.entries.size();
    for (const SensitivityEntry* e : ok) {
        same_kind = same_kind && e->verdict->kind == ok.front()->verdict->kind;
    }
    report.consistent = same_kind && divergence < kTwoPi;
    return report;
}

std::vector<SystemState> pull_in_starts(const FilterRealization& realization, std::size_t count) {
    const double x_max = 0.5 * std::abs(realization.b / realization.a);
    std::vector<SystemState> starts;
    starts.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double theta = kTwoPi * radical_inverse(k, 2);
        const double x = -x_max + 2.0 * x_max * radical_inverse(k, 3);
        starts.push_back({x, theta});
    }
    return starts;
}

PullInLevel evaluate_pull_in_level(const PllParameters& params, double deviation, const PullInSettings& settings) {
    PllParameters p = params;
    p.omega_e_free = deviation;
    validate(p);
    settings.integrator.validate();
    settings.classifier.validate();
    const FilterRealization r = realize_lead_lag(p.filter);
    const std::vector<SystemState> starts = pull_in_starts(r, settings.starts_per_level);

    std::vector<std::future<StartOutcome>> jobs;
    jobs.reserve(starts.size());
    for (const SystemState& s0 : starts) {
        jobs.push_back(std::async(std::launch::async, [&p, &r, &settings, s0] {
            StartOutcome out;
            out.initial = s0;
            try {
                const Trajectory traj = integrate(p, r, s0, settings.integrator);
                out.kind = classify(traj, p, r, settings.classifier).kind;
            } catch (const Error& e) {
                out.kind = VerdictKind::Undetermined;
                out.error = e.what();
            }
            return out;
        }));
    }

    PullInLevel level;
    level.deviation = deviation;
    level.passed = true;
    for (auto& job : jobs) {
        level.starts.push_back(job.get());
        level.passed = level.passed && level.starts.back().kind == VerdictKind::Locked;
    }
    return level;
}

PullInEstimate pull_in_scan(const PllParameters& params_template, std::pair<double, double> deviation_range,
                            const PullInSettings& settings) {
    validate(params_template);
    const double hold_in = 0.5 * params_template.k_vco;
    const auto [lo, hi] = deviation_range;
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw ParameterError("pull-in deviation range is empty");
    }
    if (lo < 0.0 || hi >= hold_in) {
        throw ParameterError("pull-in deviation range must lie in [0, k_vco / 2)");
    }
    if (settings.starts_per_level == 0) {
        throw ParameterError("starts_per_level must be positive");
    }
    if (!(settings.bracket_width > 0.0)) {
        throw ParameterError("bracket_width must be positive");
    }

    PullInEstimate est;
    est.starts_per_level = settings.starts_per_level;
    const auto first_failure = [](const PullInLevel& level) {
        std::optional<StartOutcome> w;
        for (const StartOutcome& s : level.starts) {
            if (s.kind != VerdictKind::Locked) {
                w = s;
                break;
            }
        }
        return w;
    };

    est.transcript.push_back(evaluate_pull_in_level(params_template, lo, settings));
    if (!est.transcript.back().passed) {
        est.upper = lo;
        est.witness = first_failure(est.transcript.back());
        return est;
    }
    double lower = lo;
    double upper = hi;
    est.transcript.push_back(evaluate_pull_in_level(params_template, hi, settings));
    if (est.transcript.back().passed) {
        lower = hi;
        upper = hold_in;
        est.upper_is_hold_in_bound = true;
    } else {
        est.witness = first_failure(est.transcript.back());
    }

    while (!est.upper_is_hold_in_bound && upper - lower >= settings.bracket_width) {
        const double mid = 0.5 * (lower + upper);
        est.transcript.push_back(evaluate_pull_in_level(params_template, mid, settings));
        if (est.transcript.back().passed) {
            lower = mid;
        } else {
            upper = mid;
            est.witness = first_failure(est.transcript.back());
        }
    }
    est.lower = lower;
    est.upper = upper;
    return est;
}

std::string verdict_json(const SimulationVerdict& verdict) { return verdict_object(verdict).dump(2); }

std::string comparison_json(const ComparisonReport& report) {
    ordered_json j;
    j["hb"] = {{"omega_c", report.hb.omega_c},
               {"beta_c", report.hb.beta_c},
               {"theta_c", report.hb.theta_c},
               {"residual_norm", report.hb.residual_norm}};
    j["sim_fit"] = {{"mean_frequency", report.sim_fit.mean_frequency},
                    {"modulation_depth", report.sim_fit.modulation_depth},
                    {"phase", report.sim_fit.phase},
                    {"residual_norm", report.sim_fit.residual_norm}};
    j["verdict"] = verdict_object(report.verdict);
    j["waveform_rmse"] = report.waveform_rmse;
    j["frequency_rel_error"] = report.frequency_rel_error;
    j["depth_rel_error"] = report.depth_rel_error;
    j["alignment_shift"] = report.alignment_shift;
    j["alignment_offset"] = report.alignment_offset;
    j["agrees"] = report.agrees;
    return j.dump(2);
}

std::string sensitivity_json(const SensitivityReport& report) {
    ordered_json j;
    ordered_json entries = ordered_json::array();
    for (const SensitivityEntry& e : report.entries) {
        ordered_json item;
        item["settings"] = settings_object(e.settings);
        item["verdict"] = e.verdict ? verdict_object(*e.verdict) : ordered_json(nullptr);
        item["stats"] = e.trajectory ? stats_object(e.trajectory->stats) : ordered_json(nullptr);
        item["final_state"] = e.trajectory ? state_json(e.trajectory->states.back()) : ordered_json(nullptr);
        item["error"] = e.error.empty() ? ordered_json(nullptr) : ordered_json(e.error);
        entries.push_back(std::move(item));
    }
    j["entries"] = std::move(entries);
    j["max_divergence"] = report.max_divergence;
    j["consistent"] = report.consistent;
    return j.dump(2);
}

std::string pull_in_json(const PullInEstimate& estimate) {
    ordered_json j;
    j["lower"] = estimate.lower ? ordered_json(*estimate.lower) : ordered_json(nullptr);
    j["upper"] = estimate.upper;
    j["upper_is_hold_in_bound"] = estimate.upper_is_hold_in_bound;
    j["starts_per_level"] = estimate.starts_per_level;
    j["witness"] = estimate.witness ? start_object(*estimate.witness) : ordered_json(nullptr);
    ordered_json levels = ordered_json::array();
    for (const PullInLevel& level : estimate.transcript) {
        ordered_json item;
        item["deviation"] = level.deviation;
        item["passed"] = level.passed;
        ordered_json starts = ordered_json::array();
        for (const StartOutcome& s : level.starts) {
            starts.push_back(start_object(s));
        }
        item["starts"] = std::move(starts);
        levels.push_back(std::move(item));
    }
    j["transcript"] = std::move(levels);
    return j.dump(2);
}

}  // namespace pllhb
