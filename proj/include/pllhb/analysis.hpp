#pragma once

#include "pllhb/hb.hpp"
#include "pllhb/model.hpp"
#include "pllhb/sim.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pllhb {

struct ComparisonSettings {
    IntegratorSettings integrator;
    ClassifierSettings classifier;
    double frequency_tolerance = 0.1;  ///< relative
    double depth_tolerance = 0.25;     ///< relative to max(beta_c, 0.1)
};

struct ComparisonReport {
    HbSolution hb;
    DriftFit sim_fit;
    SimulationVerdict verdict;
    double waveform_rmse = 0.0;        ///< rad, post-transient window after alignment
    double frequency_rel_error = 0.0;
    double depth_rel_error = 0.0;
    bool agrees = false;
    double alignment_shift = 0.0;      ///< s, added to t in the HB waveform
    double alignment_offset = 0.0;     ///< rad, added to the HB waveform
};

/// Simulates from the zero state and compares with the HB ansatz.
ComparisonReport compare_hb_sim(const PllParameters& params, const HbSolution& hb,
                                const ComparisonSettings& settings = {});

/// Same comparison against an existing trajectory.
ComparisonReport compare_with_trajectory(const Trajectory& trajectory, const PllParameters& params,
                                         const HbSolution& hb, const ComparisonSettings& settings = {});

/// HB waveform evaluated with the report's alignment.
double aligned_hb_waveform(const ComparisonReport& report, double t);

/// Whitespace-separated `# t theta_hb theta_sim`.
void write_waveform_columns(std::ostream& os, const Trajectory& trajectory, const ComparisonReport& report);

struct SensitivityEntry {
    IntegratorSettings settings;
    std::optional<Trajectory> trajectory;
    std::optional<SimulationVerdict> verdict;
    std::string error;  ///< non-empty when integration or classification failed
};

struct SensitivityReport {
    std::vector<SensitivityEntry> entries;
    double max_divergence = 0.0;  ///< rad; NaN when fewer than two runs succeeded
    bool consistent = false;
};

SensitivityReport precision_sensitivity(const PllParameters& params, const SystemState& initial,
                                        const std::vector<IntegratorSettings>& settings_list,
                                        const ClassifierSettings& classifier = {});

struct PullInSettings {
    IntegratorSettings integrator;
    ClassifierSettings classifier;
    std::size_t starts_per_level = 16;
    double bracket_width = 0.5;  ///< rad/s
};

struct StartOutcome {
    SystemState initial;
    VerdictKind kind = VerdictKind::Undetermined;
    std::string error;
};

struct PullInLevel {
    double deviation = 0.0;  ///< omega_e_free tested, rad/s
    bool passed = false;     ///< every start Locked
    std::vector<StartOutcome> starts;
};

struct PullInEstimate {
    std::optional<double> lower;   ///< largest passing level
    double upper = 0.0;            ///< smallest failing level, or K/2
    bool upper_is_hold_in_bound = false;
    std::size_t starts_per_level = 0;
    std::vector<PullInLevel> transcript;  ///< in evaluation order
    std::optional<StartOutcome> witness;  ///< a non-locking start at upper
};

/// Halton (2, 3) points over theta in [0, 2 pi), x in [-x_max, x_max],
/// x_max = |b / a| / 2.
std::vector<SystemState> pull_in_starts(const FilterRealization& realization, std::size_t count);

PullInLevel evaluate_pull_in_level(const PllParameters& params, double deviation, const PullInSettings& settings);

/// Bisection on omega_e_free over deviation_range, which must lie in [0, K/2).
PullInEstimate pull_in_scan(const PllParameters& params_template, std::pair<double, double> deviation_range,
                            const PullInSettings& settings = {});

std::string verdict_json(const SimulationVerdict& verdict);
std::string comparison_json(const ComparisonReport& report);
std::string sensitivity_json(const SensitivityReport& report);
std::string pull_in_json(const PullInEstimate& estimate);

}  // namespace pllhb
