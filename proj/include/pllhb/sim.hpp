#pragma once

#include "pllhb/error.hpp"
#include "pllhb/model.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pllhb {

/// Step and tolerance contract for the adaptive integrator. The error test is
/// componentwise |e_i| <= max(rel_tol |y_i|, abs_tol), as in MATLAB's odeset.
struct IntegratorSettings {
    double max_step = 1e-3;         ///< s
    double rel_tol = 2e-6;
    double abs_tol = 2e-6;
    double t_final = 20.0;          ///< s
    double sample_interval = 1e-3;  ///< s, output grid spacing

    void validate() const;
};

/// Accepted/rejected step counters, useful for diagnostics and tests.
struct IntegrationStats {
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    std::size_t rhs_evaluations = 0;
    double min_step = 0.0;
    double max_step_taken = 0.0;
};

/// Solution sampled on a uniform grid with the derived control signal g and
/// the phase-error rate theta_e' = omega_e_free - k_vco g.
struct Trajectory {
    std::vector<double> times;
    std::vector<SystemState> states;
    std::vector<double> g;
    std::vector<double> theta_e_dot;
    IntegrationStats stats;

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

class IntegrationError : public NumericalError {
public:
    enum class Kind { StepUnderflow, Divergence };

    IntegrationError(Kind kind, double time, const std::string& what)
        : NumericalError(what), kind_(kind), time_(time) {}

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double time() const { return time_; }

private:
    Kind kind_;
    double time_;
};

/// Dormand-Prince 5(4) integration with a PI step controller and
/// fourth-order dense output onto the sample grid. Deterministic.
Trajectory integrate(const PllParameters& params, const FilterRealization& realization,
                     const SystemState& initial, const IntegratorSettings& settings);

/// CSV with header `t,theta_e,x0,g,theta_e_dot`, 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory);

// ---------------------------------------------------------------------------
// Classification

enum class VerdictKind { Locked, PeriodicDrift, UnmodulatedDrift, Undetermined };

std::string to_string(VerdictKind kind);

struct ClassifierSettings {
    double transient_fraction = 0.5;     ///< leading share of samples discarded
    double lock_rate_fraction = 1e-3;    ///< eps_lock = fraction * k_vco / 2
    double equilibrium_tolerance = 1e-3; ///< eps_eq, state norm on the cylinder
    double beta_min = 0.05;              ///< PeriodicDrift threshold on the depth
    double min_periods = 10.0;           ///< modulation periods needed in the window

    void validate() const;
};

/// Least-squares fit of theta_e'(t) ~ w (1 - beta cos(w t + phase)).
struct DriftFit {
    double mean_frequency = 0.0;   ///< w, rad/s
    double modulation_depth = 0.0; ///< beta >= 0
    double phase = 0.0;            ///< rad in [0, 2 pi), relative to t = 0
    double residual_norm = 0.0;    ///< RMS of the fit residual, rad/s
};

struct SimulationVerdict {
    VerdictKind kind = VerdictKind::Undetermined;
    std::optional<SystemState> equilibrium;
    double mean_frequency = 0.0;
    double modulation_depth = 0.0;
    std::string diagnostics;
};

/// Fits the post-transient part of the trajectory. The frequency is seeded
/// from the Hann-windowed spectral peak of theta_e' and refined by
/// Levenberg-Marquardt. Throws NumericalError on a degenerate window.
DriftFit fit_drift_cycle(const Trajectory& trajectory, double transient_fraction);

SimulationVerdict classify(const Trajectory& trajectory, const PllParameters& params,
                           const FilterRealization& realization,
                           const ClassifierSettings& settings = {});

/// Index of the first post-transient sample.
std::size_t transient_cut(std::size_t samples, double transient_fraction);

}  // namespace pllhb
