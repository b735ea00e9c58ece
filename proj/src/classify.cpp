#include "pllhb/sim.hpp"

#include "pllhb/io.hpp"

#include <Eigen/Dense>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

namespace pllhb {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_two_pi(double angle) {
    double r = std::fmod(angle, kTwoPi);
    if (r < 0.0) {
        r += kTwoPi;
    }
    return r >= kTwoPi ? 0.0 : r;
}

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Frequency (rad/s) of the dominant non-DC spectral line of a uniformly
/// sampled, mean-free signal.
double spectral_peak(const std::vector<double>& values, double dt) {
    const std::size_t n = values.size();
    std::size_t nfft = 1;
    while (nfft < 2 * n) {
        nfft <<= 1;
    }
    const std::size_t bins = nfft / 2 + 1;
    double* in = fftw_alloc_real(nfft);
    fftw_complex* spec = fftw_alloc_complex(bins);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in, spec, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < nfft; ++i) {
        if (i < n) {
            const double hann = n > 1 ? 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / (n - 1)) : 1.0;
            in[i] = hann * values[i];
        } else {
            in[i] = 0.0;
        }
    }
    fftw_execute(plan);
    std::vector<double> power(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(spec);

    std::size_t best = 1;
    for (std::size_t k = 2; k < bins; ++k) {
        if (power[k] > power[best]) {
            best = k;
        }
    }
    double offset = 0.0;
    if (best + 1 < bins) {
        const double a = power[best - 1];
        const double b = power[best];
        const double c = power[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom != 0.0) {
            offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
        }
    }
    return kTwoPi * (static_cast<double>(best) + offset) / (static_cast<double>(nfft) * dt);
}

struct LocalFit {
    double w;
    double beta;
    double phase;
    double cost;
};

double fit_cost(const std::vector<double>& tau, const std::vector<double>& y, double w, double beta,
                double phase) {
    double cost = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double r = w * (1.0 - beta * std::cos(w * tau[i] + phase)) - y[i];
        cost += r * r;
    }
    return cost;
}

LocalFit levenberg_marquardt(const std::vector<double>& tau, const std::vector<double>& y, LocalFit p) {
    p.cost = fit_cost(tau, y, p.w, p.beta, p.phase);
    double lambda = 1e-3;
    for (int iter = 0; iter < 200; ++iter) {
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
        for (std::size_t i = 0; i < tau.size(); ++i) {
            const double u = p.w * tau[i] + p.phase;
            const double cu = std::cos(u);
            const double su = std::sin(u);
            const double r = p.w * (1.0 - p.beta * cu) - y[i];
            const Eigen::Vector3d row{1.0 - p.beta * cu + p.w * p.beta * su * tau[i], -p.w * cu, p.w * p.beta * su};
            jtj += row * row.transpose();
            jtr += row * r;
        }
        bool improved = false;
        Eigen::Vector3d delta = Eigen::Vector3d::Zero();
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::Matrix3d a = jtj;
            for (int d = 0; d < 3; ++d) {
                a(d, d) += lambda * std::max(jtj(d, d), 1e-300);
            }
            delta = a.ldlt().solve(-jtr);
            if (!delta.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const double cost = fit_cost(tau, y, p.w + delta[0], p.beta + delta[1], p.phase + delta[2]);
            if (cost < p.cost) {
                const double previous = p.cost;
                p = {p.w + delta[0], p.beta + delta[1], p.phase + delta[2], cost};
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (previous - cost <= 1e-15 * previous) {
                    return p;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            break;
        }
        if (std::abs(delta[0]) <= 1e-14 * std::abs(p.w) && std::abs(delta[1]) <= 1e-14 &&
            std::abs(delta[2]) <= 1e-14) {
            break;
        }
    }
    return p;
}

}  // namespace

std::string to_string(VerdictKind kind) {
    switch (kind) {
        case VerdictKind::Locked: return "Locked";
        case VerdictKind::PeriodicDrift: return "PeriodicDrift";
        case VerdictKind::UnmodulatedDrift: return "UnmodulatedDrift";
        case VerdictKind::Undetermined: return "Undetermined";
    }
    return "Undetermined";
}

void ClassifierSettings::validate() const {
    if (!(transient_fraction >= 0.0 && transient_fraction < 1.0)) {
        throw ParameterError("transient_fraction must lie in [0, 1)");
    }
    if (!(lock_rate_fraction > 0.0) || !(equilibrium_tolerance > 0.0) || !(beta_min >= 0.0) ||
        !(min_periods > 0.0)) {
        throw ParameterError("classifier thresholds must be positive");
    }
}

std::size_t transient_cut(std::size_t samples, double transient_fraction) {
    if (samples == 0) {
        return 0;
    }
    const auto cut = static_cast<std::size_t>(std::floor(transient_fraction * static_cast<double>(samples)));
    return std::min(cut, samples - 1);
}

DriftFit fit_drift_cycle(const Trajectory& trajectory, double transient_fraction) {
    const std::size_t n = trajectory.size();
    const std::size_t first = transient_cut(n, transient_fraction);
    if (n < 4 || n - first < 4) {
        throw NumericalError("fit_drift_cycle: post-transient window has fewer than 4 samples");
    }
    const double t0 = trajectory.times[first];
    const double span = trajectory.times.back() - t0;
    if (!(span > 0.0)) {
        throw NumericalError("fit_drift_cycle: post-transient window has zero length");
    }
    const std::size_t m = n - first;
    const double dt = span / static_cast<double>(m - 1);

    std::vector<double> tau(m);
    std::vector<double> rate(m);
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        tau[i] = trajectory.times[first + i] - t0;
        rate[i] = trajectory.theta_e_dot[first + i];
        mean += rate[i];
    }
    mean /= static_cast<double>(m);

    std::vector<double> centered(m);
    double spread = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        centered[i] = rate[i] - mean;
        spread = std::max(spread, std::abs(centered[i]));
    }
    if (spread <= 1e-12 * std::max(1.0, std::abs(mean))) {
        double rms = 0.0;
        for (double c : centered) {
            rms += c * c;
        }
        return {mean, 0.0, 0.0, std::sqrt(rms / static_cast<double>(m))};
    }

    const double w_spec = spectral_peak(centered, dt);
    const double w_seed = mean < 0.0 ? -w_spec : w_spec;

    // Linear least squares for the sinusoid at the seed frequency.
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(m), 3);
    Eigen::VectorXd target(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        basis(row, 0) = 1.0;
        basis(row, 1) = std::cos(w_spec * tau[i]);
        basis(row, 2) = std::sin(w_spec * tau[i]);
        target(row) = rate[i];
    }
    const Eigen::Vector3d coef = basis.colPivHouseholderQr().solve(target);
    const double amplitude = std::hypot(coef[1], coef[2]);
    LocalFit seed{w_seed, amplitude / std::abs(w_seed), 0.0, 0.0};
    seed.phase = w_seed > 0.0 ? std::atan2(coef[2], -coef[1]) : std::atan2(coef[2], coef[1]);

    LocalFit best = levenberg_marquardt(tau, rate, seed);
    if (best.beta < 0.0) {
        best.beta = -best.beta;
        best.phase += std::numbers::pi;
    }
    return {best.w, best.beta, wrap_two_pi(best.phase - best.w * t0),
            std::sqrt(best.cost / static_cast<double>(m))};
}

SimulationVerdict classify(const Trajectory& trajectory, const PllParameters& params,
                           const FilterRealization& realization, const ClassifierSettings& settings) {
    settings.validate();
    SimulationVerdict verdict;
    const std::size_t n = trajectory.size();
    const std::size_t first = transient_cut(n, settings.transient_fraction);
    if (n < 4 || n - first < 4) {
        verdict.diagnostics = "post-transient window too short";
        return verdict;
    }

    const double eps_lock = settings.lock_rate_fraction * params.k_vco / 2.0;
    double max_rate = 0.0;
    for (std::size_t i = first; i < n; ++i) {
        max_rate = std::max(max_rate, std::abs(trajectory.theta_e_dot[i]));
    }
    const SystemState& final_state = trajectory.states.back();
    double nearest = std::numeric_limits<double>::infinity();
    std::optional<SystemState> nearest_eq;
    for (const SystemState& eq : equilibria(params, realization)) {
        const double dtheta = std::remainder(final_state.theta_e - eq.theta_e, kTwoPi);
        const double dist = std::hypot(final_state.x - eq.x, dtheta);
        if (dist < nearest) {
            nearest = dist;
            nearest_eq = eq;
        }
    }

    std::ostringstream diag;
    diag << "max|theta_e_dot|=" << io::format_double(max_rate) << " eps_lock=" << io::format_double(eps_lock);
    if (nearest_eq) {
        diag << " equilibrium_distance=" << io::format_double(nearest);
    } else {
        diag << " no_equilibrium";
    }

    if (max_rate < eps_lock && nearest < settings.equilibrium_tolerance) {
        verdict.kind = VerdictKind::Locked;
        verdict.equilibrium = nearest_eq;
        verdict.diagnostics = diag.str();
        return verdict;
    }

    const double span = trajectory.times.back() - trajectory.times[first];
    const double advance = trajectory.states.back().theta_e - trajectory.states[first].theta_e;
    diag << " window_phase_advance=" << io::format_double(advance);
    if (!(std::abs(advance) >= settings.min_periods * kTwoPi) || !(span > 0.0)) {
        diag << " (fewer than " << settings.min_periods << " drift periods)";
        verdict.diagnostics = diag.str();
        return verdict;
    }

    const DriftFit fit = fit_drift_cycle(trajectory, settings.transient_fraction);
    verdict.mean_frequency = fit.mean_frequency;
    verdict.modulation_depth = fit.modulation_depth;
    verdict.kind = fit.modulation_depth >= settings.beta_min ? VerdictKind::PeriodicDrift
                                                             : VerdictKind::UnmodulatedDrift;
    diag << " fit_residual_rms=" << io::format_double(fit.residual_norm);
    verdict.diagnostics = diag.str();
    return verdict;
}

}  // namespace pllhb
