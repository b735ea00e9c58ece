#include "pllhb/sim.hpp"

#include "pllhb/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

namespace pllhb {

namespace {

using Vec = std::array<double, 2>;

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Shampine's fourth-order continuous extension.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;
// PI controller exponents (Hairer & Wanner, DOPRI5).
constexpr double kBeta = 0.04;
constexpr double kAlpha = 0.2 - 0.75 * kBeta;

Vec axpy(const Vec& y, double h, const Vec& k) { return {y[0] + h * k[0], y[1] + h * k[1]}; }

bool finite(const Vec& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

class PllField {
public:
    PllField(const PllParameters& p, const FilterRealization& r) : p_(p), r_(r) {}

    Vec operator()(const Vec& y) {
        ++evaluations;
        const SystemState d = rhs({y[0], y[1]}, p_, r_);
        return {d.x, d.theta_e};
    }

    std::size_t evaluations = 0;

private:
    PllParameters p_;
    FilterRealization r_;
};

double error_norm(const Vec& err, const Vec& y, const Vec& y_new, double rel, double abs) {
    double norm = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double scale = std::max(rel * std::max(std::abs(y[i]), std::abs(y_new[i])), abs);
        norm = std::max(norm, std::abs(err[i]) / scale);
    }
    return norm;
}

double initial_step(PllField& f, const Vec& y0, const Vec& f0, const IntegratorSettings& s) {
    double d0 = 0.0;
    double d1n = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double sk = s.abs_tol + s.rel_tol * std::abs(y0[i]);
        d0 = std::max(d0, std::abs(y0[i]) / sk);
        d1n = std::max(d1n, std::abs(f0[i]) / sk);
    }
    double h0 = (d0 < 1e-10 || d1n < 1e-10) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, s.max_step);
    const Vec f1 = f(axpy(y0, h0, f0));
    double d2 = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double sk = s.abs_tol + s.rel_tol * std::abs(y0[i]);
        d2 = std::max(d2, std::abs(f1[i] - f0[i]) / sk);
    }
    d2 /= h0;
    const double dmax = std::max(d1n, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, s.max_step});
}

void store(Trajectory& out, std::size_t k, double t, const Vec& y, const PllParameters& p,
           const FilterRealization& r) {
    const SystemState s{y[0], y[1]};
    out.times[k] = t;
    out.states[k] = s;
    out.g[k] = control_signal(s, r);
    out.theta_e_dot[k] = p.omega_e_free - p.k_vco * out.g[k];
}

}  // namespace

void IntegratorSettings::validate() const {
    const auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(max_step) || !positive(rel_tol) || !positive(abs_tol) || !positive(t_final) ||
        !positive(sample_interval)) {
        throw ParameterError("integrator settings must be positive and finite");
    }
    if (sample_interval > t_final) {
        throw ParameterError("sample_interval exceeds t_final");
    }
}

Trajectory integrate(const PllParameters& params, const FilterRealization& realization,
                     const SystemState& initial, const IntegratorSettings& settings) {
    settings.validate();
    if (!std::isfinite(initial.x) || !std::isfinite(initial.theta_e)) {
        throw ParameterError("initial state must be finite");
    }
    if (!std::isfinite(params.k_vco) || !std::isfinite(params.omega_e_free)) {
        throw ParameterError("loop parameters must be finite");
    }

    const double t_final = settings.t_final;
    const double dt = settings.sample_interval;
    const auto samples = static_cast<std::size_t>(std::floor(t_final / dt * (1.0 + 1e-12))) + 1;

    Trajectory out;
    out.times.resize(samples);
    out.states.resize(samples);
    out.g.resize(samples);
    out.theta_e_dot.resize(samples);

    PllField f(params, realization);
    Vec y{initial.x, initial.theta_e};
    Vec k1 = f(y);
    if (!finite(k1)) {
        throw IntegrationError(IntegrationError::Kind::Divergence, 0.0, "non-finite derivative at t = 0");
    }
    store(out, 0, 0.0, y, params, realization);
    std::size_t next = 1;

    const double h_min = 1e-14 * t_final;
    double h = initial_step(f, y, k1, settings);
    double t = 0.0;
    double err_old = 1e-4;
    bool rejected = false;
    IntegrationStats& stats = out.stats;
    stats.min_step = settings.max_step;

    while (t_final - t > h_min) {
        const double remaining = t_final - t;
        double step = std::min(h, settings.max_step);
        bool last = false;
        if (step >= remaining) {
            step = remaining;
            last = true;
        }
        if (step < h_min) {
            throw IntegrationError(IntegrationError::Kind::StepUnderflow, t,
                                   "step size underflow at t = " + io::format_double(t));
        }

        const Vec k2 = f(axpy(y, step * a21, k1));
        const Vec y3{y[0] + step * (a31 * k1[0] + a32 * k2[0]), y[1] + step * (a31 * k1[1] + a32 * k2[1])};
        const Vec k3 = f(y3);
        Vec y4;
        for (std::size_t i = 0; i < 2; ++i) {
            y4[i] = y[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        }
        const Vec k4 = f(y4);
        Vec y5;
        for (std::size_t i = 0; i < 2; ++i) {
            y5[i] = y[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        }
        const Vec k5 = f(y5);
        Vec y6;
        for (std::size_t i = 0; i < 2; ++i) {
            y6[i] = y[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        }
        const Vec k6 = f(y6);
        Vec y_new;
        for (std::size_t i = 0; i < 2; ++i) {
            y_new[i] = y[i] + step * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        }
        const Vec k7 = f(y_new);
        if (!finite(k2) || !finite(k3) || !finite(k4) || !finite(k5) || !finite(k6) || !finite(k7) ||
            !finite(y_new)) {
            throw IntegrationError(IntegrationError::Kind::Divergence, t,
                                   "non-finite state near t = " + io::format_double(t));
        }

        Vec err;
        for (std::size_t i = 0; i < 2; ++i) {
            err[i] = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        }
        const double norm = error_norm(err, y, y_new, settings.rel_tol, settings.abs_tol);

        if (norm > 1.0) {
            ++stats.rejected_steps;
            h = step * std::max(kMinFactor, kSafety * std::pow(norm, -0.2));
            rejected = true;
            continue;
        }

        const double t_new = last ? t_final : t + step;
        if (next < samples && static_cast<double>(next) * dt <= t_new) {
            Vec r2, r3, r4, r5;
            for (std::size_t i = 0; i < 2; ++i) {
                const double ydiff = y_new[i] - y[i];
                const double bspl = step * k1[i] - ydiff;
                r2[i] = ydiff;
                r3[i] = bspl;
                r4[i] = ydiff - step * k7[i] - bspl;
                r5[i] = step * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
            }
            while (next < samples && static_cast<double>(next) * dt <= t_new) {
                const double tk = static_cast<double>(next) * dt;
                const double s = std::clamp((tk - t) / step, 0.0, 1.0);
                const double s1 = 1.0 - s;
                Vec yk;
                for (std::size_t i = 0; i < 2; ++i) {
                    yk[i] = y[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
                }
                store(out, next, tk, yk, params, realization);
                ++next;
            }
        }

        ++stats.accepted_steps;
        stats.min_step = std::min(stats.min_step, step);
        stats.max_step_taken = std::max(stats.max_step_taken, step);

        double factor = norm == 0.0 ? kMaxFactor
                                    : kSafety * std::pow(norm, -kAlpha) * std::pow(err_old, kBeta);
        factor = std::clamp(factor, kMinFactor, kMaxFactor);
        double h_next = step * factor;
        if (rejected) {
            h_next = std::min(h_next, step);
        }
        err_old = std::max(norm, 1e-4);
        rejected = false;

        y = y_new;
        k1 = k7;
        t = t_new;
        h = std::min(h_next, settings.max_step);
        if (last) {
            break;
        }
    }

    // Grid points that round past t_final take the final state.
    while (next < samples) {
        store(out, next, static_cast<double>(next) * dt, y, params, realization);
        ++next;
    }
    stats.rhs_evaluations = f.evaluations;
    return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory) {
    os << "t,theta_e,x0,g,theta_e_dot\n";
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        os << io::format_double(trajectory.times[k]) << ',' << io::format_double(trajectory.states[k].theta_e)
           << ',' << io::format_double(trajectory.states[k].x) << ',' << io::format_double(trajectory.g[k])
           << ',' << io::format_double(trajectory.theta_e_dot[k]) << '\n';
    }
}

}  // namespace pllhb
