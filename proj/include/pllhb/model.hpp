#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pllhb {

/// Lead-lag loop filter H(s) = (1 + tau2 s) / (1 + tau1 s), unit DC gain.
///
/// tau1 must be positive. tau2 may be zero, which degenerates to the pure
/// lag 1 / (1 + tau1 s).
struct LeadLagFilter {
    double tau1 = 0.0;  ///< s
    double tau2 = 0.0;  ///< s
};

/// Loop parameters in the signal's phase space.
struct PllParameters {
    double k_vco = 0.0;         ///< VCO gain, rad/s per unit control signal
    double omega_e_free = 0.0;  ///< reference minus VCO free-running frequency, rad/s
    LeadLagFilter filter;
};

/// First-order state-space realization (a, b, c, h) of the loop filter:
///   x' = a x + b u,  g = c x + h u,  H(s) = -c (a - s)^-1 b + h.
/// Only n = 1 is supported; every lead-lag filter has a scalar realization.
struct FilterRealization {
    double a = 0.0;  ///< 1/s
    double b = 0.0;
    double c = 0.0;  ///< 1/s
    double h = 0.0;
};

/// Point of the phase space: filter state and the unwrapped phase error.
/// Also used for state derivatives, which share the shape.
struct SystemState {
    double x = 0.0;
    double theta_e = 0.0;  ///< rad, never reduced mod 2 pi

    friend bool operator==(const SystemState&, const SystemState&) = default;
};

void validate(const LeadLagFilter& filter);
void validate(const PllParameters& params);

FilterRealization realize_lead_lag(const LeadLagFilter& filter);

/// Transfer function of a realization at complex frequency s.
std::complex<double> transfer_function(const FilterRealization& r, std::complex<double> s);

/// Closed form (1 + tau2 s) / (1 + tau1 s).
std::complex<double> lead_lag_transfer(const LeadLagFilter& filter, std::complex<double> s);

/// Sinusoidal phase-detector characteristic, sin(theta) / 2.
inline double pd_characteristic(double theta_e) { return 0.5 * std::sin(theta_e); }

/// Right-hand side of the closed-loop equations.
inline SystemState rhs(const SystemState& s, const PllParameters& p, const FilterRealization& r) {
    const double phi = pd_characteristic(s.theta_e);
    return {r.a * s.x + r.b * phi, p.omega_e_free - p.k_vco * (r.c * s.x + r.h * phi)};
}

/// Filter output g = c x + h phi(theta_e).
inline double control_signal(const SystemState& s, const FilterRealization& r) {
    return r.c * s.x + r.h * pd_characteristic(s.theta_e);
}

/// Equilibria with theta_e in [0, 2 pi). Empty when |2 omega_e_free / k_vco| > 1.
std::vector<SystemState> equilibria(const PllParameters& p, const FilterRealization& r);

/// The odd symmetry (omega_e_free, x, theta_e) -> (-omega_e_free, -x, -theta_e).
std::pair<SystemState, PllParameters> apply_symmetry(const SystemState& s, const PllParameters& p);

/// Flat key=value text with keys k_vco, omega_e_free, tau1, tau2.
std::string to_config_text(const PllParameters& p);
PllParameters parse_parameters(std::string_view text);

}  // namespace pllhb
