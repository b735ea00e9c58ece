#pragma once

#include "pllhb/model.hpp"

namespace pllhb {

/// Largest |x| accepted by bessel_j.
inline constexpr double kBesselDomain = 10.0;

/// Bessel function of the first kind J_n(x), n in {0, 1, 2}, by its power
/// series. Throws DomainError for other orders or |x| > kBesselDomain.
double bessel_j(int order, double x);

/// Gain and phase of the loop filter at a real frequency.
struct FrequencyResponse {
    double magnitude = 1.0;  ///< |H(i omega)|
    double phase = 0.0;      ///< arg H(i omega), rad
};

FrequencyResponse lead_lag_response(const LeadLagFilter& filter, double omega);

/// Coefficients of 1, cos(wt), sin(wt) in the phase-detector output
/// sin(wt + theta + pi/2 - beta sin wt) / 2.
struct HarmonicCoefficients {
    double dc = 0.0;
    double cos1 = 0.0;
    double sin1 = 0.0;
};

/// Closed form from the truncated Jacobi-Anger expansion.
HarmonicCoefficients first_harmonic_coeffs(double beta, double theta);

/// The same coefficients by composite Simpson quadrature over one period.
/// Independent of the Bessel path; used as its oracle.
HarmonicCoefficients fourier_oracle(double beta, double theta, int intervals = 10000);

}  // namespace pllhb
