#include "pllhb/special.hpp"

#include "pllhb/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pllhb {

double bessel_j(int order, double x) {
    if (order < 0 || order > 2) {
        throw DomainError("bessel_j: order " + std::to_string(order) + " not supported");
    }
    if (!(std::abs(x) <= kBesselDomain)) {
        throw DomainError("bessel_j: |x| > 10 outside the series domain");
    }
    // Terms peak near m = |x|/2 at a few hundred for |x| = 10; the extended
    // accumulator keeps the cancellation error below 1e-16.
    const long double half = 0.5L * x;
    const long double q = -half * half;
    long double term = 1.0L;
    for (int k = 1; k <= order; ++k) {
        term *= half / k;
    }
    long double sum = term;
    for (int m = 1; m < 200; ++m) {
        term *= q / (static_cast<long double>(m) * (m + order));
        sum += term;
        if (std::abs(term) <= 1e-17L * std::abs(sum)) {
            break;
        }
    }
    return static_cast<double>(sum);
}

FrequencyResponse lead_lag_response(const LeadLagFilter& filter, double omega) {
    const std::complex<double> h = lead_lag_transfer(filter, {0.0, omega});
    return {std::abs(h), std::arg(h)};
}

HarmonicCoefficients first_harmonic_coeffs(double beta, double theta) {
    const double j0 = bessel_j(0, beta);
    const double j1 = bessel_j(1, beta);
    const double j2 = bessel_j(2, beta);
    return {0.5 * j1 * std::cos(theta), 0.5 * (j0 + j2) * std::cos(theta),
            -0.5 * (j0 - j2) * std::sin(theta)};
}

HarmonicCoefficients fourier_oracle(double beta, double theta, int intervals) {
    if (intervals < 2 || intervals % 2 != 0) {
        throw ParameterError("fourier_oracle: interval count must be even and >= 2");
    }
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double step = two_pi / intervals;
    double dc = 0.0;
    double c1 = 0.0;
    double s1 = 0.0;
    for (int k = 0; k <= intervals; ++k) {
        const double s = k * step;
        const double weight = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        const double f = 0.5 * std::cos(s + theta - beta * std::sin(s));
        dc += weight * f;
        c1 += weight * f * std::cos(s);
        s1 += weight * f * std::sin(s);
    }
    const double scale = step / 3.0;
    return {scale * dc / two_pi, scale * c1 / std::numbers::pi, scale * s1 / std::numbers::pi};
}

}  // namespace pllhb
