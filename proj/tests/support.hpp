#pragma once

#include "pllhb/model.hpp"

#include <cmath>
#include <complex>
#include <random>

namespace testing {

inline pllhb::PllParameters paper_params(double omega_e_free) { return {250.0, omega_e_free, {0.0448, 0.0185}}; }

/// Fixed 50-term Bessel series in long double, summed from the smallest term up.
inline long double bessel_series_oracle(int n, long double x) {
    long double terms[50];
    const long double half = x / 2.0L;
    long double t = std::pow(half, n);
    for (int k = 1; k <= n; ++k) {
        t /= static_cast<long double>(k);
    }
    for (int m = 0; m < 50; ++m) {
        terms[m] = t;
        t *= -half * half / (static_cast<long double>(m + 1) * static_cast<long double>(m + 1 + n));
    }
    long double sum = 0.0L;
    for (int m = 49; m >= 0; --m) {
        sum += terms[m];
    }
    return sum;
}

/// (1 + i tau2 w) / (1 + i tau1 w) by explicit real arithmetic.
inline std::complex<double> lead_lag_by_hand(double tau1, double tau2, double w) {
    const double den = 1.0 + tau1 * tau1 * w * w;
    const double re = (1.0 + tau1 * tau2 * w * w) / den;
    const double im = (tau2 * w - tau1 * w) / den;
    return {re, im};
}

inline pllhb::PllParameters random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> k(50.0, 500.0);
    std::uniform_real_distribution<double> tau1(0.005, 0.2);
    std::uniform_real_distribution<double> ratio(0.05, 0.95);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    pllhb::PllParameters p;
    p.k_vco = k(rng);
    p.filter.tau1 = tau1(rng);
    p.filter.tau2 = ratio(rng) * p.filter.tau1;
    p.omega_e_free = unit(rng) * p.k_vco;
    return p;
}

}  // namespace testing
