#include "support.hpp"

#include "pllhb/error.hpp"
#include "pllhb/special.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace pllhb;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("Bessel values at the origin") {
    CHECK(bessel_j(0, 0.0) == 1.0);
    CHECK(bessel_j(1, 0.0) == 0.0);
    CHECK(bessel_j(2, 0.0) == 0.0);
    CHECK(bessel_j(1, 1e-6) / 1e-6 == Approx(0.5).margin(1e-10));
}

TEST_CASE("J0(1) against the 50-term series oracle") {
    const double oracle = static_cast<double>(testing::bessel_series_oracle(0, 1.0L));
    CHECK(std::abs(oracle - 0.76519768655796655) < 1e-16);
    CHECK(std::abs(bessel_j(0, 1.0) - oracle) < 1e-14);
}

TEST_CASE("Bessel series against independent oracles on the domain") {
    for (int n = 0; n <= 2; ++n) {
        double worst_series = 0.0;
        double worst_std = 0.0;
        for (int k = 0; k <= 2000; ++k) {
            const double x = -10.0 + 20.0 * k / 2000.0;
            const double v = bessel_j(n, x);
            worst_series = std::max(worst_series,
                                    std::abs(v - static_cast<double>(testing::bessel_series_oracle(n, x))));
            const double ref = std::cyl_bessel_j(static_cast<double>(n), std::abs(x)) * ((n % 2 == 1 && x < 0) ? -1 : 1);
            worst_std = std::max(worst_std, std::abs(v - ref));
        }
        INFO("order " << n);
        CHECK(worst_series < 1e-14);
        CHECK(worst_std < 1e-14);
    }
}

TEST_CASE("Bessel identity and recurrence") {
    double worst_identity = 0.0;
    double worst_recurrence = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double x = 1e-3 + (10.0 - 1e-3) * k / 999.0;
        const double j0 = bessel_j(0, x);
        const double j1 = bessel_j(1, x);
        const double j2 = bessel_j(2, x);
        worst_identity = std::max(worst_identity, std::abs(j0 + j2 - 2.0 * j1 / x));
        worst_recurrence = std::max(worst_recurrence, std::abs(j2 - (2.0 / x * j1 - j0)));
    }
    CHECK(worst_identity < 1e-12);
    CHECK(worst_recurrence < 1e-12);
}

TEST_CASE("Bessel domain errors") {
    CHECK_THROWS_AS(bessel_j(3, 1.0), DomainError);
    CHECK_THROWS_AS(bessel_j(-1, 1.0), DomainError);
    CHECK_THROWS_AS(bessel_j(0, 10.5), DomainError);
    CHECK_THROWS_AS(bessel_j(1, -11.0), DomainError);
    CHECK_NOTHROW(bessel_j(2, 10.0));
}

TEST_CASE("lead-lag frequency response") {
    const LeadLagFilter f{0.0448, 0.0185};
    SECTION("DC") {
        const auto r = lead_lag_response(f, 0.0);
        CHECK(r.magnitude == 1.0);
        CHECK(r.phase == 0.0);
    }
    SECTION("high-frequency asymptote") {
        CHECK(lead_lag_response(f, 1e8).magnitude == Approx(0.0185 / 0.0448).margin(1e-4));
        CHECK(0.0185 / 0.0448 == Approx(0.412946).margin(1e-6));
    }
    SECTION("omega = 110 against complex division by hand") {
        const auto r = lead_lag_response(f, 110.0);
        const auto h = testing::lead_lag_by_hand(0.0448, 0.0185, 110.0);
        CHECK(r.magnitude == Approx(std::hypot(h.real(), h.imag())).epsilon(1e-14));
        CHECK(r.phase == Approx(std::atan2(h.imag(), h.real())).epsilon(1e-14));
    }
    SECTION("monotone magnitude, non-positive phase, bounded range") {
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> tau(1e-3, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            double t1 = tau(rng);
            double t2 = tau(rng);
            if (t2 > t1) {
                std::swap(t1, t2);
            }
            const LeadLagFilter g{t1, t2};
            double prev = 2.0;
            for (int k = 0; k < 300; ++k) {
                const double w = std::pow(10.0, -3.0 + 8.0 * k / 299.0);
                const auto r = lead_lag_response(g, w);
                CHECK(r.magnitude <= prev);
                CHECK(r.phase <= 0.0);
                CHECK(r.phase > -kPi / 2);
                CHECK(r.magnitude <= 1.0);
                CHECK(r.magnitude >= t2 / t1 * (1.0 - 1e-15));
                prev = r.magnitude;
            }
        }
    }
}

TEST_CASE("first-harmonic coefficients") {
    SECTION("zero modulation") {
        const auto c = first_harmonic_coeffs(0.0, kPi / 3);
        CHECK(c.dc == 0.0);
        CHECK(c.cos1 == Approx(0.25).epsilon(1e-15));
        CHECK(c.sin1 == Approx(-std::sqrt(3.0) / 4).epsilon(1e-15));
    }
    SECTION("theta = 0 has no sine part") {
        for (double beta : {0.1, 0.5, 1.0, 1.5, 3.0}) {
            CHECK(first_harmonic_coeffs(beta, 0.0).sin1 == 0.0);
        }
    }
    SECTION("parity in theta") {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> b(0.0, 2.0);
        std::uniform_real_distribution<double> t(-10.0, 10.0);
        for (int i = 0; i < 500; ++i) {
            const double beta = b(rng);
            const double theta = t(rng);
            const auto p = first_harmonic_coeffs(beta, theta);
            const auto m = first_harmonic_coeffs(beta, -theta);
            CHECK(m.dc == p.dc);
            CHECK(m.cos1 == p.cos1);
            CHECK(m.sin1 == -p.sin1);
        }
    }
    SECTION("fixed point against the quadrature oracle") {
        const auto c = first_harmonic_coeffs(0.785, 0.7088);
        const auto q = fourier_oracle(0.785, 0.7088);
        CHECK(std::abs(c.dc - q.dc) < 1e-10);
        CHECK(std::abs(c.cos1 - q.cos1) < 1e-10);
        CHECK(std::abs(c.sin1 - q.sin1) < 1e-10);
    }
    SECTION("50 x 50 grid against the quadrature oracle") {
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const double beta = 1.5 * i / 49.0;
            for (int j = 0; j < 50; ++j) {
                const double theta = 2.0 * kPi * j / 49.0;
                const auto c = first_harmonic_coeffs(beta, theta);
                const auto q = fourier_oracle(beta, theta);
                worst = std::max({worst, std::abs(c.dc - q.dc), std::abs(c.cos1 - q.cos1),
                                  std::abs(c.sin1 - q.sin1)});
            }
        }
        CHECK(worst < 1e-10);
    }
    SECTION("domain error propagates") { CHECK_THROWS_AS(first_harmonic_coeffs(12.0, 0.0), DomainError); }
}

TEST_CASE("quadrature oracle") {
    SECTION("zero modulation is a pure sinusoid") {
        for (double theta : {0.0, 0.3, 2.0, 5.5}) {
            const auto q = fourier_oracle(0.0, theta);
            CHECK(std::abs(q.dc) < 1e-14);
            CHECK(q.cos1 == Approx(0.5 * std::cos(theta)).margin(1e-14));
            CHECK(q.sin1 == Approx(-0.5 * std::sin(theta)).margin(1e-14));
        }
    }
    SECTION("quarter-turn phase has no DC") { CHECK(std::abs(fourier_oracle(1.0, kPi / 2).dc) < 1e-14); }
    SECTION("halving the nodes barely moves the result") {
        for (double beta : {0.2, 0.785, 1.5}) {
            const auto fine = fourier_oracle(beta, 0.7088, 10000);
            const auto coarse = fourier_oracle(beta, 0.7088, 5000);
            CHECK(std::abs(fine.dc - coarse.dc) < 1e-11);
            CHECK(std::abs(fine.cos1 - coarse.cos1) < 1e-11);
            CHECK(std::abs(fine.sin1 - coarse.sin1) < 1e-11);
        }
    }
    SECTION("odd interval count is rejected") { CHECK_THROWS_AS(fourier_oracle(0.5, 0.1, 9999), ParameterError); }
}
