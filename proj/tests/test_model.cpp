#include "support.hpp"

#include "pllhb/error.hpp"
#include "pllhb/model.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace pllhb;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

// Roots of omega - K phi(theta) H(0) on [0, 2 pi) by bracketing and bisection.
std::vector<double> equilibrium_phases_oracle(double omega, double k) {
    const auto f = [&](double th) { return omega - k * 0.5 * std::sin(th); };
    std::vector<double> roots;
    const int n = 3600;
    for (int i = 0; i < n; ++i) {
        double lo = 2.0 * kPi * i / n;
        double hi = 2.0 * kPi * (i + 1) / n;
        if (f(lo) == 0.0) {
            roots.push_back(lo);
            continue;
        }
        if (f(lo) * f(hi) >= 0.0) {
            continue;
        }
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
        }
        roots.push_back(0.5 * (lo + hi));
    }
    return roots;
}

}  // namespace

TEST_CASE("lead-lag realization constants") {
    SECTION("equal time constants give unity all-pass") {
        const auto r = realize_lead_lag({0.01, 0.01});
        CHECK(r.c == 0.0);
        CHECK(r.h == 1.0);
    }
    SECTION("paper filter") {
        const auto r = realize_lead_lag({0.0448, 0.0185});
        CHECK(r.a == Approx(-1.0 / 0.0448).epsilon(1e-15));
        CHECK(r.a == Approx(-22.3214).margin(1e-4));
        CHECK(r.b == 1.0);
        CHECK(r.h == Approx(0.412946).margin(1e-6));
        CHECK(r.c == Approx(0.0263 / (0.0448 * 0.0448)).epsilon(1e-12));
        CHECK(r.c == Approx(13.1038).margin(1e-3));
        for (int k = 0; k < 100; ++k) {
            const double w = std::pow(10.0, -2.0 + 6.0 * k / 99.0);
            const auto realized = transfer_function(r, {0.0, w});
            const auto direct = testing::lead_lag_by_hand(0.0448, 0.0185, w);
            CHECK(std::abs(realized - direct) / std::abs(direct) < 1e-12);
        }
    }
    SECTION("pure lag") {
        const auto r = realize_lead_lag({1.0, 0.0});
        CHECK(r.a == -1.0);
        CHECK(r.b == 1.0);
        CHECK(r.c == 1.0);
        CHECK(r.h == 0.0);
    }
    SECTION("invalid time constants") {
        CHECK_THROWS_AS(realize_lead_lag({0.0, 0.01}), ParameterError);
        CHECK_THROWS_AS(realize_lead_lag({-1.0, 0.01}), ParameterError);
        CHECK_THROWS_AS(realize_lead_lag({0.01, -0.01}), ParameterError);
        CHECK_THROWS_AS(realize_lead_lag({std::nan(""), 0.01}), ParameterError);
    }
}

TEST_CASE("realization matches the closed-form transfer function") {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> tau(1e-3, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const LeadLagFilter f{tau(rng), tau(rng)};
        const auto r = realize_lead_lag(f);
        CHECK(r.a < 0.0);
        CHECK(lead_lag_transfer(f, 0.0) == std::complex<double>(1.0, 0.0));
        CHECK(std::abs(transfer_function(r, 0.0) - 1.0) < 1e-14);
        double worst = 0.0;
        for (int k = 0; k < 200; ++k) {
            const double w = std::pow(10.0, -3.0 + 8.0 * k / 199.0);
            const auto realized = transfer_function(r, {0.0, w});
            const auto closed = lead_lag_transfer(f, {0.0, w});
            worst = std::max(worst, std::abs(realized - closed) / std::abs(closed));
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("phase detector characteristic") {
    CHECK(pd_characteristic(0.0) == 0.0);
    CHECK(pd_characteristic(kPi / 2) == 0.5);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> th(-100.0, 100.0);
    for (int i = 0; i < 1000; ++i) {
        const double t = th(rng);
        CHECK(pd_characteristic(-t) == -pd_characteristic(t));
    }
}

TEST_CASE("right-hand side") {
    const auto p = testing::paper_params(178.9);
    const auto r = realize_lead_lag(p.filter);

    SECTION("hand evaluation at x = 0, theta = pi/2") {
        const auto d = rhs({0.0, kPi / 2}, p, r);
        const double h = 0.0185 / 0.0448;
        CHECK(d.theta_e == Approx(178.9 - 250.0 * h * 0.5).epsilon(1e-14));
        CHECK(d.theta_e == Approx(127.28).margin(0.01));
        CHECK(d.x == Approx(0.5).epsilon(1e-15));
    }
    SECTION("vanishes at equilibria") {
        for (double w : {0.0, 10.0, 62.5, -100.0, 124.9}) {
            const auto q = testing::paper_params(w);
            for (const auto& eq : equilibria(q, r)) {
                const auto d = rhs(eq, q, r);
                CHECK(std::abs(d.x) < 1e-12);
                CHECK(std::abs(d.theta_e) < 1e-12);
            }
        }
    }
    SECTION("odd symmetry on random states") {
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> u(-50.0, 50.0);
        for (int i = 0; i < 1000; ++i) {
            auto q = testing::random_params(rng);
            const auto rr = realize_lead_lag(q.filter);
            const SystemState s{u(rng), u(rng)};
            const auto [ms, mq] = apply_symmetry(s, q);
            const auto d = rhs(s, q, rr);
            const auto md = rhs(ms, mq, rr);
            CHECK(md.x == -d.x);
            CHECK(md.theta_e == -d.theta_e);
        }
    }
    SECTION("control signal") {
        const SystemState s{0.3, 1.1};
        CHECK(control_signal(s, r) == r.c * 0.3 + r.h * 0.5 * std::sin(1.1));
    }
}

TEST_CASE("equilibria") {
    const auto r = realize_lead_lag({0.0448, 0.0185});

    SECTION("zero detuning") {
        const auto eq = equilibria(testing::paper_params(0.0), r);
        REQUIRE(eq.size() == 2);
        CHECK(eq[0].theta_e == 0.0);
        CHECK(eq[1].theta_e == Approx(kPi).epsilon(1e-15));
        CHECK(eq[0].x == 0.0);
        CHECK(std::abs(eq[1].x) < 1e-15);
    }
    SECTION("sin theta = 1/2 against a bisection oracle") {
        const auto eq = equilibria(testing::paper_params(62.5), r);
        const auto oracle = equilibrium_phases_oracle(62.5, 250.0);
        REQUIRE(eq.size() == 2);
        REQUIRE(oracle.size() == 2);
        CHECK(eq[0].theta_e == Approx(oracle[0]).margin(1e-12));
        CHECK(eq[1].theta_e == Approx(oracle[1]).margin(1e-12));
        CHECK(eq[0].theta_e == Approx(kPi / 6).margin(1e-14));
        CHECK(eq[1].theta_e == Approx(5 * kPi / 6).margin(1e-14));
    }
    SECTION("no equilibrium beyond the hold-in bound") {
        CHECK(equilibria(testing::paper_params(145.0), r).empty());
        CHECK(equilibria(testing::paper_params(-145.0), r).empty());
    }
    SECTION("count transitions exactly at |2 omega / K| = 1") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> k(1.0, 1000.0);
        for (int i = 0; i < 200; ++i) {
            const double kv = k(rng);
            const double edge = kv / 2.0;
            for (double sign : {1.0, -1.0}) {
                PllParameters p{kv, sign * edge, {0.0448, 0.0185}};
                CHECK(equilibria(p, r).size() == 1);
                p.omega_e_free = sign * std::nextafter(edge, 0.0);
                CHECK(equilibria(p, r).size() == 2);
                p.omega_e_free = sign * std::nextafter(edge, 2.0 * edge);
                CHECK(equilibria(p, r).empty());
            }
        }
    }
    SECTION("phases are reduced to [0, 2 pi)") {
        std::mt19937_64 rng(11);
        for (int i = 0; i < 500; ++i) {
            const auto p = testing::random_params(rng);
            for (const auto& e : equilibria(p, realize_lead_lag(p.filter))) {
                CHECK(e.theta_e >= 0.0);
                CHECK(e.theta_e < 2.0 * kPi);
            }
        }
    }
}

TEST_CASE("odd symmetry map") {
    const auto p = testing::paper_params(0.0);
    const auto [s, q] = apply_symmetry({0.0, 0.0}, p);
    CHECK(s == SystemState{0.0, 0.0});
    CHECK(q.omega_e_free == 0.0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 1000; ++i) {
        auto pp = testing::random_params(rng);
        const SystemState st{u(rng), u(rng)};
        const auto once = apply_symmetry(st, pp);
        const auto twice = apply_symmetry(once.first, once.second);
        CHECK(twice.first == st);
        CHECK(twice.second.omega_e_free == pp.omega_e_free);
    }
}

TEST_CASE("parameter validation") {
    CHECK_NOTHROW(validate(testing::paper_params(178.9)));
    CHECK_THROWS_AS(validate(PllParameters{0.0, 1.0, {0.1, 0.05}}), ParameterError);
    CHECK_THROWS_AS(validate(PllParameters{-5.0, 1.0, {0.1, 0.05}}), ParameterError);
    CHECK_THROWS_AS(validate(PllParameters{250.0, INFINITY, {0.1, 0.05}}), ParameterError);
    CHECK_THROWS_AS(validate(PllParameters{250.0, 1.0, {0.0, 0.05}}), ParameterError);
    CHECK_NOTHROW(validate(PllParameters{250.0, -300.0, {0.1, 0.0}}));
}

TEST_CASE("config text round trip") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 200; ++i) {
        const auto p = testing::random_params(rng);
        const auto q = parse_parameters(to_config_text(p));
        CHECK(q.k_vco == p.k_vco);
        CHECK(q.omega_e_free == p.omega_e_free);
        CHECK(q.filter.tau1 == p.filter.tau1);
        CHECK(q.filter.tau2 == p.filter.tau2);
    }
    const auto p = parse_parameters("# paper filter\nk_vco = 250\nomega_e_free=178.9\n\ntau1=0.0448\ntau2=0.0185\n");
    CHECK(p.k_vco == 250.0);
    CHECK(p.filter.tau2 == 0.0185);
    CHECK_THROWS_AS(parse_parameters("k_vco=250\nomega_e_free=1\ntau1=0.1\n"), ParameterError);
    CHECK_THROWS_AS(parse_parameters("k_vco=abc\nomega_e_free=1\ntau1=0.1\ntau2=0.01\n"), ParameterError);
    CHECK_THROWS_AS(parse_parameters("k_vco=-1\nomega_e_free=1\ntau1=0.1\ntau2=0.01\n"), ParameterError);
}
