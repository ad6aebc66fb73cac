#include "doctest.h"
#include "rfp/collar.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

using namespace rfp;

TEST_CASE("Black-Scholes prices") {
    // Phi(0.1) = 0.539827837277029 from standard tables
    const double expected = 100.0 * (2.0 * 0.539827837277029 - 1.0);
    CHECK(black_scholes_price(OptionKind::call, 100.0, 100.0, 0.0, 0.2) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(black_scholes_price(OptionKind::put, 100.0, 100.0, 0.0, 0.2) == doctest::Approx(expected).epsilon(1e-10));

    // near-deterministic limit
    CHECK(black_scholes_price(OptionKind::call, 100.0, 90.0, 0.03, 1e-6) ==
          doctest::Approx(100.0 - 90.0 * std::exp(-0.03)).epsilon(1e-12));
    CHECK(black_scholes_price(OptionKind::put, 100.0, 90.0, 0.03, 1e-6) <= 1e-12);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> S(20.0, 200.0), K(20.0, 200.0), r(-0.01, 0.1), sig(0.05, 0.8), tau(0.1, 3.0);
    for (int k = 0; k < 500; ++k) {
        const double s = S(rng), kk = K(rng), rr = r(rng), sg = sig(rng), t = tau(rng);
        const double c = black_scholes_price(OptionKind::call, s, kk, rr, sg, t);
        const double p = black_scholes_price(OptionKind::put, s, kk, rr, sg, t);
        CHECK(std::abs((c - p) - (s - kk * std::exp(-rr * t))) <= 1e-9 * s);
    }
    CHECK_THROWS_AS(black_scholes_price(OptionKind::call, 100.0, 100.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("normal CDF accuracy") {
    CHECK(std::abs(standard_normal_cdf(0.0) - 0.5) < 1e-15);
    CHECK(std::abs(standard_normal_cdf(1.0) - 0.841344746068543) < 1e-12);
    CHECK(std::abs(standard_normal_cdf(-2.0) - 0.022750131948179) < 1e-12);
    CHECK(std::abs(standard_normal_cdf(3.5) - 0.999767370920964) < 1e-12);
}

TEST_CASE("collar floor") {
    CHECK(collar_floor(0.05, 1.0, 0.04, 0.0) == doctest::Approx(0.04));
    CHECK(collar_floor(-0.03, 0.6, 0.04, 0.02) == doctest::Approx(-0.026 / 0.6));
    CHECK(collar_floor(0.0, 0.2, 0.04, 0.02) == doctest::Approx(-0.06));
    CHECK_THROWS_AS(collar_floor(0.0, 0.0, 0.04, 0.02), std::invalid_argument);
}

TEST_CASE("self-financing cap") {
    SUBCASE("legs price equally") {
        for (double rf : {0.0, 0.02, 0.05}) {
            for (double F : {-0.2, -0.075, -0.01}) {
                const double C = solve_cap(F, 1.0, rf, 0.2);
                REQUIRE(std::isfinite(C));
                CHECK(C > F);
                const double put = black_scholes_price(OptionKind::put, 1.0, 1.0 + F, rf, 0.2);
                const double call = black_scholes_price(OptionKind::call, 1.0, 1.0 + C, rf, 0.2);
                CHECK(std::abs(put - call) <= 1e-8);
            }
        }
        // zero rate, higher volatility, non-unit spot
        const double C = solve_cap(-0.075, 100.0, 0.0, 0.25);
        CHECK(std::abs(black_scholes_price(OptionKind::put, 100.0, 92.5, 0.0, 0.25) -
                       black_scholes_price(OptionKind::call, 100.0, 100.0 * (1.0 + C), 0.0, 0.25)) <= 1e-8 * 100.0);
    }
    SUBCASE("worthless put leaves the upside open") {
        CHECK(std::isinf(solve_cap(-0.5, 1.0, 0.04, 1e-4)));
    }
    SUBCASE("lower floors give higher caps") {
        CHECK(solve_cap(-0.10, 1.0, 0.03, 0.2) > solve_cap(-0.05, 1.0, 0.03, 0.2));
    }
}

TEST_CASE("collared return") {
    CHECK(collared_return(-0.40, -0.075, 0.2, 0.6, 0.04, 0.02) == doctest::Approx(-0.049));
    // inside the band the clip is inactive
    CHECK(collared_return(0.05, -0.075, 0.2, 0.6, 0.04, 0.02) == doctest::Approx(0.6 * 0.05 + 0.4 * 0.04 - 0.02));
    CHECK(collared_return(0.5, -0.075, 0.2, 1.0, 0.04, 0.0) == doctest::Approx(0.2));
    CHECK(collared_return(0.5, -0.075, std::numeric_limits<double>::infinity(), 1.0, 0.0, 0.0) == doctest::Approx(0.5));
    CHECK_THROWS_AS(collared_return(0.0, 0.1, 0.0, 0.5, 0.0, 0.0), std::invalid_argument);

    // floor guarantee when the formula's cap on F does not bind
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> m(-0.6, 0.6), rmin(-0.05, 0.0), w(0.1, 1.0), rf(0.0, 0.06), infl(0.0, 0.04);
    for (int k = 0; k < 1000; ++k) {
        const double rm = rmin(rng), ww = w(rng), r = rf(rng), i = infl(rng);
        const double F = collar_floor(rm, ww, r, i);
        if (F >= r) continue;
        const double C = solve_cap(F, 1.0, r, 0.2);
        CHECK(collared_return(m(rng), F, C, ww, r, i) >= rm - 1e-12);
    }
}
