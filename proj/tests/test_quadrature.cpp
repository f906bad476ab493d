#include "doctest.h"

#include <cmath>

#include "shortfall/model.hpp"
#include "shortfall/quadrature.hpp"

using namespace shortfall;

TEST_CASE("gauss-legendre integrates polynomials exactly") {
    const auto rule = gauss_legendre(5, 0.0, 2.0);
    REQUIRE(rule.size() == 5);
    double mass = 0.0, p9 = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        mass += rule.weights[i];
        p9 += rule.weights[i] * std::pow(rule.nodes[i], 9);
        CHECK(rule.nodes[i] > 0.0);
        CHECK(rule.nodes[i] < 2.0);
        if (i > 0) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
    }
    CHECK(mass == doctest::Approx(2.0).epsilon(1e-14));
    // degree 2n-1 = 9 is still exact: int_0^2 x^9 dx = 2^10/10
    CHECK(p9 == doctest::Approx(1024.0 / 10.0).epsilon(1e-13));
    CHECK_THROWS_AS(gauss_legendre(0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(gauss_legendre(4, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("gauss-legendre handles large node counts") {
    const auto rule = gauss_legendre(128, -1.0, 1.0);
    double mass = 0.0, smooth = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        mass += rule.weights[i];
        smooth += rule.weights[i] * std::exp(rule.nodes[i]);
    }
    CHECK(mass == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(smooth == doctest::Approx(std::exp(1.0) - std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("gauss-hermite matches standard normal moments") {
    const auto rule = gauss_hermite_prob(10);
    double mass = 0.0, m1 = 0.0, m2 = 0.0, m4 = 0.0, m18 = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double x = rule.nodes[i];
        const double w = rule.weights[i];
        mass += w;
        m1 += w * x;
        m2 += w * x * x;
        m4 += w * std::pow(x, 4);
        m18 += w * std::pow(x, 18);
        if (i > 0) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::fabs(m1) < 1e-14);
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-13));
    // E[Z^18] = 17!! ; degree 18 < 2*10 so still exact
    CHECK(m18 == doctest::Approx(34459425.0).epsilon(1e-10));
}

TEST_CASE("gauss-hermite reproduces lognormal means") {
    const auto rule = gauss_hermite_prob(40);
    const double sigma = 0.28, dt = 1.0 / 250.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
        mean += rule.weights[i] *
                std::exp(sigma * std::sqrt(dt) * rule.nodes[i] - 0.5 * sigma * sigma * dt);
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("scaled beta quadrature reproduces analytic moments") {
    const auto law = ShapingLaw::scaled_beta(114.0, 227.0, 3.0);
    const auto rule = law.quadrature(128);
    REQUIRE(rule.size() == 128);
    double mass = 0.0, mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        mass += rule.weights[i];
        mean += rule.weights[i] * rule.nodes[i];
        m2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
    }
    const double exact_mean = 3.0 * 114.0 / 341.0;
    const double exact_var = 9.0 * 114.0 * 227.0 / (341.0 * 341.0 * 342.0);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mean == doctest::Approx(exact_mean).epsilon(1e-12));
    CHECK(m2 - mean * mean == doctest::Approx(exact_var).epsilon(1e-9));
    CHECK(law.mean() == doctest::Approx(exact_mean).epsilon(1e-15));
}
