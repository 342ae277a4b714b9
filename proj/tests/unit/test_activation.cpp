#include <doctest.h>

#include <cmath>

#include "nsnmf/activation.hpp"
#include "nsnmf/errors.hpp"
#include "nsnmf/random.hpp"

using namespace nsnmf;

TEST_SUITE("activation") {

TEST_CASE("definitions") {
    CHECK(apply(Activation::relu, -1.5) == 0.0);
    CHECK(apply(Activation::relu, 2.25) == 2.25);
    CHECK(apply(Activation::identity, -3.0) == -3.0);
    CHECK(apply(Activation::softplus, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(derivative(Activation::relu, 3.2) == 1.0);
    CHECK(derivative(Activation::relu, 0.0) == 0.0);
    CHECK(derivative(Activation::relu, -0.1) == 0.0);
    CHECK(derivative(Activation::softplus, 0.0) == 0.5);
    CHECK(derivative(Activation::identity, 7.0) == 1.0);
}

TEST_CASE("softplus(40) against extended precision") {
    const long double x = 40.0L;
    const long double ref = x + std::log1p(std::exp(-x));
    const double got = apply(Activation::softplus, 40.0);
    CHECK(std::abs(static_cast<long double>(got) - ref) < 1e-12L);
    CHECK(std::abs(got - 40.0) < 1e-12);
    // Large arguments must not overflow.
    CHECK(apply(Activation::softplus, 800.0) == 800.0);
    CHECK(apply(Activation::softplus, -800.0) >= 0.0);
}

TEST_CASE("softplus derivative matches central differences") {
    Rng rng(17);
    const double h = 1e-5;
    for (int k = 0; k < 50; ++k) {
        const double x = rng.uniform(-5.0, 5.0);
        const double fd = (apply(Activation::softplus, x + h) - apply(Activation::softplus, x - h)) / (2 * h);
        const double d = derivative(Activation::softplus, x);
        CHECK(std::abs(d - fd) <= 1e-6 * std::abs(d));
    }
}

TEST_CASE("derivatives away from the kink, every kind") {
    Rng rng(3);
    const double h = 1e-5;
    for (auto kind : {Activation::relu, Activation::softplus, Activation::identity}) {
        for (int k = 0; k < 200; ++k) {
            const double x = rng.uniform(-10.0, 10.0);
            if (std::abs(x) <= 1e-4) continue;
            const double fd = (apply(kind, x + h) - apply(kind, x - h)) / (2 * h);
            CHECK(std::abs(derivative(kind, x) - fd) <= 1e-5);
        }
    }
}

TEST_CASE("range and monotonicity") {
    Rng rng(8);
    double prev = apply(Activation::softplus, -30.0);
    for (double x = -29.5; x <= 30.0; x += 0.5) {
        const double y = apply(Activation::softplus, x);
        CHECK(y > 0.0);
        CHECK(y > prev);
        prev = y;
    }
    for (int k = 0; k < 100; ++k) {
        const double x = rng.uniform(-100.0, 100.0);
        CHECK(apply(Activation::relu, x) >= 0.0);
        if (x >= 0) CHECK(apply(Activation::relu, x) == x);
    }
}

TEST_CASE("non-finite input and names") {
    CHECK_THROWS_AS(apply(Activation::softplus, std::nan("")), NumericDomainError);
    CHECK_THROWS_AS(derivative(Activation::relu, INFINITY), NumericDomainError);
    for (auto kind : {Activation::relu, Activation::softplus, Activation::identity})
        CHECK(parse_activation(activation_name(kind)) == kind);
    CHECK_THROWS_AS(parse_activation("tanh"), ConfigError);
}

}  // TEST_SUITE
