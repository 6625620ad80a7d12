#include <doctest.h>

#include "morphon/tensor.hpp"
#include "oracles.hpp"

using morphon::Tensor;
using oracle::make_image;

TEST_CASE("elementwise_mul basics") {
    const Tensor a = make_image({{1, 2}, {3, 4}});

    SUBCASE("zero annihilator") {
        const Tensor z = make_image({{0, 0}, {0, 0}});
        const Tensor r = morphon::elementwise_mul(a, z);
        for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == 0.0);
    }
    SUBCASE("identity") {
        const Tensor ones = make_image({{1, 1}, {1, 1}});
        const Tensor r = morphon::elementwise_mul(a, ones);
        for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == a[i]);
    }
    SUBCASE("scalar products") {
        const Tensor r = morphon::elementwise_mul(make_image({{2, 3}}), make_image({{4, 5}}));
        CHECK(r[0] == 8.0);
        CHECK(r[1] == 15.0);
    }
    SUBCASE("shape mismatch names both shapes") {
        const Tensor b = make_image({{1, 2, 3}});
        CHECK_THROWS_WITH_AS(morphon::elementwise_mul(a, b),
                             "elementwise_mul: shape mismatch 1x2x2 vs 1x1x3",
                             std::invalid_argument);
    }
}

TEST_CASE("statistics") {
    CHECK(morphon::mean(make_image({{1, 3}})) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(morphon::variance(make_image({{7, 7, 7}})) == 0.0);

    const Tensor x = make_image({{1, 2}, {3, 4}});
    CHECK(morphon::covariance(x, x) == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(morphon::variance(x) == doctest::Approx(1.25).epsilon(1e-15));

    CHECK_THROWS_AS(morphon::mean(Tensor{}), std::invalid_argument);
    CHECK_THROWS_AS(morphon::covariance(x, make_image({{1, 2}})), std::invalid_argument);
}

TEST_CASE("statistics properties") {
    morphon::Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = oracle::random_tensor(rng, 1, 4, 5, -2.0, 2.0);
        const Tensor b = oracle::random_tensor(rng, 1, 4, 5, -2.0, 2.0);
        const double k = rng.uniform(-3.0, 3.0);

        Tensor shifted = a;
        Tensor scaled = a;
        for (std::size_t i = 0; i < a.size(); ++i) {
            shifted[i] += k;
            scaled[i] *= k;
        }
        CHECK(morphon::mean(shifted) == doctest::Approx(morphon::mean(a) + k).epsilon(1e-12));
        CHECK(morphon::variance(shifted) == doctest::Approx(morphon::variance(a)).epsilon(1e-10));
        CHECK(morphon::variance(scaled) ==
              doctest::Approx(k * k * morphon::variance(a)).epsilon(1e-10));
        CHECK(morphon::covariance(a, b) == doctest::Approx(morphon::covariance(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("crop") {
    const Tensor a = make_image({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    const Tensor c = morphon::crop(a, 1, 1, 2, 2);
    CHECK(c.at(0, 0, 0) == 5.0);
    CHECK(c.at(0, 1, 1) == 9.0);
    CHECK_THROWS_AS(morphon::crop(a, 2, 2, 2, 2), std::invalid_argument);
}
