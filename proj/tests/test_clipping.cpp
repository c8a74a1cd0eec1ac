#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "fedsim/clipping.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

TEST_CASE("clip passthrough below the threshold") {
  const auto rep = clip({3, 4}, 10.0);
  CHECK(rep.output == ParamVector{3, 4});
  CHECK_FALSE(rep.was_clipped);
  CHECK(rep.input_norm == doctest::Approx(5.0));
}

TEST_CASE("clip rescales to the threshold") {
  const auto rep = clip({3, 4}, 2.5);
  CHECK(rep.was_clipped);
  CHECK(rep.input_norm == doctest::Approx(5.0));
  CHECK(rep.output[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(rep.output[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(vec_norm(rep.output) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("zero vector passes through unclipped") {
  const auto rep = clip({0, 0}, 1.0);
  CHECK(rep.output == ParamVector{0, 0});
  CHECK_FALSE(rep.was_clipped);
  CHECK(rep.input_norm == 0.0);
}

TEST_CASE("clip rejects bad inputs") {
  CHECK_THROWS_AS(clip({1, 2}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(clip({1, 2}, -1.0), std::invalid_argument);
  const double inf = std::numeric_limits<double>::infinity();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(clip({1, inf}, 1.0), std::domain_error);
  CHECK_THROWS_AS(clip({nan}, 1.0), std::domain_error);
}

TEST_CASE("randomized clipping properties") {
  RngStream rng(2024);
  int clipped_seen = 0;
  for (int i = 0; i < 10000; ++i) {
    RngStream it = rng.child(i);
    const int d = 1 + static_cast<int>(it.uniform_index(8));
    ParamVector v(d);
    for (double& x : v) x = std::tan(3.1 * (it.uniform() - 0.5));  // heavy spread
    const double lambda = 0.01 + 10.0 * it.uniform();
    const auto rep = clip(v, lambda);

    // norm cap (exact by construction, allow the specified slack)
    REQUIRE(vec_norm(rep.output) <= lambda + 1e-10);
    // flag definition
    REQUIRE(rep.was_clipped == (rep.input_norm > lambda));
    // norm preserved or reduced to lambda
    const double expect = std::min(rep.input_norm, lambda);
    if (expect > 0.0) {
      REQUIRE(vec_norm(rep.output) == doctest::Approx(expect).epsilon(1e-12));
    }

    // exact idempotence
    const auto rep2 = clip(rep.output, lambda);
    REQUIRE(rep2.output == rep.output);
    REQUIRE_FALSE(rep2.was_clipped);

    // direction preservation: output x v == 0 (pairwise 2x2 minors)
    double residual = 0.0;
    for (int a = 0; a < d; ++a) {
      for (int b = a + 1; b < d; ++b) {
        residual = std::max(residual,
                            std::abs(rep.output[a] * v[b] - rep.output[b] * v[a]));
      }
    }
    const double scale_ref = std::max(1.0, rep.input_norm * rep.input_norm);
    REQUIRE(residual / scale_ref < 1e-10);
    if (rep.was_clipped) ++clipped_seen;

    // positive homogeneity of the decision
    const double s = 0.25 + 4.0 * it.uniform();
    const auto scaled = clip(vec_scale(v, s), s * lambda);
    REQUIRE(scaled.was_clipped == rep.was_clipped);
    for (int j = 0; j < d; ++j) {
      REQUIRE(scaled.output[j] ==
              doctest::Approx(s * rep.output[j]).epsilon(1e-12));
    }
  }
  CHECK(clipped_seen > 1000);  // the case mix actually exercises both branches
}
