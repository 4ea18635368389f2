#include <cmath>
#include <vector>

#include "doctest.h"
#include "feel/error.hpp"
#include "feel/loss.hpp"

using namespace feel;
using namespace feel::loss;

TEST_SUITE("loss") {
  TEST_CASE("loss decay") {
    LossProxy p;
    p.xi = 0.1;
    CHECK(loss_decay(p, 64) == doctest::Approx(0.8));
    CHECK(loss_decay(p, 1) == doctest::Approx(0.1));
    CHECK_THROWS_AS(loss_decay(p, 0.5), InvalidArgument);
    p.xi = 0.0;
    CHECK_THROWS_AS(loss_decay(p, 4), InvalidArgument);
  }

  TEST_CASE("loss decay is increasing and concave") {
    LossProxy p;
    for (double b = 1; b < 500; b += 1.0) {
      const double a = loss_decay(p, b), m = loss_decay(p, b + 1), c = loss_decay(p, b + 2);
      CHECK(m > a);
      CHECK(c - m < m - a);
    }
  }

  TEST_CASE("learning rate scaling") {
    LearningRateRule r;
    CHECK(learning_rate(r, 64) == doctest::Approx(0.1));
    CHECK(learning_rate(r, 256) == doctest::Approx(0.2));
    r.reference_batch = 0.5;
    CHECK_THROWS_AS(learning_rate(r, 4), InvalidArgument);
  }

  TEST_CASE("learning efficiency") {
    CHECK(learning_efficiency(0.8, 2.0) == doctest::Approx(0.4));
    CHECK(learning_efficiency(0.0, 3.0) == 0.0);
    CHECK(learning_efficiency(1.6, 4.0) == doctest::Approx(learning_efficiency(0.8, 2.0)));
    CHECK_THROWS_AS(learning_efficiency(0.8, 0.0), InvalidArgument);
  }

  TEST_CASE("next loss is clamped at the floor") {
    LossProxy p;
    p.floor_loss = 0.5;
    CHECK(next_loss(p, 2.0, 0.3) == doctest::Approx(1.7));
    CHECK(next_loss(p, 0.6, 0.3) == 0.5);
    p.floor_loss = 3.0;
    CHECK_THROWS_AS(validate(p), InvalidArgument);
  }

  TEST_CASE("xi calibration recovers the generating coefficient") {
    std::vector<DecaySample> s;
    for (double b : {4.0, 16.0, 64.0, 256.0}) s.push_back({b, 0.037 * std::sqrt(b)});
    CHECK(calibrate_xi(s) == doctest::Approx(0.037).epsilon(1e-12));
    CHECK_THROWS_AS(calibrate_xi(std::vector<DecaySample>{}), InvalidArgument);
    CHECK_THROWS_AS(calibrate_xi(std::vector<DecaySample>{{4.0, -1.0}}), InvalidArgument);
  }
}
