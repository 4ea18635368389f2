#include <random>
#include <vector>

#include "doctest.h"
#include "feel/error.hpp"
#include "feel/latency.hpp"

using namespace feel;
using namespace feel::latency;

TEST_SUITE("latency") {
  TEST_CASE("cpu compute latency") {
    ModelCost c;
    c.cycles_per_sample = 1e7;
    CHECK(cpu_compute_latency(128, c, {0.7e9}) == doctest::Approx(1.828571).epsilon(1e-6));
    c.cycles_per_sample = 2e7;
    CHECK(cpu_compute_latency(100, c, {1.4e9}) == doctest::Approx(1.428571).epsilon(1e-6));
    CHECK(cpu_compute_latency(0, c, {1.4e9}) == 0.0);
    CHECK_THROWS_AS(cpu_compute_latency(-1, c, {1.4e9}), InvalidArgument);
  }

  TEST_CASE("transmission latency") {
    CHECK(transmission_latency(3.2e7, 0.01, 0.001, 5e7) == doctest::Approx(6.4));
    CHECK(transmission_latency(3.2e7, 0.01, 0.01, 5e7) == doctest::Approx(3.2e7 / 5e7));
    CHECK_THROWS_AS(transmission_latency(3.2e7, 0.01, 0.0, 5e7), Infeasible);
    CHECK_THROWS_AS(transmission_latency(3.2e7, 0.01, 0.02, 5e7), InvalidArgument);
    CHECK(transmission_latency_whole_frames(3.2e7, 0.01, 0.001, 5e7) ==
          doctest::Approx(6.4).epsilon(1e-12));
    // 653.06 frames are charged as 654
    CHECK(transmission_latency_whole_frames(3.2e7, 0.01, 0.001, 4.9e7) ==
          doctest::Approx(6.54).epsilon(1e-12));
  }

  TEST_CASE("update latencies") {
    ModelCost c;
    c.update_cycles = 7e8;
    CHECK(cpu_update_latency(c, {0.7e9}) == doctest::Approx(1.0));
    CHECK(cpu_update_latency(c, {1.4e9}) == doctest::Approx(0.5));
    GpuProfile g;
    c.update_flops = 5e9;
    g.gpu_flops = 1e13;
    CHECK(gpu_update_latency(c, g) == doctest::Approx(5e-4));
  }

  TEST_CASE("gpu compute latency is flat then linear") {
    GpuProfile g;
    g.flat_latency_s = 0.05;
    g.slope_s_per_sample = 0.001;
    g.threshold_batch = 32;
    CHECK(gpu_compute_latency(64, g, 128) == doctest::Approx(0.082));
    CHECK(gpu_compute_latency(32, g, 128) == doctest::Approx(0.05));
    CHECK(gpu_compute_latency(1, g, 128) == doctest::Approx(0.05));
    CHECK_THROWS_AS(gpu_compute_latency(0.5, g, 128), InvalidArgument);
    CHECK_THROWS_AS(gpu_compute_latency(129, g, 128), InvalidArgument);
    double prev = 0.0;
    for (int b = 1; b <= 128; ++b) {
      const double t = gpu_compute_latency(b, g, 128);
      CHECK(t >= prev);
      prev = t;
    }
  }

  TEST_CASE("round latency aggregation") {
    std::vector<DeviceLatency> one = {{0.1, 0.2, 0.3, 0.4}};
    CHECK(round_latency(one).round_total_s == doctest::Approx(1.0));
    std::vector<DeviceLatency> two = {{1, 1, 1, 1}, {2, 2, 2, 2}};
    const LatencyBreakdown r = round_latency(two);
    CHECK(r.round_total_s == 8.0);
    CHECK(r.uplink_period_s == 4.0);
    CHECK(r.downlink_period_s == 4.0);
    CHECK_THROWS_AS(round_latency(std::vector<DeviceLatency>{}), InvalidArgument);
    std::vector<DeviceLatency> neg = {{-1, 0, 0, 0}};
    CHECK_THROWS_AS(round_latency(neg), InvalidArgument);
  }

  TEST_CASE("round latency equals a recomputed max-sum and is monotone") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int t = 0; t < 200; ++t) {
      std::vector<DeviceLatency> d(6);
      for (auto& x : d) x = {u(rng), u(rng), u(rng), u(rng)};
      double up = 0.0, down = 0.0;
      for (const auto& x : d) {
        up = std::max(up, x.compute_s + x.upload_s);
        down = std::max(down, x.download_s + x.update_s);
      }
      const double total = round_latency(d).round_total_s;
      CHECK(total == doctest::Approx(up + down).epsilon(1e-15));
      d[t % 6].upload_s += 0.5;
      CHECK(round_latency(d).round_total_s >= total);
    }
  }

  TEST_CASE("profile validation") {
    CHECK_THROWS_AS(validate(CpuProfile{0.0}), InvalidArgument);
    GpuProfile g;
    g.threshold_batch = 200;
    CHECK_THROWS_AS(validate(g, 128), InvalidArgument);
    ModelCost c;
    c.param_count = 0;
    CHECK_THROWS_AS(validate(c), InvalidArgument);
    CHECK(ModelCost{}.gradient_bits() == 32.0 * 8062504);
  }
}
