#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "feel/error.hpp"
#include "feel/simulator.hpp"

using namespace feel;

namespace {

sim::ScenarioConfig small() {
  sim::ScenarioConfig c;
  c.device_count = 4;
  c.rounds = 20;
  c.channel.mc_samples = 2000;
  c.round_fading_samples = 64;
  c.cost.param_count = 1e6;
  c.cost.loss_coefficient = 0.01;
  c.threads = 2;
  return c;
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("empty fleet is rejected") {
    sim::ScenarioConfig c = small();
    c.device_count = 0;
    CHECK_THROWS_AS(sim::validate(c), InvalidArgument);
    CHECK_THROWS_AS(sim::generate_scenario(c), InvalidArgument);
  }

  TEST_CASE("same seed gives the same fleet") {
    const sim::ScenarioConfig c = small();
    const sim::Fleet a = sim::generate_scenario(c), b = sim::generate_scenario(c);
    CHECK(a.distance_km == b.distance_km);
    for (double d : a.distance_km) {
      CHECK(d >= c.min_distance_km);
      CHECK(d <= c.cell_radius_km);
    }
    CHECK(a.distance_km != sim::generate_scenario(c, 1).distance_km);
  }

  TEST_CASE("twelve devices get the frequency mix in blocks of four") {
    sim::ScenarioConfig c = small();
    c.device_count = 12;
    const sim::Fleet f = sim::generate_scenario(c);
    for (std::size_t k = 0; k < 12; ++k) {
      CHECK(f.cpu[k].cpu_freq_hz == c.cpu_freq_mix_hz[k / 4]);
    }
  }

  TEST_CASE("online learning uses one sample per device") {
    const sim::ScenarioConfig c = small();
    const sim::SchemeRun r = sim::run(c, sim::Scheme::Online, sim::generate_scenario(c));
    REQUIRE(r.rounds.size() == c.rounds);
    for (const auto& rec : r.rounds) CHECK(rec.global_batch == 4);
  }

  TEST_CASE("trajectories are monotone") {
    const sim::ScenarioConfig c = small();
    const sim::Fleet f = sim::generate_scenario(c);
    for (sim::Scheme s : sim::all_schemes()) {
      const sim::SchemeRun r = sim::run(c, s, f);
      double t = 0.0, l = c.initial_loss;
      for (const auto& rec : r.rounds) {
        CHECK(rec.cumulative_s > t);
        CHECK(rec.loss <= l);
        CHECK(rec.loss >= c.floor_loss);
        t = rec.cumulative_s;
        l = rec.loss;
      }
    }
  }

  TEST_CASE("doubling xi keeps allocations and halves time to target") {
    sim::ScenarioConfig c = small();
    c.static_channel = true;
    c.rounds = 400;
    const sim::Fleet f = sim::generate_scenario(c);
    const sim::SchemeRun a = sim::run(c, sim::Scheme::Proposed, f);
    c.cost.loss_coefficient *= 2.0;
    const sim::SchemeRun b = sim::run(c, sim::Scheme::Proposed, f);
    CHECK(a.rounds[0].batch == b.rounds[0].batch);
    CHECK(a.rounds[0].latency_s == b.rounds[0].latency_s);
    const double target = 0.5 * c.initial_loss;
    const double ta = sim::time_to_loss(a, c.initial_loss, target);
    const double tb = sim::time_to_loss(b, c.initial_loss, target);
    REQUIRE(std::isfinite(ta));
    CHECK(tb == doctest::Approx(ta / 2).epsilon(1e-9));
  }

  TEST_CASE("proposed dominates every baseline round by round") {
    sim::ScenarioConfig c = small();
    c.cost.cycles_per_sample = 1e9;
    c.cost.loss_coefficient = 0.001;
    c.trials = 2;
    c.rounds = 5000;
    c.stop_at_target = true;
    const auto schemes = sim::all_schemes();
    const sim::SimResult r = sim::run_schemes(c, schemes);
    CHECK(r.dominance_violations == 0);
    for (const auto& trial : r.summaries) {
      for (const auto& s : trial) CHECK(trial[0].time_to_target_s <= s.time_to_target_s);
    }
  }

  TEST_CASE("summaries") {
    const sim::ScenarioConfig c = small();
    const std::vector<sim::Scheme> schemes = {sim::Scheme::FullBatch, sim::Scheme::Proposed};
    const sim::SimResult r = sim::run_schemes(c, schemes);
    CHECK(r.summaries[0][0].speedup == 1.0);
    CHECK(sim::mean_summary(r, 0).speedup == 1.0);
    CHECK_THROWS_AS(sim::summarize({}, sim::Scheme::FullBatch, 2.3, 1.0), InvalidArgument);
    CHECK_THROWS_AS(sim::summarize(r.runs[0], sim::Scheme::Online, 2.3, 1.0), InvalidArgument);
  }

  TEST_CASE("outputs are deterministic across thread counts") {
    sim::ScenarioConfig c = small();
    c.trials = 3;
    const std::vector<sim::Scheme> schemes = {sim::Scheme::Proposed, sim::Scheme::RandomBatch};
    std::ostringstream a, b;
    sim::write_csv(a, sim::run_schemes(c, schemes));
    c.threads = 1;
    sim::write_csv(b, sim::run_schemes(c, schemes));
    CHECK(a.str() == b.str());
  }

  TEST_CASE("scheme names") {
    CHECK(sim::parse_scheme("Proposed") == sim::Scheme::Proposed);
    CHECK(sim::parse_scheme("equal") == sim::Scheme::EqualAllocation);
    CHECK_THROWS_AS(sim::parse_scheme("greedy"), InvalidArgument);
    for (sim::Scheme s : sim::all_schemes()) CHECK(sim::parse_scheme(sim::to_string(s)) == s);
  }
}
