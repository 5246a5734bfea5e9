#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swarmfault/config.hpp"
#include "swarmfault/hypothesis.hpp"

#include <random>

using namespace swarmfault;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Command random_command(std::mt19937_64& rng, int n) {
  Command c;
  for (int j = 0; j < n; ++j) c.actions.push_back(static_cast<Action>(rng() % kActionCount));
  return c;
}

}  // namespace

TEST_CASE("twin_step: fresh twin with all-stay gives zero reward") {
  const auto cfg = default_run_config().mission;
  const auto twin = TwinState::from_observed(initial_state(cfg.world), 1, Axis::Y);
  const auto res = twin_step(twin, Command::all_stay(3), cfg.world);
  CHECK(res.reward == 0.0);
}

TEST_CASE("twin_step: reward is the norm of the observed difference") {
  const auto cfg = default_run_config().mission;
  auto twin = TwinState::from_observed(initial_state(cfg.world), 1, Axis::Y);
  twin.world_s.observed[0].x() += 0.4;
  twin.world_s.physical[0].x() += 0.4;
  const auto res = twin_step(twin, Command::all_stay(3), cfg.world);
  CHECK(res.reward == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("twin_step: pushing the faulty agent along its faulty axis separates the twins") {
  WorldParams p;
  p.agents = {{0, 0.5, {1.0, 1.0}, {1.0, 1.0}}, {1, 0.5, {5.0, 5.0}, {5.0, 5.0}}, {2, 0.5, {5.0, 3.5}, {5.0, 3.5}}};
  auto twin = TwinState::from_observed(initial_state(p), 1, Axis::Y);
  Command up{{Action::Stay, Action::Stay, Action::PlusY}};
  int first_positive = -1;
  for (int t = 0; t < 6; ++t) {
    auto res = twin_step(twin, up, p);
    if (res.reward > 0.0 && first_positive < 0) {
      first_positive = t;
      CHECK(res.record_a.involves(1));
      // under H_a the push shows on observed y; under H_s it does not
      CHECK(res.twin.world_a.observed[1].y() > 5.0);
      CHECK(res.twin.world_s.observed[1].y() == 5.0);
    }
    twin = std::move(res.twin);
  }
  CHECK(first_positive == 2);
}

TEST_CASE("twin_step: positive reward is always preceded by a collision with the faulty agent") {
  const auto cfg = default_run_config().mission;
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto twin = TwinState::from_observed(initial_state(cfg.world), 1, Axis::Y);
    bool touched = false;
    for (int t = 0; t < 150; ++t) {
      auto res = twin_step(twin, random_command(rng, 3), cfg.world);
      touched = touched || res.record_a.involves(1) || res.record_s.involves(1);
      CHECK(res.reward >= 0.0);
      if (!touched) CHECK(res.reward == 0.0);
      twin = std::move(res.twin);
    }
  }
}

TEST_CASE("twin_step: swapping the worlds leaves the reward unchanged") {
  const auto cfg = default_run_config().mission;
  std::mt19937_64 rng(8);
  auto twin = TwinState::from_observed(initial_state(cfg.world), 1, Axis::Y);
  for (int t = 0; t < 100; ++t) {
    const auto cmd = random_command(rng, 3);
    TwinState swapped{twin.world_s, twin.world_a, twin.fault_s, twin.fault_a};
    const auto a = twin_step(twin, cmd, cfg.world);
    const auto b = twin_step(swapped, cmd, cfg.world);
    CHECK(a.reward == b.reward);
    twin = a.twin;
  }
}

TEST_CASE("divergence_total: per-tick Euclidean sum") {
  const Trajectory a = {vec({0.0, 0.0}), vec({1.0, 1.0})};
  const Trajectory b = {vec({0.3, 0.4}), vec({1.0, 1.0})};
  CHECK(divergence_total(a, b) == doctest::Approx(0.5));
  CHECK(divergence_total(a, a) == 0.0);
  CHECK_THROWS_AS(divergence_total(a, Trajectory{vec({0.0, 0.0})}), std::invalid_argument);
  CHECK_THROWS_AS(divergence_total(a, Trajectory{vec({0.0}), vec({0.0})}), std::invalid_argument);
}

TEST_CASE("divergence_pairwise: sums every unordered pair") {
  const Trajectory a = {vec({0.0, 0.0})}, b = {vec({3.0, 4.0})}, c = {vec({0.0, 1.0})};
  CHECK(divergence_pairwise({a, b, c}) ==
        doctest::Approx(divergence_total(a, b) + divergence_total(a, c) + divergence_total(b, c)));
}

TEST_CASE("classify: nearest hypothesis, inconclusive inside the margin") {
  const Trajectory pa = {vec({0.0, 0.0}), vec({1.0, 0.0})};
  const Trajectory ps = {vec({0.0, 0.0}), vec({0.0, 0.0})};
  CHECK(classify(pa, pa, ps).verdict == Verdict::Actuator);
  CHECK(classify(ps, pa, ps).verdict == Verdict::Sensor);
  const Trajectory mid = {vec({0.0, 0.0}), vec({0.5, 0.0})};
  const auto c = classify(mid, pa, ps);
  CHECK(c.verdict == Verdict::Inconclusive);
  CHECK(c.distance_a == c.distance_s);
  // gap 0.2 against a larger distance of 0.6: clears 0.1, not 0.5
  const Trajectory near_a = {vec({0.0, 0.0}), vec({0.6, 0.0})};
  CHECK(classify(near_a, pa, ps, 0.1).verdict == Verdict::Actuator);
  CHECK(classify(near_a, pa, ps, 0.5).verdict == Verdict::Inconclusive);
  // identical predictions can never be told apart
  CHECK(classify(pa, pa, pa).verdict == Verdict::Inconclusive);
}

TEST_CASE("verdict strings") {
  CHECK(std::string(to_string(Verdict::Actuator)) == "H_a");
  CHECK(std::string(to_string(Verdict::Sensor)) == "H_s");
  CHECK(verdict_from_string("Inconclusive") == Verdict::Inconclusive);
  CHECK_THROWS(verdict_from_string("maybe"));
}
