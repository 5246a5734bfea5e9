#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "swarmfault/mission.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace swarmfault;

namespace {

MissionConfig small_budget(MissionConfig m) {
  for (StageConfig* s : {&m.alpha, &m.beta}) {
    s->train.rollout_length = 256;
    s->train.minibatch_size = 64;
    s->train.epochs = 2;
    s->train.total_steps = 512;
    s->train.hidden = 16;
  }
  return m;
}

std::vector<Vec2> goals_of(const MissionConfig& m) {
  std::vector<Vec2> g;
  for (const auto& a : m.world.agents) g.push_back(a.goal);
  return g;
}

WorldParams single_agent_world() {
  WorldParams p;
  p.agents = {AgentSpec{0, 0.5, Vec2(2.0, 2.0), Vec2(6.0, 7.0)}};
  return p;
}

}  // namespace

TEST_CASE("observation: coordinates map onto [-1, 1]") {
  Eigen::VectorXd c(3);
  c << 0.0, 5.0, 10.0;
  const auto n = normalize_observation(c, 10.0);
  CHECK(n[0] == -1.0);
  CHECK(n[1] == 0.0);
  CHECK(n[2] == 1.0);
  const int bad[] = {0, 5};
  CHECK_THROWS_AS(command_from_indices(bad), std::invalid_argument);
}

TEST_CASE("beta_reward: worked examples") {
  const auto m = default_run_config().mission;
  const auto goals = goals_of(m);
  const auto& spec = m.beta_reward;
  WorldState s = initial_state(m.world);

  // one agent exactly on its goal: proximity w_p plus the first-arrival bonus
  s.observed[0] = goals[0];
  const std::vector<bool> none(3, false);
  const auto r = beta_reward(s, goals, none, spec);
  const double rest = 2.0 * spec.proximity_weight / (1.0 + 5.0);
  CHECK(r.reward == doctest::Approx(spec.proximity_weight + spec.arrival_bonus + rest));
  CHECK(r.arrived == std::vector<bool>{true, false, false});
  CHECK_FALSE(r.completed);

  // the bonus is latched: staying there pays only proximity
  const auto again = beta_reward(s, goals, r.arrived, spec);
  CHECK(again.reward == doctest::Approx(spec.proximity_weight + rest));

  // far away, proximity vanishes
  for (auto& p : s.observed) p = Vec2(1e3, 1e3);
  CHECK(beta_reward(s, goals, none, spec).reward < 3.0 * spec.proximity_weight * 1e-3);

  // everyone arrives on the same tick: three arrival bonuses and one completion bonus
  s.observed = goals;
  const auto all = beta_reward(s, goals, none, spec);
  CHECK(all.completed);
  CHECK(all.reward == doctest::Approx(3.0 * (spec.proximity_weight + spec.arrival_bonus) + spec.completion_bonus));
  const auto after = beta_reward(s, goals, all.arrived, spec);
  CHECK(after.reward == doctest::Approx(3.0 * spec.proximity_weight));
  CHECK(after.completed);

  CHECK_THROWS_AS(beta_reward(s, goals, std::vector<bool>(2, false), spec), std::invalid_argument);
}

TEST_CASE("beta_reward: moving one agent closer strictly increases the reward") {
  const auto m = default_run_config().mission;
  const auto goals = goals_of(m);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.5, 9.5);
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  WorldState s = initial_state(m.world);
  const std::vector<bool> none(3, false);
  int checked = 0;
  while (checked < 500) {
    for (auto& p : s.observed) p = Vec2(u(rng), u(rng));
    const int j = static_cast<int>(rng() % 3);
    WorldState closer = s;
    closer.observed[j] = goals[j] + frac(rng) * (s.observed[j] - goals[j]);
    bool any_inside = false;
    for (int k = 0; k < 3; ++k)
      any_inside |= (s.observed[k] - goals[k]).norm() <= m.beta_reward.arrival_radius ||
                    (closer.observed[k] - goals[k]).norm() <= m.beta_reward.arrival_radius;
    if (any_inside) continue;
    CHECK(beta_reward(closer, goals, none, m.beta_reward).reward > beta_reward(s, goals, none, m.beta_reward).reward);
    ++checked;
  }
}

TEST_CASE("twin environment: nothing to distinguish without another agent") {
  WorldParams p = single_agent_world();
  const auto twin = TwinState::from_observed(initial_state(p), 0, Axis::Y);
  TwinEnvironment env(twin, p, 64);
  CHECK(env.observation_size() == 4);
  std::mt19937_64 rng(3);
  env.reset();
  for (int t = 0; t < 64; ++t) {
    const int a[] = {static_cast<int>(rng() % kActionCount)};
    const auto st = env.step(a);
    CHECK(st.reward == 0.0);
    CHECK(st.done == (t == 63));
  }
  CHECK_THROWS_AS(TwinEnvironment(twin, p, 0), std::invalid_argument);
}

TEST_CASE("plans: same seed gives the same plan, horizon must be positive") {
  const auto m = default_run_config().mission;
  Rng rng(8);
  const auto model = PolicyModeld::initialized(ModelShape{12, 16, 3, kActionCount}, rng);
  const auto twin = TwinState::from_observed(initial_state(m.world), 1, Axis::Y);
  const auto a = make_alpha_plan(model, twin, m.world, 40, PlanMode::Stochastic, 5);
  const auto b = make_alpha_plan(model, twin, m.world, 40, PlanMode::Stochastic, 5);
  CHECK(a.plan.commands == b.plan.commands);
  CHECK(a.rewards == b.rewards);
  CHECK(a.plan.commands.size() == 40);
  CHECK(a.predicted_a().size() == 41);
  const auto g1 = make_alpha_plan(model, twin, m.world, 40, PlanMode::Greedy, 5);
  const auto g2 = make_alpha_plan(model, twin, m.world, 40, PlanMode::Greedy, 6);
  CHECK(g1.plan.commands == g2.plan.commands);
  CHECK_THROWS_AS(make_alpha_plan(model, twin, m.world, 0, PlanMode::Greedy, 5), std::invalid_argument);

  Rng rng2(9);
  const auto beta_model = PolicyModeld::initialized(ModelShape{9, 16, 3, kActionCount}, rng2);
  CHECK_THROWS_AS(make_beta_plan(beta_model, initial_state(m.world), m.faults, m.world, m.beta_reward, m.convey, -1,
                                 PlanMode::Greedy, 1),
                  std::invalid_argument);
}

TEST_CASE("execute: real agents follow the prediction of the true hypothesis") {
  const auto m = default_run_config().mission;
  const auto start = initial_state(m.world);
  const auto twin = TwinState::from_observed(start, 1, Axis::Y);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto model = PolicyModeld::initialized(ModelShape{12, 16, 3, kActionCount}, rng);
    const auto plan = make_alpha_plan(model, twin, m.world, 64, PlanMode::Stochastic, seed);

    RealWorld actuator(m.world, {twin.fault_a});
    CHECK(execute_plan(plan.plan, actuator) == plan.predicted_a());
    RealWorld sensor(m.world, {twin.fault_s});
    CHECK(execute_plan(plan.plan, sensor) == plan.predicted_s());
  }
  Plan empty;
  RealWorld w(m.world, m.faults);
  CHECK(execute_plan(empty, w).size() == 1);
}

TEST_CASE("beta plan: arrival ticks and early stop") {
  WorldParams p = single_agent_world();
  p.agents[0].goal = Vec2(3.0, 2.0);
  const BetaRewardSpec spec;
  // zero model: greedy picks Stay forever, so nobody arrives
  const PolicyModeld idle(ModelShape{3, 8, 1, kActionCount});
  const auto stay = make_beta_plan(idle, initial_state(p), {}, p, spec, ConveyOptions{}, 10, PlanMode::Greedy, 0);
  CHECK(stay.plan.commands.size() == 10);
  CHECK(stay.arrival_ticks == std::vector<std::int64_t>{-1});
  CHECK_FALSE(stay.completed);

  // bias the head toward +x: arrival after two steps (distance 1.0 -> 0.5)
  PolicyModeld east = idle;
  east.tensors()[PolicyModeld::kPiB3](static_cast<int>(Action::PlusX)) = 1.0;
  const auto go = make_beta_plan(east, initial_state(p), {}, p, spec, ConveyOptions{}, 10, PlanMode::Greedy, 0);
  CHECK(go.completed);
  CHECK(go.arrival_ticks == std::vector<std::int64_t>{2});
  CHECK(go.plan.commands.size() == 2);
  CHECK(go.predicted().size() == 3);
}

TEST_CASE("mission: a healthy swarm stops after the probe") {
  auto m = small_budget(default_run_config().mission);
  m.faults.clear();
  const auto run = run_mission(m);
  CHECK(run.status == MissionRun::Status::NoFault);
  CHECK_FALSE(run.alpha.training.has_value());
  CHECK_FALSE(run.alpha.probe.any_unresponsive());
  const auto rep = run_pipeline(m, std::nullopt);
  CHECK(rep.status == "no_fault");
  CHECK(rep.verdict == Verdict::Inconclusive);
}

TEST_CASE("mission: small end-to-end run is deterministic") {
  const auto m = small_budget(default_run_config().mission);
  const auto a = run_mission(m);
  const auto b = run_mission(m);
  REQUIRE(a.alpha.plan.has_value());
  CHECK(a.alpha.suspect == std::optional<std::pair<int, Axis>>({1, Axis::Y}));
  CHECK(a.alpha.plan->plan.commands == b.alpha.plan->plan.commands);
  CHECK(a.alpha_real == b.alpha_real);
  CHECK(a.status == b.status);
  if (a.beta_plan) {
    CHECK(a.beta_plan->plan.commands == b.beta_plan->plan.commands);
    CHECK(a.beta_real_arrival_ticks == b.beta_real_arrival_ticks);
  }
}

TEST_CASE("success_rate: threshold extremes") {
  const auto m = small_budget(default_run_config().mission);
  CHECK(success_rate(m, 2, std::numeric_limits<double>::infinity()).rate == 0.0);
  CHECK(success_rate(m, 2, -1.0).rate == 1.0);
  const auto threaded = success_rate(m, 2, m.theta_work, 2);
  const auto serial = success_rate(m, 2, m.theta_work, 1);
  for (int k = 0; k < 2; ++k)
    CHECK(threaded.records[k].max_step_divergence == serial.records[k].max_step_divergence);
  CHECK_THROWS_AS(success_rate(m, 0, 0.0), std::invalid_argument);
}

TEST_CASE("divergence check: no divergence is vacuously fine") {
  AlphaPlan plan;
  plan.rewards = {0.0, 0.0};
  plan.records_a.resize(2);
  plan.records_s.resize(2);
  CHECK(divergence_preceded_by_collision(plan, 1));
  plan.rewards[1] = 0.3;
  CHECK_FALSE(divergence_preceded_by_collision(plan, 1));
  plan.records_s[0].collisions = {{0, 1}};
  CHECK(divergence_preceded_by_collision(plan, 1));
}

TEST_CASE("convey environment: completion credits the settled value") {
  WorldParams p = single_agent_world();
  p.agents[0].goal = Vec2(2.5, 2.0);
  const BetaRewardSpec spec;
  ConveyEnvironment env(initial_state(p), {}, p, spec, 50, ConveyOptions{}, 0.99);
  CHECK(env.observation_size() == 3);
  CHECK(env.completion_value() == doctest::Approx(99.0 * spec.proximity_weight));
  const auto obs = env.reset();
  CHECK(obs[2] == -1.0);
  const int east[] = {static_cast<int>(Action::PlusX)};
  const auto st = env.step(east);
  CHECK(st.done);
  CHECK(st.observation[2] == 1.0);
  const auto plain = beta_reward(env.state(), std::vector<Vec2>{p.agents[0].goal}, {false}, spec);
  CHECK(st.reward == doctest::Approx(plain.reward + env.completion_value()));

  ConveyOptions off;
  off.absorbing_completion = false;
  off.arrival_flags = false;
  ConveyEnvironment bare(initial_state(p), {}, p, spec, 50, off, 0.99);
  CHECK(bare.observation_size() == 2);
  bare.reset();
  CHECK(bare.step(east).reward == doctest::Approx(plain.reward));
}

TEST_CASE("convey environment: exploring starts are admissible and begin near the goal") {
  const auto m = default_run_config().mission;
  const auto start = initial_state(m.world);
  ConveyEnvironment env(start, m.faults, m.world, m.beta_reward, 256, m.convey, 0.99, 1000000, 11);
  int random = 0;
  for (int e = 0; e < 200; ++e) {
    env.reset();
    const auto& s = env.state();
    CHECK(s.physical == s.observed);
    if (s == start) continue;
    ++random;
    for (int i = 0; i < 3; ++i) {
      CHECK(s.physical[i].minCoeff() >= 0.5);
      CHECK(s.physical[i].maxCoeff() <= 9.5);
      for (int j = i + 1; j < 3; ++j) CHECK((s.physical[i] - s.physical[j]).norm() >= 1.0);
    }
    // no steps taken yet: the locked coordinate sits within the arrival radius of the goal
    CHECK(std::abs(s.physical[1].y() - 7.5) <= m.beta_reward.arrival_radius);
  }
  CHECK(random > 120);
  CHECK(random < 200);
}

TEST_CASE("conveyance: a healthy single agent learns to reach its goal") {
  const WorldParams p = single_agent_world();
  const BetaRewardSpec spec;
  StageConfig stage;
  stage.horizon = 100;
  stage.train.total_steps = 40960;
  stage.train.rollout_length = 1024;
  stage.train.hidden = 32;
  stage.train.seed = 4;
  const auto trained = train_beta(initial_state(p), {}, p, spec, ConveyOptions{}, stage);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.5, 9.5);
  int reached = 0;
  const int trials = 40;
  for (int k = 0; k < trials; ++k) {
    WorldState s = initial_state(p);
    s.physical[0] = s.observed[0] = Vec2(u(rng), u(rng));
    reached += make_beta_plan(trained.model, s, {}, p, spec, ConveyOptions{}, stage.horizon, PlanMode::Greedy, 0)
                   .completed;
  }
  CHECK(reached >= 38);
}
