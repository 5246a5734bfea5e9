#include "swarmfault/mission.hpp"

#include "swarmfault/io.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <chrono>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace swarmfault {

using nlohmann::json;

Eigen::VectorXd normalize_observation(const Eigen::VectorXd& coords, double arena_size) {
  return (coords.array() * (2.0 / arena_size) - 1.0).matrix();
}

Command command_from_indices(std::span<const int> actions) {
  Command cmd;
  cmd.actions.reserve(actions.size());
  for (int a : actions) {
    if (a < 0 || a >= kActionCount) throw std::invalid_argument("action index out of range");
    cmd.actions.push_back(static_cast<Action>(a));
  }
  return cmd;
}

namespace {

Eigen::VectorXd twin_observation(const TwinState& twin, double arena_size) {
  const Eigen::VectorXd a = twin.world_a.observed_vector();
  const Eigen::VectorXd s = twin.world_s.observed_vector();
  Eigen::VectorXd v(a.size() + s.size());
  v << a, s;
  return normalize_observation(v, arena_size);
}

std::vector<Vec2> goals_of(const WorldParams& params) {
  std::vector<Vec2> g;
  for (const auto& a : params.agents) g.push_back(a.goal);
  return g;
}

Trajectory trajectory_of(const WorldState& start, const std::vector<StepRecord>& records) {
  Trajectory t;
  t.reserve(records.size() + 1);
  t.push_back(start.observed_vector());
  for (const auto& r : records) t.push_back(r.post.observed_vector());
  return t;
}

SampledAction choose(const PolicyModeld& model, const Eigen::VectorXd& obs, PlanMode mode, Rng& rng) {
  const auto out = model.forward(obs);
  return mode == PlanMode::Greedy ? greedy_action(out.logits) : sample_action(out.logits, rng);
}

}  // namespace

// -- environments --------------------------------------------------------------

TwinEnvironment::TwinEnvironment(TwinState initial, WorldParams params, int horizon)
    : initial_(std::move(initial)), twin_(initial_), params_(std::move(params)), horizon_(horizon) {
  if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");
}

Eigen::VectorXd TwinEnvironment::observation() const { return twin_observation(twin_, params_.arena_size); }

Eigen::VectorXd TwinEnvironment::reset() {
  twin_ = initial_;
  t_ = 0;
  return observation();
}

EnvStep TwinEnvironment::step(std::span<const int> actions) {
  auto res = twin_step(twin_, command_from_indices(actions), params_);
  twin_ = std::move(res.twin);
  ++t_;
  return {observation(), res.reward, t_ >= horizon_};
}

BetaRewardOutcome beta_reward(const WorldState& state, std::span<const Vec2> goals,
                              const std::vector<bool>& arrived_before, const BetaRewardSpec& spec) {
  const int n = state.agent_count();
  if (static_cast<int>(goals.size()) != n || static_cast<int>(arrived_before.size()) != n)
    throw std::invalid_argument("beta_reward: goal/flag count does not match agents");
  BetaRewardOutcome out;
  out.arrived = arrived_before;
  for (int j = 0; j < n; ++j) {
    const double d = (state.observed[j] - goals[j]).norm();
    out.reward += spec.proximity_weight / (1.0 + d);
    if (!out.arrived[j] && d <= spec.arrival_radius) {
      out.arrived[j] = true;
      out.reward += spec.arrival_bonus;
    }
  }
  const bool all_now = std::all_of(out.arrived.begin(), out.arrived.end(), [](bool b) { return b; });
  const bool all_before = std::all_of(arrived_before.begin(), arrived_before.end(), [](bool b) { return b; });
  if (all_now && !all_before) out.reward += spec.completion_bonus;
  out.completed = all_now;
  return out;
}

Eigen::VectorXd convey_observation(const WorldState& state, const std::vector<bool>& arrived,
                                   const WorldParams& params, bool arrival_flags) {
  const Eigen::VectorXd pos = normalize_observation(state.observed_vector(), params.arena_size);
  if (!arrival_flags) return pos;
  Eigen::VectorXd v(pos.size() + static_cast<Eigen::Index>(arrived.size()));
  v.head(pos.size()) = pos;
  for (std::size_t j = 0; j < arrived.size(); ++j) v[pos.size() + static_cast<Eigen::Index>(j)] = arrived[j] ? 1.0 : -1.0;
  return v;
}

ConveyEnvironment::ConveyEnvironment(WorldState initial, std::vector<FaultModel> faults, WorldParams params,
                                     BetaRewardSpec spec, int horizon, ConveyOptions options, double gamma,
                                     std::int64_t schedule_steps, std::uint64_t seed)
    : initial_(std::move(initial)),
      state_(initial_),
      faults_(std::move(faults)),
      params_(std::move(params)),
      spec_(spec),
      goals_(goals_of(params_)),
      arrived_(params_.agent_count(), false),
      horizon_(horizon),
      options_(options),
      gamma_(gamma),
      schedule_steps_(schedule_steps),
      rng_(seed) {
  if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
  options_.validate();
  validate_faults(faults_, params_.agent_count());
}

double ConveyEnvironment::completion_value() const {
  if (!options_.absorbing_completion) return 0.0;
  return gamma_ / (1.0 - gamma_) * spec_.proximity_weight * params_.agent_count();
}

WorldState ConveyEnvironment::random_start() {
  const int n = params_.agent_count();
  const double frac = std::min(
      1.0, static_cast<double>(steps_taken_) / (options_.curriculum_fraction * static_cast<double>(schedule_steps_)));
  WorldState s = initial_;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    for (int j = 0; j < n; ++j) {
      const double r = params_.agents[j].radius;
      std::uniform_real_distribution<double> u(r, params_.arena_size - r);
      Vec2 p(u(rng_), u(rng_));
      if (const auto f = fault_for(faults_, j)) {
        // the coordinate the agent cannot change by itself starts on the
        // stretch between its goal and its actual start, near the goal first
        const int ax = static_cast<int>(f->axis);
        const double g = goals_[j][ax];
        const double far = g + frac * (initial_.observed[j][ax] - g);
        const double lo = std::max(r, std::min(g, far) - spec_.arrival_radius);
        const double hi = std::min(params_.arena_size - r, std::max(g, far) + spec_.arrival_radius);
        p[ax] = std::uniform_real_distribution<double>(lo, hi)(rng_);
      }
      s.physical[j] = p;
    }
    bool clear = true;
    for (int i = 0; i < n && clear; ++i)
      for (int j = i + 1; j < n && clear; ++j)
        clear = (s.physical[i] - s.physical[j]).norm() >= params_.agents[i].radius + params_.agents[j].radius;
    if (clear) {
      s.observed = s.physical;
      return s;
    }
  }
  return initial_;
}

Eigen::VectorXd ConveyEnvironment::reset() {
  state_ = initial_;
  if (schedule_steps_ > 0 && options_.exploring_starts > 0.0 &&
      std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < options_.exploring_starts)
    state_ = random_start();
  arrived_.assign(params_.agent_count(), false);
  t_ = 0;
  return convey_observation(state_, arrived_, params_, options_.arrival_flags);
}

EnvStep ConveyEnvironment::step(std::span<const int> actions) {
  auto rec = swarmfault::step(state_, command_from_indices(actions), faults_, params_);
  state_ = std::move(rec.post);
  const auto r = beta_reward(state_, goals_, arrived_, spec_);
  arrived_ = r.arrived;
  ++t_;
  ++steps_taken_;
  const double reward = r.completed ? r.reward + completion_value() : r.reward;
  return {convey_observation(state_, arrived_, params_, options_.arrival_flags), reward, r.completed || t_ >= horizon_};
}

// -- plans ---------------------------------------------------------------------

Trajectory AlphaPlan::predicted_a() const { return trajectory_of(start_a, records_a); }
Trajectory AlphaPlan::predicted_s() const { return trajectory_of(start_s, records_s); }

double AlphaPlan::max_step_divergence() const {
  return rewards.empty() ? 0.0 : *std::max_element(rewards.begin(), rewards.end());
}

double AlphaPlan::total_divergence() const { return divergence_total(predicted_a(), predicted_s()); }

Trajectory BetaPlan::predicted() const { return trajectory_of(start, records); }

AlphaPlan make_alpha_plan(const PolicyModeld& model, const TwinState& start, const WorldParams& params, int horizon,
                          PlanMode mode, std::uint64_t seed, std::string checkpoint_id) {
  if (horizon <= 0) throw std::invalid_argument("plan horizon must be positive");
  Rng rng(seed);
  AlphaPlan out;
  out.plan.seed = seed;
  out.plan.checkpoint_id = std::move(checkpoint_id);
  out.start_a = start.world_a;
  out.start_s = start.world_s;
  TwinState twin = start;
  for (int t = 0; t < horizon; ++t) {
    const auto act = choose(model, twin_observation(twin, params.arena_size), mode, rng);
    const Command cmd = command_from_indices(act.actions);
    auto res = twin_step(twin, cmd, params);
    out.plan.commands.push_back(cmd);
    out.records_a.push_back(std::move(res.record_a));
    out.records_s.push_back(std::move(res.record_s));
    out.rewards.push_back(res.reward);
    twin = std::move(res.twin);
  }
  return out;
}

BetaPlan make_beta_plan(const PolicyModeld& model, const WorldState& start, std::span<const FaultModel> faults,
                        const WorldParams& params, const BetaRewardSpec& spec, const ConveyOptions& options,
                        int horizon, PlanMode mode, std::uint64_t seed, std::string checkpoint_id) {
  if (horizon <= 0) throw std::invalid_argument("plan horizon must be positive");
  Rng rng(seed);
  BetaPlan out;
  out.plan.seed = seed;
  out.plan.checkpoint_id = std::move(checkpoint_id);
  out.start = start;
  const auto goals = goals_of(params);
  std::vector<bool> arrived(params.agent_count(), false);
  out.arrival_ticks.assign(params.agent_count(), -1);
  WorldState state = start;
  for (int t = 0; t < horizon && !out.completed; ++t) {
    const auto act = choose(model, convey_observation(state, arrived, params, options.arrival_flags), mode, rng);
    const Command cmd = command_from_indices(act.actions);
    auto rec = step(state, cmd, faults, params);
    state = rec.post;
    const auto r = beta_reward(state, goals, arrived, spec);
    for (int j = 0; j < params.agent_count(); ++j)
      if (r.arrived[j] && !arrived[j]) out.arrival_ticks[j] = state.tick;
    arrived = r.arrived;
    out.completed = r.completed;
    out.plan.commands.push_back(cmd);
    out.records.push_back(std::move(rec));
    out.rewards.push_back(r.reward);
  }
  return out;
}

Trajectory execute_plan(const Plan& plan, RealWorld& world) {
  Trajectory t;
  t.reserve(plan.commands.size() + 1);
  t.push_back(world.state().observed_vector());
  for (const auto& cmd : plan.commands) t.push_back(world.apply(cmd).post.observed_vector());
  return t;
}

// -- stages ----------------------------------------------------------------------

TrainResult train_alpha(const TwinState& start, const WorldParams& params, const StageConfig& stage,
                        const TrainCallback& on_update) {
  TwinEnvironment env(start, params, stage.horizon);
  return train_ppo(env, stage.train, on_update);
}

TrainResult train_beta(const WorldState& start, std::span<const FaultModel> faults, const WorldParams& params,
                       const BetaRewardSpec& spec, const ConveyOptions& options, const StageConfig& stage,
                       const TrainCallback& on_update) {
  ConveyEnvironment env(start, {faults.begin(), faults.end()}, params, spec, stage.horizon, options,
                        stage.train.gamma, stage.train.total_steps, derive_seed(stage.train.seed, 1));
  return train_ppo(env, stage.train, on_update);
}

AlphaStage run_alpha_stage(const MissionConfig& cfg, const TrainCallback& on_update) {
  cfg.validate();
  AlphaStage stage{{}, std::nullopt, RealWorld(cfg.world, cfg.faults), std::nullopt, std::nullopt, std::nullopt, 0, 0};
  stage.probe = probe(stage.real);
  stage.suspect = stage.probe.first_unresponsive();
  if (!stage.suspect) return stage;

  stage.twin = TwinState::from_observed(stage.real.state(), stage.suspect->first, stage.suspect->second);
  StageConfig sc = cfg.alpha;
  sc.train.seed = stage.train_seed = derive_seed(cfg.seed, 1);
  stage.training = train_alpha(*stage.twin, cfg.world, sc, on_update);
  stage.plan_seed = derive_seed(cfg.seed, 2);
  stage.plan = make_alpha_plan(stage.training->model, *stage.twin, cfg.world, cfg.alpha.horizon, cfg.alpha.plan_mode,
                               stage.plan_seed);
  return stage;
}

MissionRun complete_mission(const MissionConfig& cfg, AlphaStage alpha, const TrainCallback& on_update) {
  MissionRun run{std::move(alpha), {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  if (!run.alpha.twin) {
    run.status = MissionRun::Status::NoFault;
    return run;
  }
  RealWorld& real = run.alpha.real;

  run.alpha_real_start = real.state();
  std::size_t mark = real.log().size();
  run.alpha_real = execute_plan(run.alpha.plan->plan, real);
  run.alpha_real_records.assign(real.log().begin() + static_cast<std::ptrdiff_t>(mark), real.log().end());
  run.classification = classify(run.alpha_real, run.alpha.plan->predicted_a(), run.alpha.plan->predicted_s(),
                                cfg.classify_margin);
  if (run.classification->verdict == Verdict::Inconclusive) {
    run.status = MissionRun::Status::Inconclusive;
    return run;
  }
  run.identified_fault =
      run.classification->verdict == Verdict::Actuator ? run.alpha.twin->fault_a : run.alpha.twin->fault_s;

  // The base only knows observed positions; the virtual world starts there.
  WorldState start = real.state();
  start.physical = start.observed;
  run.beta_real_start = real.state();
  const FaultModel faults[] = {*run.identified_fault};
  StageConfig sc = cfg.beta;
  sc.train.seed = derive_seed(cfg.seed, 3);
  run.beta_training = train_beta(start, faults, cfg.world, cfg.beta_reward, cfg.convey, sc, on_update);
  run.beta_plan = make_beta_plan(run.beta_training->model, start, faults, cfg.world, cfg.beta_reward, cfg.convey,
                                 cfg.beta.horizon, cfg.beta.plan_mode, derive_seed(cfg.seed, 4));

  mark = real.log().size();
  execute_plan(run.beta_plan->plan, real);
  run.beta_real_records.assign(real.log().begin() + static_cast<std::ptrdiff_t>(mark), real.log().end());

  const auto goals = goals_of(cfg.world);
  std::vector<bool> arrived(cfg.world.agent_count(), false);
  run.beta_real_arrival_ticks.assign(cfg.world.agent_count(), -1);
  for (const auto& rec : run.beta_real_records) {
    const auto r = beta_reward(rec.post, goals, arrived, cfg.beta_reward);
    for (int j = 0; j < cfg.world.agent_count(); ++j)
      if (r.arrived[j] && !arrived[j]) run.beta_real_arrival_ticks[j] = rec.post.tick;
    arrived = r.arrived;
  }
  run.mission_complete = std::all_of(arrived.begin(), arrived.end(), [](bool b) { return b; });
  run.status = MissionRun::Status::Complete;
  return run;
}

MissionRun run_mission(const MissionConfig& cfg) { return complete_mission(cfg, run_alpha_stage(cfg)); }

// -- reporting -----------------------------------------------------------------

json to_json(const MissionReport& r) {
  json probe = json::array();
  for (std::size_t i = 0; i < r.probe.axes.size(); ++i) {
    auto resp = [](AxisResponse a) { return a == AxisResponse::Responsive ? "responsive" : "unresponsive"; };
    probe.push_back({{"agent", i}, {"x", resp(r.probe.axes[i][0])}, {"y", resp(r.probe.axes[i][1])}});
  }
  json j;
  j["probe"] = probe;
  j["suspect"] = r.suspect ? json{{"agent", r.suspect->first}, {"axis", to_string(r.suspect->second)}} : json(nullptr);
  j["status"] = r.status;
  j["verdict"] = to_string(r.verdict);
  j["distance_a"] = r.distance_a;
  j["distance_s"] = r.distance_s;
  j["divergence_total"] = r.divergence_total;
  j["divergence_max_step"] = r.divergence_max_step;
  j["alpha_working"] = r.alpha_working;
  j["arrival_ticks"] = r.arrival_ticks;
  j["mission_complete"] = r.mission_complete;
  j["wall_seconds"] = r.wall_seconds;
  j["artifacts"] = r.artifacts;
  return j;
}

namespace {

const char* status_name(MissionRun::Status s) {
  switch (s) {
    case MissionRun::Status::NoFault: return "no_fault";
    case MissionRun::Status::Inconclusive: return "inconclusive";
    case MissionRun::Status::Complete: return "complete";
  }
  return "?";
}

}  // namespace

MissionReport run_pipeline(const MissionConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  MissionRun run = run_mission(cfg);

  MissionReport rep;
  rep.probe = run.alpha.probe;
  rep.suspect = run.alpha.suspect;
  rep.status = status_name(run.status);
  if (run.classification) {
    rep.verdict = run.classification->verdict;
    rep.distance_a = run.classification->distance_a;
    rep.distance_s = run.classification->distance_s;
  }
  if (run.alpha.plan) {
    rep.divergence_total = run.alpha.plan->total_divergence();
    rep.divergence_max_step = run.alpha.plan->max_step_divergence();
    rep.alpha_working = rep.divergence_max_step > cfg.theta_work;
  }
  rep.arrival_ticks = run.beta_real_arrival_ticks;
  rep.mission_complete = run.mission_complete;

  if (out_dir) {
    const auto& dir = *out_dir;
    std::filesystem::create_directories(dir);
    auto record = [&](const std::string& name, const std::filesystem::path& rel) {
      rep.artifacts[name] = (dir / rel).string();
      return dir / rel;
    };
    PlotInput plot;
    plot.arena_size = cfg.world.arena_size;
    plot.radii = cfg.world.radii();
    plot.goals = goals_of(cfg.world);

    if (run.alpha.plan) {
      const auto& plan = *run.alpha.plan;
      TraceData pred_a = make_trace(plan.start_a, plan.records_a);
      TraceData pred_s = make_trace(plan.start_s, plan.records_s);
      write_trace_jsonl(record("pred_ha", "pred_ha.jsonl"), pred_a);
      write_trace_jsonl(record("pred_hs", "pred_hs.jsonl"), pred_s);
      save_checkpoint(record("checkpoint_alpha", "checkpoints/alpha.ckpt"), run.alpha.training->model);
      write_training_curve_csv(record("curve_alpha", "curve_alpha.csv"), run.alpha.training->curve);
      plot.pred_a = std::move(pred_a);
      plot.pred_s = std::move(pred_s);
      if (!run.alpha_real_records.empty()) {
        TraceData real = make_trace(run.alpha_real_start, run.alpha_real_records);
        write_trace_jsonl(record("trace_alpha", "trace_alpha.jsonl"), real);
        plot.real = std::move(real);
      }
      PlotSpec spec;
      spec.title = "discrimination plan";
      emit_plot(plot, spec, record("plot_alpha", "plot_alpha.svg"));
    }
    if (run.beta_plan) {
      write_trace_jsonl(record("pred_beta", "pred_beta.jsonl"), make_trace(run.beta_plan->start, run.beta_plan->records));
      TraceData real = make_trace(run.beta_real_start, run.beta_real_records);
      write_trace_jsonl(record("trace_beta", "trace_beta.jsonl"), real);
      save_checkpoint(record("checkpoint_beta", "checkpoints/beta.ckpt"), run.beta_training->model);
      write_training_curve_csv(record("curve_beta", "curve_beta.csv"), run.beta_training->curve);
      PlotInput bp;
      bp.arena_size = cfg.world.arena_size;
      bp.radii = cfg.world.radii();
      bp.goals = goals_of(cfg.world);
      bp.real = std::move(real);
      PlotSpec spec;
      spec.title = "conveyance plan";
      emit_plot(bp, spec, record("plot_beta", "plot_beta.svg"));
    }

    std::ostringstream csv;
    csv << "seed,status,verdict,distance_a,distance_s,divergence_total,divergence_max_step,alpha_working,"
           "mission_complete";
    for (std::size_t j = 0; j < rep.arrival_ticks.size(); ++j) csv << ",arrival_" << j;
    csv << '\n';
    csv.precision(12);
    csv << cfg.seed << ',' << rep.status << ',' << to_string(rep.verdict) << ',' << rep.distance_a << ','
        << rep.distance_s << ',' << rep.divergence_total << ',' << rep.divergence_max_step << ','
        << (rep.alpha_working ? 1 : 0) << ',' << (rep.mission_complete ? 1 : 0);
    for (auto t : rep.arrival_ticks) csv << ',' << t;
    csv << '\n';
    write_text_file(record("summary", "summary.csv"), csv.str());
    rep.artifacts["report"] = (dir / "report.json").string();
  }

  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out_dir) write_text_file(*out_dir / "report.json", to_json(rep).dump(2) + "\n");
  return rep;
}

// -- harness -------------------------------------------------------------------

SuccessRate success_rate(const MissionConfig& cfg, int n_seeds, double theta_work, int threads, bool keep_stages) {
  if (n_seeds < 1) throw std::invalid_argument("success_rate needs at least one seed");
  SuccessRate out;
  out.records.resize(n_seeds);
  auto run_one = [&](int k) {
    MissionConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(k);
    SeedRecord rec;
    rec.seed = c.seed;
    AlphaStage stage = run_alpha_stage(c);
    if (stage.plan) {
      rec.max_step_divergence = stage.plan->max_step_divergence();
      rec.total_divergence = stage.plan->total_divergence();
      rec.working = rec.max_step_divergence > theta_work;
    }
    if (keep_stages) rec.stage = std::move(stage);
    out.records[k] = std::move(rec);
  };

  if (threads <= 1) {
    for (int k = 0; k < n_seeds; ++k) run_one(k);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (int w = 0; w < std::min(threads, n_seeds); ++w) {
      pool.emplace_back([&] {
        for (int k = next++; k < n_seeds; k = next++) {
          try {
            run_one(k);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  const auto working = std::count_if(out.records.begin(), out.records.end(), [](const SeedRecord& r) { return r.working; });
  out.rate = static_cast<double>(working) / n_seeds;
  return out;
}

bool divergence_preceded_by_collision(const AlphaPlan& plan, int agent) {
  for (std::size_t t = 0; t < plan.rewards.size(); ++t) {
    if (plan.rewards[t] <= 0.0) continue;
    for (std::size_t u = 0; u <= t; ++u)
      if (plan.records_a[u].involves(agent) || plan.records_s[u].involves(agent)) return true;
    return false;
  }
  return true;
}

}  // namespace swarmfault
