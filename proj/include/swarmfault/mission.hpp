#pragma once

// Two-stage mission: learn a discrimination plan on the twin worlds, run it
// on the real agents and classify the fault, then learn and run the
// conveyance plan under the identified fault.

#include "swarmfault/config.hpp"
#include "swarmfault/hypothesis.hpp"
#include "swarmfault/rl.hpp"
#include "swarmfault/world.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace swarmfault {

/// Maps arena coordinates to [-1, 1] for the policy input.
Eigen::VectorXd normalize_observation(const Eigen::VectorXd& coords, double arena_size);

Command command_from_indices(std::span<const int> actions);

// -- environments --------------------------------------------------------------

/// Twin environment for the discrimination stage. Observation is both
/// worlds' observed vectors (4N), reward the twin divergence, fixed-length
/// episodes restarting from the same twin.
class TwinEnvironment : public Environment {
 public:
  TwinEnvironment(TwinState initial, WorldParams params, int horizon);
  int observation_size() const override { return 4 * params_.agent_count(); }
  int head_count() const override { return params_.agent_count(); }
  Eigen::VectorXd reset() override;
  EnvStep step(std::span<const int> actions) override;
  Eigen::VectorXd observation() const;

 private:
  TwinState initial_, twin_;
  WorldParams params_;
  int horizon_;
  int t_ = 0;
};

struct BetaRewardOutcome {
  double reward = 0.0;
  std::vector<bool> arrived;  // latched flags after this state
  bool completed = false;     // every agent has arrived
};

/// Proximity sum w/(1 + d_j) over observed goal distances, plus the arrival
/// bonus on each agent's first entry within the arrival radius and the
/// completion bonus once all have arrived.
BetaRewardOutcome beta_reward(const WorldState& state, std::span<const Vec2> goals,
                              const std::vector<bool>& arrived_before, const BetaRewardSpec& spec);

/// Conveyance policy input: normalized observed vector (2N), followed by the
/// latched arrival flags as +-1 (N) when `arrival_flags` is set.
Eigen::VectorXd convey_observation(const WorldState& state, const std::vector<bool>& arrived,
                                   const WorldParams& params, bool arrival_flags);

/// Single-world conveyance environment; episodes end on completion or after
/// `horizon` steps. With a positive `schedule_steps`, a share of episodes
/// start from random admissible states whose faulty coordinate is drawn ever
/// farther from its goal as training proceeds (see ConveyOptions).
class ConveyEnvironment : public Environment {
 public:
  ConveyEnvironment(WorldState initial, std::vector<FaultModel> faults, WorldParams params, BetaRewardSpec spec,
                    int horizon, ConveyOptions options = {}, double gamma = 0.99, std::int64_t schedule_steps = 0,
                    std::uint64_t seed = 0);
  int observation_size() const override { return (options_.arrival_flags ? 3 : 2) * params_.agent_count(); }
  int head_count() const override { return params_.agent_count(); }
  Eigen::VectorXd reset() override;
  EnvStep step(std::span<const int> actions) override;

  const WorldState& state() const { return state_; }
  /// Value credited on completion on top of beta_reward (0 when disabled).
  double completion_value() const;

 private:
  WorldState random_start();

  WorldState initial_, state_;
  std::vector<FaultModel> faults_;
  WorldParams params_;
  BetaRewardSpec spec_;
  std::vector<Vec2> goals_;
  std::vector<bool> arrived_;
  int horizon_;
  ConveyOptions options_;
  double gamma_;
  std::int64_t schedule_steps_;
  std::int64_t steps_taken_ = 0;
  std::mt19937_64 rng_;
  int t_ = 0;
};

// -- plans ---------------------------------------------------------------------

struct Plan {
  std::vector<Command> commands;
  std::uint64_t seed = 0;
  std::string checkpoint_id;
};

struct AlphaPlan {
  Plan plan;
  WorldState start_a, start_s;
  std::vector<StepRecord> records_a, records_s;
  std::vector<double> rewards;  // per-step twin divergence

  Trajectory predicted_a() const;
  Trajectory predicted_s() const;
  double max_step_divergence() const;
  double total_divergence() const;
};

struct BetaPlan {
  Plan plan;
  WorldState start;
  std::vector<StepRecord> records;
  std::vector<double> rewards;
  std::vector<std::int64_t> arrival_ticks;  // -1 when never arrived
  bool completed = false;

  Trajectory predicted() const;
};

/// Rolls the policy out in the twin worlds and records the command stream.
/// Throws std::invalid_argument when horizon <= 0.
AlphaPlan make_alpha_plan(const PolicyModeld& model, const TwinState& start, const WorldParams& params, int horizon,
                          PlanMode mode, std::uint64_t seed, std::string checkpoint_id = "alpha");

BetaPlan make_beta_plan(const PolicyModeld& model, const WorldState& start, std::span<const FaultModel> faults,
                        const WorldParams& params, const BetaRewardSpec& spec, const ConveyOptions& options,
                        int horizon, PlanMode mode, std::uint64_t seed, std::string checkpoint_id = "beta");

/// Replays the commands on the real agents; returns the observed trajectory
/// including the starting state (length = commands + 1).
Trajectory execute_plan(const Plan& plan, RealWorld& world);

// -- stages ----------------------------------------------------------------------

TrainResult train_alpha(const TwinState& start, const WorldParams& params, const StageConfig& stage,
                        const TrainCallback& on_update = {});

/// PPO on the conveyance task in a virtual world started from `start`
/// under `faults` (the identified hypothesis).
TrainResult train_beta(const WorldState& start, std::span<const FaultModel> faults, const WorldParams& params,
                       const BetaRewardSpec& spec, const ConveyOptions& options, const StageConfig& stage,
                       const TrainCallback& on_update = {});

struct AlphaStage {
  FaultReport probe;
  std::optional<std::pair<int, Axis>> suspect;
  RealWorld real;                 // after probing
  std::optional<TwinState> twin;  // absent when the probe found nothing
  std::optional<TrainResult> training;
  std::optional<AlphaPlan> plan;
  std::uint64_t train_seed = 0;
  std::uint64_t plan_seed = 0;
};

struct MissionRun {
  AlphaStage alpha;
  WorldState alpha_real_start;
  std::vector<StepRecord> alpha_real_records;
  Trajectory alpha_real;
  std::optional<Classification> classification;

  std::optional<FaultModel> identified_fault;
  WorldState beta_real_start;
  std::optional<TrainResult> beta_training;
  std::optional<BetaPlan> beta_plan;
  std::vector<StepRecord> beta_real_records;
  std::vector<std::int64_t> beta_real_arrival_ticks;
  bool mission_complete = false;

  enum class Status { NoFault, Inconclusive, Complete } status = Status::Complete;
};

/// Steps [0a]-[1]: probe, set up the twins, train and generate plan alpha.
AlphaStage run_alpha_stage(const MissionConfig& cfg, const TrainCallback& on_update = {});

/// Steps [2]-[4] from a finished alpha stage.
MissionRun complete_mission(const MissionConfig& cfg, AlphaStage alpha, const TrainCallback& on_update = {});

MissionRun run_mission(const MissionConfig& cfg);

struct MissionReport {
  FaultReport probe;
  std::optional<std::pair<int, Axis>> suspect;
  Verdict verdict = Verdict::Inconclusive;
  std::string status;
  double distance_a = 0.0, distance_s = 0.0;
  double divergence_total = 0.0;
  double divergence_max_step = 0.0;
  bool alpha_working = false;
  std::vector<std::int64_t> arrival_ticks;
  bool mission_complete = false;
  double wall_seconds = 0.0;
  std::map<std::string, std::string> artifacts;  // name -> path
};

nlohmann::json to_json(const MissionReport& report);

/// Full workflow; when `out_dir` is given writes trace_alpha.jsonl,
/// trace_beta.jsonl, pred_ha.jsonl, pred_hs.jsonl, plots, checkpoints,
/// training curves, report.json and summary.csv there.
MissionReport run_pipeline(const MissionConfig& cfg, const std::optional<std::filesystem::path>& out_dir);

// -- harness -------------------------------------------------------------------

struct SeedRecord {
  std::uint64_t seed = 0;
  bool working = false;
  double max_step_divergence = 0.0;
  double total_divergence = 0.0;
  std::optional<AlphaStage> stage;
};

struct SuccessRate {
  double rate = 0.0;
  std::vector<SeedRecord> records;
};

/// Trains the discrimination policy from scratch for seeds base, base+1, ...
/// and counts plans whose largest per-step twin divergence exceeds
/// `theta_work`. `threads` > 1 runs seeds concurrently.
SuccessRate success_rate(const MissionConfig& cfg, int n_seeds, double theta_work, int threads = 1,
                         bool keep_stages = false);

/// Per-tick check used by the acceptance suite: the first tick with nonzero
/// twin divergence has a collision involving `agent` at or before it in
/// either world. Returns true when divergence never becomes positive.
bool divergence_preceded_by_collision(const AlphaPlan& plan, int agent);

}  // namespace swarmfault
