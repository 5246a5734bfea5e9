#pragma once

// Run configuration: world, faults, rewards, training, harness sections.
// Parsing is strict; unknown keys are rejected.

#include "swarmfault/rl.hpp"
#include "swarmfault/world.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace swarmfault {

enum class PlanMode : std::uint8_t { Stochastic, Greedy };

struct BetaRewardSpec {
  double proximity_weight = 1.0;
  double arrival_bonus = 10.0;
  double completion_bonus = 50.0;
  double arrival_radius = 0.5;

  void validate() const;
  bool operator==(const BetaRewardSpec&) const = default;
};

// How the conveyance policy is trained, beyond the reward itself.
struct ConveyOptions {
  // latched arrival flags appended to the observation (the reward depends on them)
  bool arrival_flags = true;
  // on completion, credit the value of holding every agent on its goal,
  // w_p N gamma / (1 - gamma), so ending the episode is not a loss
  bool absorbing_completion = true;
  // share of training episodes started from a random admissible state
  double exploring_starts = 0.8;
  // share of the budget over which the faulty coordinate's start window
  // stretches from the goal back to the actual start
  double curriculum_fraction = 0.9;

  void validate() const;
  bool operator==(const ConveyOptions&) const = default;
};

struct StageConfig {
  TrainConfig train;
  int horizon = 64;
  PlanMode plan_mode = PlanMode::Stochastic;

  bool operator==(const StageConfig&) const = default;
};

struct MissionConfig {
  WorldParams world;
  std::vector<FaultModel> faults;  // ground truth of the real agents
  BetaRewardSpec beta_reward;
  ConveyOptions convey;
  double theta_work = 0.25;
  double classify_margin = 0.10;
  StageConfig alpha;
  StageConfig beta;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HarnessConfig {
  int seeds = 20;
  int threads = 1;
  std::vector<int> bench_sizes = {1000, 2000, 4000, 8000, 16000, 32000};
  int bench_repetitions = 3;
  double bench_density = 0.25;

  bool operator==(const HarnessConfig&) const = default;
};

struct RunConfig {
  MissionConfig mission;
  HarnessConfig harness;
  std::filesystem::path output = "run";

  void validate() const { mission.validate(); }
};

/// Three agents on a 10 x 10 arena, agent 1 with a locked y actuator.
RunConfig default_run_config();

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

bool operator==(const WorldParams& a, const WorldParams& b);
bool operator==(const AgentSpec& a, const AgentSpec& b);
bool operator==(const MissionConfig& a, const MissionConfig& b);
bool operator==(const RunConfig& a, const RunConfig& b);

const char* to_string(PlanMode m);
PlanMode plan_mode_from_string(const std::string& s);

/// Seed derivation for independent streams (splitmix64 of seed and stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Thrown for malformed configuration files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace swarmfault
