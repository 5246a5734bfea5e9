#pragma once

// Twin virtual worlds, one per fault hypothesis, driven by a shared command
// stream; the divergence between their observed states is the value signal
// for discrimination plans.

#include "swarmfault/world.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace swarmfault {

enum class HypothesisLabel : std::uint8_t { Actuator, Sensor };

enum class Verdict : std::uint8_t { Actuator, Sensor, Inconclusive };

struct Hypothesis {
  HypothesisLabel label = HypothesisLabel::Actuator;
  FaultModel fault;

  static Hypothesis actuator(int agent, Axis axis) {
    return {HypothesisLabel::Actuator, {FaultKind::ActuatorAxisLock, axis, agent}};
  }
  static Hypothesis sensor(int agent, Axis axis) {
    return {HypothesisLabel::Sensor, {FaultKind::SensorAxisFreeze, axis, agent}};
  }
};

/// Observed state vectors (2N reals each), one per tick.
using Trajectory = std::vector<Eigen::VectorXd>;

struct TwinState {
  WorldState world_a;  // under the actuator hypothesis
  WorldState world_s;  // under the sensor hypothesis
  FaultModel fault_a;
  FaultModel fault_s;

  /// Both worlds start from the base's view of the real agents: physical
  /// positions are taken to be the observed ones.
  static TwinState from_observed(const WorldState& observed, int agent, Axis axis);
};

struct TwinStepResult {
  TwinState twin;
  double reward = 0.0;
  StepRecord record_a;
  StepRecord record_s;
};

/// Steps both worlds with `cmd`, each from its own prior state; the reward is
/// the Euclidean distance between the two observed vectors afterwards.
TwinStepResult twin_step(const TwinState& twin, const Command& cmd, const WorldParams& params);

/// Euclidean distance between the observed vectors of two states.
double observed_distance(const WorldState& a, const WorldState& b);

/// Sum over ticks of the per-tick Euclidean distance. Throws
/// std::invalid_argument on length or width mismatch.
double divergence_total(const Trajectory& a, const Trajectory& b);

/// Pairwise sum of divergence_total over every unordered pair.
double divergence_pairwise(const std::vector<Trajectory>& trajectories);

struct Classification {
  Verdict verdict = Verdict::Inconclusive;
  double distance_a = 0.0;
  double distance_s = 0.0;
};

inline constexpr double kClassifyMargin = 0.10;
inline constexpr double kClassifyEpsilon = 1e-12;

/// Picks the hypothesis whose predicted trajectory is closer to `real`,
/// unless the gap is within `margin` of the larger distance.
Classification classify(const Trajectory& real, const Trajectory& pred_a, const Trajectory& pred_s,
                        double margin = kClassifyMargin);

const char* to_string(Verdict v);
const char* to_string(HypothesisLabel h);
Verdict verdict_from_string(const std::string& s);

}  // namespace swarmfault
