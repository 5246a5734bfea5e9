#include "swarmfault/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swarmfault {

TwinState TwinState::from_observed(const WorldState& observed, int agent, Axis axis) {
  TwinState t;
  WorldState base;
  base.physical = observed.observed;
  base.observed = observed.observed;
  base.tick = observed.tick;
  t.world_a = base;
  t.world_s = base;
  t.fault_a = Hypothesis::actuator(agent, axis).fault;
  t.fault_s = Hypothesis::sensor(agent, axis).fault;
  return t;
}

double observed_distance(const WorldState& a, const WorldState& b) {
  if (a.observed.size() != b.observed.size()) throw std::invalid_argument("agent count mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.observed.size(); ++i) sq += (a.observed[i] - b.observed[i]).squaredNorm();
  return std::sqrt(sq);
}

TwinStepResult twin_step(const TwinState& twin, const Command& cmd, const WorldParams& params) {
  if (twin.world_a.tick != twin.world_s.tick) throw std::invalid_argument("twin worlds out of sync");
  TwinStepResult out;
  const FaultModel fa[] = {twin.fault_a};
  const FaultModel fs[] = {twin.fault_s};
  out.record_a = step(twin.world_a, cmd, fa, params);
  out.record_s = step(twin.world_s, cmd, fs, params);
  out.twin = twin;
  out.twin.world_a = out.record_a.post;
  out.twin.world_s = out.record_s.post;
  out.reward = observed_distance(out.twin.world_a, out.twin.world_s);
  return out;
}

double divergence_total(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("trajectory length mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].size() != b[t].size()) throw std::invalid_argument("trajectory width mismatch");
    total += (a[t] - b[t]).norm();
  }
  return total;
}

double divergence_pairwise(const std::vector<Trajectory>& trajectories) {
  double total = 0.0;
  for (std::size_t l = 0; l < trajectories.size(); ++l)
    for (std::size_t m = l + 1; m < trajectories.size(); ++m)
      total += divergence_total(trajectories[l], trajectories[m]);
  return total;
}

Classification classify(const Trajectory& real, const Trajectory& pred_a, const Trajectory& pred_s,
                        double margin) {
  Classification c;
  c.distance_a = divergence_total(real, pred_a);
  c.distance_s = divergence_total(real, pred_s);
  const double scale = std::max({c.distance_a, c.distance_s, kClassifyEpsilon});
  if (std::abs(c.distance_a - c.distance_s) <= margin * scale) {
    c.verdict = Verdict::Inconclusive;
  } else {
    c.verdict = c.distance_a < c.distance_s ? Verdict::Actuator : Verdict::Sensor;
  }
  return c;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Actuator: return "H_a";
    case Verdict::Sensor: return "H_s";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

const char* to_string(HypothesisLabel h) { return h == HypothesisLabel::Actuator ? "H_a" : "H_s"; }

Verdict verdict_from_string(const std::string& s) {
  for (auto v : {Verdict::Actuator, Verdict::Sensor, Verdict::Inconclusive})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

}  // namespace swarmfault
