#include "swarmfault/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swarmfault {

namespace {

int axis_index(Axis a) { return static_cast<int>(a); }

void clamp_to(Vec2& p, double r, const Bounds& b) {
  for (int k = 0; k < 2; ++k) p[k] = std::clamp(p[k], b.lo + r, b.hi - r);
}

}  // namespace

std::vector<double> WorldParams::radii() const {
  std::vector<double> r;
  r.reserve(agents.size());
  for (const auto& a : agents) r.push_back(a.radius);
  return r;
}

void WorldParams::validate() const {
  if (!(arena_size > 0.0)) throw std::invalid_argument("arena_size must be positive");
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (collision_passes < 1) throw std::invalid_argument("collision_passes must be >= 1");
  if (!(overlap_tol >= 0.0)) throw std::invalid_argument("overlap_tol must be >= 0");
  if (!(observation_noise >= 0.0)) throw std::invalid_argument("observation_noise must be >= 0");
  if (agents.empty()) throw std::invalid_argument("world needs at least one agent");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    if (a.id != static_cast<int>(i)) throw std::invalid_argument("agent ids must be 0..N-1 in order");
    if (!(a.radius > 0.0)) throw std::invalid_argument("agent radius must be positive");
    if (!a.start.allFinite() || !a.goal.allFinite())
      throw std::invalid_argument("agent start/goal must be finite");
    if (2.0 * a.radius > arena_size) throw std::invalid_argument("agent larger than arena");
  }
}

Eigen::VectorXd WorldState::observed_vector() const {
  Eigen::VectorXd v(2 * observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) v.segment<2>(2 * i) = observed[i];
  return v;
}

Eigen::VectorXd WorldState::physical_vector() const {
  Eigen::VectorXd v(2 * physical.size());
  for (std::size_t i = 0; i < physical.size(); ++i) v.segment<2>(2 * i) = physical[i];
  return v;
}

bool StepRecord::involves(int agent) const {
  return std::any_of(collisions.begin(), collisions.end(),
                     [agent](const AgentPair& p) { return p.first == agent || p.second == agent; });
}

WorldState initial_state(const WorldParams& params) {
  params.validate();
  WorldState s;
  const Bounds b{0.0, params.arena_size};
  for (const auto& a : params.agents) {
    Vec2 p = a.start;
    clamp_to(p, a.radius, b);
    s.physical.push_back(p);
  }
  s.observed = s.physical;
  return s;
}

Vec2 action_direction(Action a) {
  switch (a) {
    case Action::Stay: return {0.0, 0.0};
    case Action::PlusX: return {1.0, 0.0};
    case Action::MinusX: return {-1.0, 0.0};
    case Action::PlusY: return {0.0, 1.0};
    case Action::MinusY: return {0.0, -1.0};
  }
  throw std::invalid_argument("unknown action");
}

std::optional<FaultModel> fault_for(std::span<const FaultModel> faults, int agent) {
  for (const auto& f : faults)
    if (f.agent == agent && f.kind != FaultKind::Healthy) return f;
  return std::nullopt;
}

void validate_faults(std::span<const FaultModel> faults, int agent_count) {
  std::vector<int> seen(agent_count, 0);
  for (const auto& f : faults) {
    if (f.agent < 0 || f.agent >= agent_count) throw std::invalid_argument("fault refers to unknown agent");
    if (f.kind == FaultKind::Healthy) continue;
    if (++seen[f.agent] > 1) throw std::invalid_argument("at most one fault per agent");
  }
}

ResolveResult resolve_collisions(std::vector<Vec2>& positions, std::span<const double> radii,
                                 int passes, double overlap_tol, std::optional<Bounds> bounds) {
  if (positions.size() != radii.size()) throw std::invalid_argument("positions/radii size mismatch");
  for (const auto& p : positions)
    if (!p.allFinite()) throw std::invalid_argument("non-finite position");

  const int n = static_cast<int>(positions.size());
  ResolveResult out;
  for (int pass = 0; pass < passes; ++pass) {
    bool moved = false;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const Vec2 d = positions[j] - positions[i];
        const double dist = d.norm();
        const double overlap = radii[i] + radii[j] - dist;
        if (overlap <= overlap_tol) continue;
        Vec2 normal;
        if (dist > 0.0) {
          normal = d / dist;
        } else {
          normal = Vec2(1.0, 0.0);
          out.degenerate.emplace_back(i, j);
        }
        positions[i] -= 0.5 * overlap * normal;
        positions[j] += 0.5 * overlap * normal;
        if (bounds) {
          clamp_to(positions[i], radii[i], *bounds);
          clamp_to(positions[j], radii[j], *bounds);
        }
        out.pairs.emplace_back(i, j);
        moved = true;
      }
    }
    if (!moved) break;
  }
  auto tidy = [](std::vector<AgentPair>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  tidy(out.pairs);
  tidy(out.degenerate);
  return out;
}

StepRecord step(const WorldState& state, const Command& cmd, std::span<const FaultModel> faults,
                const WorldParams& params, std::mt19937_64* noise_rng) {
  const int n = params.agent_count();
  if (static_cast<int>(cmd.actions.size()) != n)
    throw std::invalid_argument("command length " + std::to_string(cmd.actions.size()) +
                                " does not match agent count " + std::to_string(n));
  if (state.agent_count() != n || static_cast<int>(state.observed.size()) != n)
    throw std::invalid_argument("state does not match agent count");

  StepRecord rec;
  rec.command = cmd;
  rec.pre = state;

  std::vector<Vec2> next = state.physical;
  for (int i = 0; i < n; ++i) {
    Vec2 disp = params.step_size * action_direction(cmd.actions[i]);
    if (auto f = fault_for(faults, i); f && f->kind == FaultKind::ActuatorAxisLock)
      disp[axis_index(f->axis)] = 0.0;
    next[i] += disp;
  }

  const auto radii = params.radii();
  const Bounds bounds{0.0, params.arena_size};
  for (int i = 0; i < n; ++i) clamp_to(next[i], radii[i], bounds);
  auto resolved = resolve_collisions(next, radii, params.collision_passes, params.overlap_tol, bounds);
  for (int i = 0; i < n; ++i) clamp_to(next[i], radii[i], bounds);

  WorldState post;
  post.physical = next;
  post.observed.resize(n);
  post.tick = state.tick + 1;
  std::normal_distribution<double> noise(0.0, params.observation_noise);
  const bool noisy = noise_rng != nullptr && params.observation_noise > 0.0;
  for (int i = 0; i < n; ++i) {
    const auto f = fault_for(faults, i);
    for (int k = 0; k < 2; ++k) {
      if (f && f->kind == FaultKind::SensorAxisFreeze && axis_index(f->axis) == k) {
        post.observed[i][k] = state.observed[i][k];
      } else {
        post.observed[i][k] = next[i][k] + (noisy ? noise(*noise_rng) : 0.0);
      }
    }
  }
  rec.post = std::move(post);
  rec.collisions = std::move(resolved.pairs);
  return rec;
}

bool FaultReport::any_unresponsive() const { return first_unresponsive().has_value(); }

std::optional<std::pair<int, Axis>> FaultReport::first_unresponsive() const {
  for (std::size_t i = 0; i < axes.size(); ++i)
    for (int k = 0; k < 2; ++k)
      if (axes[i][k] == AxisResponse::Unresponsive) return std::pair{static_cast<int>(i), static_cast<Axis>(k)};
  return std::nullopt;
}

RealWorld::RealWorld(WorldParams params, std::vector<FaultModel> faults)
    : params_(std::move(params)), faults_(std::move(faults)) {
  validate_faults(faults_, params_.agent_count());
  state_ = initial_state(params_);
}

RealWorld::RealWorld(WorldParams params, std::vector<FaultModel> faults, WorldState state)
    : params_(std::move(params)), faults_(std::move(faults)), state_(std::move(state)) {
  params_.validate();
  validate_faults(faults_, params_.agent_count());
  if (state_.agent_count() != params_.agent_count()) throw std::invalid_argument("state does not match agent count");
}

const StepRecord& RealWorld::apply(const Command& cmd, std::optional<double> step_size) {
  if (step_size) {
    WorldParams p = params_;
    p.step_size = *step_size;
    log_.push_back(step(state_, cmd, faults_, p));
  } else {
    log_.push_back(step(state_, cmd, faults_, params_));
  }
  state_ = log_.back().post;
  return log_.back();
}

namespace {

// Would moving `agent` by `delta` (seen from observed positions) stay in
// bounds and clear of every other disk?
bool admissible(const WorldState& s, const WorldParams& params, int agent, const Vec2& delta) {
  const auto radii = params.radii();
  const Vec2 p = s.observed[agent] + delta;
  const double r = radii[agent];
  for (int k = 0; k < 2; ++k)
    if (p[k] < r || p[k] > params.arena_size - r) return false;
  for (int j = 0; j < s.agent_count(); ++j) {
    if (j == agent) continue;
    if ((s.observed[j] - p).norm() <= radii[agent] + radii[j] + params.overlap_tol) return false;
  }
  return true;
}

}  // namespace

FaultReport probe(RealWorld& world, int max_halvings) {
  const int n = world.params().agent_count();
  FaultReport report;
  report.axes.assign(n, {AxisResponse::Responsive, AxisResponse::Responsive});
  report.probe_steps.assign(n, world.params().step_size);

  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 2; ++k) {
      const Axis axis = static_cast<Axis>(k);
      const Action plus = axis == Axis::X ? Action::PlusX : Action::PlusY;
      const Action minus = axis == Axis::X ? Action::MinusX : Action::MinusY;

      double s = world.params().step_size;
      std::optional<std::pair<Action, Action>> order;
      for (int h = 0; h <= max_halvings && !order; ++h, s *= 0.5) {
        Vec2 unit = Vec2::Zero();
        unit[k] = 1.0;
        if (admissible(world.state(), world.params(), i, s * unit))
          order = std::pair{plus, minus};
        else if (admissible(world.state(), world.params(), i, -s * unit))
          order = std::pair{minus, plus};
        if (order) break;
      }
      if (!order)
        throw std::runtime_error("probe: no admissible probe step for agent " + std::to_string(i));
      report.probe_steps[i] = std::min(report.probe_steps[i], s);

      bool unresponsive = true;
      for (Action a : {order->first, order->second}) {
        Command cmd = Command::all_stay(n);
        cmd.actions[i] = a;
        const Vec2 before = world.state().observed[i];
        const StepRecord& rec = world.apply(cmd, s);
        if (!rec.collisions.empty())
          throw std::runtime_error("probe: unexpected collision while probing agent " + std::to_string(i));
        const double moved = std::abs(rec.post.observed[i][k] - before[k]);
        if (moved >= 0.5 * s) unresponsive = false;
      }
      report.axes[i][k] = unresponsive ? AxisResponse::Unresponsive : AxisResponse::Responsive;
    }
  }
  return report;
}

const char* to_string(Action a) {
  switch (a) {
    case Action::Stay: return "stay";
    case Action::PlusX: return "+x";
    case Action::MinusX: return "-x";
    case Action::PlusY: return "+y";
    case Action::MinusY: return "-y";
  }
  return "?";
}

const char* to_string(Axis a) { return a == Axis::X ? "x" : "y"; }

const char* to_string(FaultKind k) {
  switch (k) {
    case FaultKind::Healthy: return "healthy";
    case FaultKind::ActuatorAxisLock: return "actuator_axis_lock";
    case FaultKind::SensorAxisFreeze: return "sensor_axis_freeze";
  }
  return "?";
}

Action action_from_string(const std::string& s) {
  for (int a = 0; a < kActionCount; ++a)
    if (s == to_string(static_cast<Action>(a))) return static_cast<Action>(a);
  throw std::invalid_argument("unknown action '" + s + "'");
}

Axis axis_from_string(const std::string& s) {
  if (s == "x" || s == "X") return Axis::X;
  if (s == "y" || s == "Y") return Axis::Y;
  throw std::invalid_argument("unknown axis '" + s + "'");
}

FaultKind fault_kind_from_string(const std::string& s) {
  for (auto k : {FaultKind::Healthy, FaultKind::ActuatorAxisLock, FaultKind::SensorAxisFreeze})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown fault kind '" + s + "'");
}

}  // namespace swarmfault
