#pragma once

// Deterministic 2-D arena of rigid-disk agents with per-agent fault models.
//
// Physical truth and base-observed state are tracked separately: an
// actuator lock blocks self-actuation along one axis, a sensor freeze keeps
// reporting the fault-onset coordinate along one axis.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace swarmfault {

using Vec2 = Eigen::Vector2d;

enum class Axis : std::uint8_t { X = 0, Y = 1 };

enum class FaultKind : std::uint8_t { Healthy, ActuatorAxisLock, SensorAxisFreeze };

enum class Action : std::uint8_t { Stay = 0, PlusX, MinusX, PlusY, MinusY };

inline constexpr int kActionCount = 5;

struct AgentSpec {
  int id = 0;
  double radius = 0.5;
  Vec2 start = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
};

struct FaultModel {
  FaultKind kind = FaultKind::Healthy;
  Axis axis = Axis::X;
  int agent = 0;

  bool operator==(const FaultModel&) const = default;
};

struct Command {
  std::vector<Action> actions;

  Command() = default;
  explicit Command(std::vector<Action> a) : actions(std::move(a)) {}
  static Command all_stay(int agents) { return Command(std::vector<Action>(agents, Action::Stay)); }

  bool operator==(const Command&) const = default;
};

struct WorldParams {
  double arena_size = 10.0;
  double step_size = 0.25;
  int collision_passes = 8;
  double overlap_tol = 1e-9;
  // Gaussian noise on non-frozen observed coordinates; only applied when a
  // noise generator is handed to step().
  double observation_noise = 0.0;
  std::vector<AgentSpec> agents;

  int agent_count() const { return static_cast<int>(agents.size()); }
  std::vector<double> radii() const;
  void validate() const;
};

struct WorldState {
  std::vector<Vec2> physical;
  std::vector<Vec2> observed;
  std::int64_t tick = 0;

  int agent_count() const { return static_cast<int>(physical.size()); }
  // Observed centers flattened as (x0, y0, x1, y1, ...).
  Eigen::VectorXd observed_vector() const;
  Eigen::VectorXd physical_vector() const;

  bool operator==(const WorldState& o) const {
    return tick == o.tick && physical == o.physical && observed == o.observed;
  }
};

using AgentPair = std::pair<int, int>;

struct StepRecord {
  Command command;
  WorldState pre;
  WorldState post;
  std::vector<AgentPair> collisions;

  bool involves(int agent) const;
};

struct ResolveResult {
  std::vector<AgentPair> pairs;       // every pair separated at least once, sorted
  std::vector<AgentPair> degenerate;  // pairs with coincident centers
};

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

/// Initial state with every agent at its start and observed == physical.
WorldState initial_state(const WorldParams& params);

/// Unit displacement of an action, before scaling by the step size.
Vec2 action_direction(Action a);

std::optional<FaultModel> fault_for(std::span<const FaultModel> faults, int agent);
void validate_faults(std::span<const FaultModel> faults, int agent_count);

/// Positional pair solver: each overlapping pair (ascending index order) is
/// pushed apart along the center line, each disk moving overlap/2. When
/// `bounds` is given each disk is clamped to [lo + r, hi - r] after every
/// push. Coincident centers separate along +x.
ResolveResult resolve_collisions(std::vector<Vec2>& positions, std::span<const double> radii,
                                 int passes, double overlap_tol,
                                 std::optional<Bounds> bounds = std::nullopt);

/// Advances the world one tick. Throws std::invalid_argument on a command
/// whose length differs from the agent count.
StepRecord step(const WorldState& state, const Command& cmd, std::span<const FaultModel> faults,
                const WorldParams& params, std::mt19937_64* noise_rng = nullptr);

enum class AxisResponse : std::uint8_t { Responsive, Unresponsive };

struct FaultReport {
  // [agent][axis]
  std::vector<std::array<AxisResponse, 2>> axes;
  std::vector<double> probe_steps;  // probe step actually used per agent

  bool any_unresponsive() const;
  // First (agent, axis) flagged unresponsive.
  std::optional<std::pair<int, Axis>> first_unresponsive() const;
  bool operator==(const FaultReport& o) const { return axes == o.axes; }
};

/// The real agents: the base can command them and read observed state, the
/// fault list is held here but never consulted by planning code.
class RealWorld {
 public:
  RealWorld(WorldParams params, std::vector<FaultModel> faults);
  RealWorld(WorldParams params, std::vector<FaultModel> faults, WorldState state);

  // `step_size` overrides the configured step for this command only.
  const StepRecord& apply(const Command& cmd, std::optional<double> step_size = std::nullopt);
  const WorldState& state() const { return state_; }
  const WorldParams& params() const { return params_; }
  const std::vector<StepRecord>& log() const { return log_; }
  std::span<const FaultModel> hidden_faults() const { return faults_; }

 private:
  WorldParams params_;
  std::vector<FaultModel> faults_;
  WorldState state_;
  std::vector<StepRecord> log_;
};

/// Commands each agent +axis then -axis by a small step, others staying, and
/// flags axes whose observed displacement stays under half the probe step.
/// The probe step is halved until the move is collision-free and in bounds;
/// throws std::runtime_error when no admissible step exists.
FaultReport probe(RealWorld& world, int max_halvings = 6);

const char* to_string(Action a);
const char* to_string(Axis a);
const char* to_string(FaultKind k);
Action action_from_string(const std::string& s);
Axis axis_from_string(const std::string& s);
FaultKind fault_kind_from_string(const std::string& s);

}  // namespace swarmfault
