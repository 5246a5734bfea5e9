#include "swarmfault/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace swarmfault {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any key left unread.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(path_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec2 read_vec2(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(path + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

TrainConfig read_train(Section& s, TrainConfig t) {
  s.read("gamma", t.gamma);
  s.read("gae_lambda", t.gae_lambda);
  s.read("clip_epsilon", t.clip_epsilon);
  s.read("learning_rate", t.learning_rate);
  s.read("epochs", t.epochs);
  s.read("minibatch_size", t.minibatch_size);
  s.read("rollout_length", t.rollout_length);
  s.read("total_steps", t.total_steps);
  s.read("value_coef", t.value_coef);
  s.read("entropy_coef", t.entropy_coef);
  s.read("max_grad_norm", t.max_grad_norm);
  s.read("scale_rewards", t.scale_rewards);
  s.read("hidden", t.hidden);
  return t;
}

json train_json(const TrainConfig& t) {
  return {{"gamma", t.gamma},
          {"gae_lambda", t.gae_lambda},
          {"clip_epsilon", t.clip_epsilon},
          {"learning_rate", t.learning_rate},
          {"epochs", t.epochs},
          {"minibatch_size", t.minibatch_size},
          {"rollout_length", t.rollout_length},
          {"total_steps", t.total_steps},
          {"value_coef", t.value_coef},
          {"entropy_coef", t.entropy_coef},
          {"max_grad_norm", t.max_grad_norm},
          {"scale_rewards", t.scale_rewards},
          {"hidden", t.hidden}};
}

StageConfig read_stage(const json& j, const std::string& path, StageConfig stage) {
  Section s(j, path);
  // train fields live flat in the stage object
  stage.train = read_train(s, stage.train);
  s.read("horizon", stage.horizon);
  std::string mode = to_string(stage.plan_mode);
  s.read("plan_mode", mode);
  try {
    stage.plan_mode = plan_mode_from_string(mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ".plan_mode: " + e.what());
  }
  s.finish();
  return stage;
}

json stage_json(const StageConfig& st) {
  json j = train_json(st.train);
  j["horizon"] = st.horizon;
  j["plan_mode"] = to_string(st.plan_mode);
  return j;
}

}  // namespace

void BetaRewardSpec::validate() const {
  if (!(proximity_weight > 0 && arrival_bonus > 0 && completion_bonus > 0 && arrival_radius > 0))
    throw std::invalid_argument("beta reward terms must all be positive");
}

void ConveyOptions::validate() const {
  if (!(exploring_starts >= 0.0 && exploring_starts <= 1.0))
    throw std::invalid_argument("convey.exploring_starts must be in [0, 1]");
  if (!(curriculum_fraction > 0.0 && curriculum_fraction <= 1.0))
    throw std::invalid_argument("convey.curriculum_fraction must be in (0, 1]");
}

void MissionConfig::validate() const {
  world.validate();
  validate_faults(faults, world.agent_count());
  beta_reward.validate();
  convey.validate();
  alpha.train.validate();
  beta.train.validate();
  if (alpha.horizon < 1 || beta.horizon < 1) throw std::invalid_argument("horizons must be >= 1");
  if (!(classify_margin >= 0.0)) throw std::invalid_argument("classify_margin must be >= 0");
}

RunConfig default_run_config() {
  RunConfig cfg;
  auto& w = cfg.mission.world;
  w.arena_size = 10.0;
  w.step_size = 0.25;
  w.collision_passes = 8;
  w.overlap_tol = 1e-9;
  const Vec2 starts[] = {{2.5, 2.5}, {5.0, 2.5}, {7.5, 2.5}};
  const Vec2 goals[] = {{2.5, 7.5}, {5.0, 7.5}, {7.5, 7.5}};
  for (int i = 0; i < 3; ++i) w.agents.push_back({i, 0.5, starts[i], goals[i]});
  cfg.mission.faults = {{FaultKind::ActuatorAxisLock, Axis::Y, 1}};
  cfg.mission.alpha.horizon = 64;
  cfg.mission.alpha.plan_mode = PlanMode::Stochastic;
  cfg.mission.beta.horizon = 256;
  cfg.mission.beta.plan_mode = PlanMode::Greedy;
  cfg.mission.beta.train.total_steps = 1000000;
  cfg.mission.seed = 0;
  return cfg;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg = default_run_config();
  Section root(j, "config");

  if (const json* wj = root.child("world")) {
    Section s(*wj, "world");
    auto& w = cfg.mission.world;
    s.read("arena_size", w.arena_size);
    s.read("step_size", w.step_size);
    s.read("collision_passes", w.collision_passes);
    s.read("overlap_tol", w.overlap_tol);
    s.read("observation_noise", w.observation_noise);
    if (const json* aj = s.child("agents")) {
      if (!aj->is_array()) throw ConfigError("world.agents: expected an array");
      w.agents.clear();
      for (std::size_t i = 0; i < aj->size(); ++i) {
        const std::string path = "world.agents[" + std::to_string(i) + "]";
        Section a((*aj)[i], path);
        AgentSpec spec;
        spec.id = static_cast<int>(i);
        a.read("radius", spec.radius);
        if (const json* sj = a.child("start")) spec.start = read_vec2(*sj, path + ".start");
        else throw ConfigError(path + ": missing start");
        if (const json* gj = a.child("goal")) spec.goal = read_vec2(*gj, path + ".goal");
        else throw ConfigError(path + ": missing goal");
        a.finish();
        w.agents.push_back(spec);
      }
    }
    s.finish();
  }

  if (const json* fj = root.child("faults")) {
    if (!fj->is_array()) throw ConfigError("faults: expected an array");
    cfg.mission.faults.clear();
    for (std::size_t i = 0; i < fj->size(); ++i) {
      const std::string path = "faults[" + std::to_string(i) + "]";
      Section f((*fj)[i], path);
      FaultModel m;
      std::string kind = "healthy", axis = "x";
      f.read("agent", m.agent);
      f.read("kind", kind);
      f.read("axis", axis);
      f.finish();
      try {
        m.kind = fault_kind_from_string(kind);
        m.axis = axis_from_string(axis);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
      }
      cfg.mission.faults.push_back(m);
    }
  }

  if (const json* rj = root.child("rewards")) {
    Section s(*rj, "rewards");
    s.read("theta_work", cfg.mission.theta_work);
    s.read("classify_margin", cfg.mission.classify_margin);
    if (const json* bj = s.child("beta")) {
      Section b(*bj, "rewards.beta");
      auto& spec = cfg.mission.beta_reward;
      b.read("proximity_weight", spec.proximity_weight);
      b.read("arrival_bonus", spec.arrival_bonus);
      b.read("completion_bonus", spec.completion_bonus);
      b.read("arrival_radius", spec.arrival_radius);
      b.finish();
    }
    s.finish();
  }

  if (const json* cj = root.child("convey")) {
    Section s(*cj, "convey");
    auto& c = cfg.mission.convey;
    s.read("arrival_flags", c.arrival_flags);
    s.read("absorbing_completion", c.absorbing_completion);
    s.read("exploring_starts", c.exploring_starts);
    s.read("curriculum_fraction", c.curriculum_fraction);
    s.finish();
  }

  if (const json* tj = root.child("train")) {
    Section s(*tj, "train");
    if (const json* aj = s.child("alpha")) cfg.mission.alpha = read_stage(*aj, "train.alpha", cfg.mission.alpha);
    if (const json* bj = s.child("beta")) cfg.mission.beta = read_stage(*bj, "train.beta", cfg.mission.beta);
    s.finish();
  }

  if (const json* hj = root.child("harness")) {
    Section s(*hj, "harness");
    s.read("seeds", cfg.harness.seeds);
    s.read("threads", cfg.harness.threads);
    s.read("bench_sizes", cfg.harness.bench_sizes);
    s.read("bench_repetitions", cfg.harness.bench_repetitions);
    s.read("bench_density", cfg.harness.bench_density);
    s.finish();
  }

  std::string output = cfg.output.string();
  root.read("output", output);
  cfg.output = output;
  root.read("seed", cfg.mission.seed);
  root.finish();

  if (cfg.harness.seeds < 1) throw ConfigError("harness.seeds must be >= 1");
  if (cfg.harness.threads < 1) throw ConfigError("harness.threads must be >= 1");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

json to_json(const RunConfig& cfg) {
  const auto& m = cfg.mission;
  json agents = json::array();
  for (const auto& a : m.world.agents)
    agents.push_back({{"radius", a.radius}, {"start", vec2_json(a.start)}, {"goal", vec2_json(a.goal)}});
  json faults = json::array();
  for (const auto& f : m.faults)
    faults.push_back({{"agent", f.agent}, {"kind", to_string(f.kind)}, {"axis", to_string(f.axis)}});
  return {
      {"world",
       {{"arena_size", m.world.arena_size},
        {"step_size", m.world.step_size},
        {"collision_passes", m.world.collision_passes},
        {"overlap_tol", m.world.overlap_tol},
        {"observation_noise", m.world.observation_noise},
        {"agents", agents}}},
      {"faults", faults},
      {"rewards",
       {{"theta_work", m.theta_work},
        {"classify_margin", m.classify_margin},
        {"beta",
         {{"proximity_weight", m.beta_reward.proximity_weight},
          {"arrival_bonus", m.beta_reward.arrival_bonus},
          {"completion_bonus", m.beta_reward.completion_bonus},
          {"arrival_radius", m.beta_reward.arrival_radius}}}}},
      {"convey",
       {{"arrival_flags", m.convey.arrival_flags},
        {"absorbing_completion", m.convey.absorbing_completion},
        {"exploring_starts", m.convey.exploring_starts},
        {"curriculum_fraction", m.convey.curriculum_fraction}}},
      {"train", {{"alpha", stage_json(m.alpha)}, {"beta", stage_json(m.beta)}}},
      {"harness",
       {{"seeds", cfg.harness.seeds},
        {"threads", cfg.harness.threads},
        {"bench_sizes", cfg.harness.bench_sizes},
        {"bench_repetitions", cfg.harness.bench_repetitions},
        {"bench_density", cfg.harness.bench_density}}},
      {"output", cfg.output.string()},
      {"seed", m.seed},
  };
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

bool operator==(const AgentSpec& a, const AgentSpec& b) {
  return a.id == b.id && a.radius == b.radius && a.start == b.start && a.goal == b.goal;
}

bool operator==(const WorldParams& a, const WorldParams& b) {
  return a.arena_size == b.arena_size && a.step_size == b.step_size && a.collision_passes == b.collision_passes &&
         a.overlap_tol == b.overlap_tol && a.observation_noise == b.observation_noise && a.agents == b.agents;
}

bool operator==(const MissionConfig& a, const MissionConfig& b) {
  return a.world == b.world && a.faults == b.faults && a.beta_reward == b.beta_reward &&
         a.convey == b.convey && a.theta_work == b.theta_work && a.classify_margin == b.classify_margin && a.alpha == b.alpha &&
         a.beta == b.beta && a.seed == b.seed;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.mission == b.mission && a.harness == b.harness && a.output == b.output;
}

const char* to_string(PlanMode m) { return m == PlanMode::Greedy ? "greedy" : "stochastic"; }

PlanMode plan_mode_from_string(const std::string& s) {
  if (s == "greedy") return PlanMode::Greedy;
  if (s == "stochastic") return PlanMode::Stochastic;
  throw std::invalid_argument("unknown plan mode '" + s + "'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace swarmfault
