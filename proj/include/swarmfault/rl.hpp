#pragma once

// Policy-gradient learner: factored categorical sampling, generalized
// advantage estimation, PPO-clip updates with Adam, and the classic
// greedy / epsilon-greedy / Boltzmann action selectors.

#include "swarmfault/policy_model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmfault {

using Rng = std::mt19937_64;

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double learning_rate = 3e-4;
  int epochs = 10;
  int minibatch_size = 64;
  int rollout_length = 2048;
  std::int64_t total_steps = 200000;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;
  // Divide rewards by the running std of the discounted return.
  bool scale_rewards = true;
  int hidden = 64;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Thrown when a loss or parameter turns non-finite during an update.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::uint64_t seed, std::int64_t step)
      : std::runtime_error(what + " (seed " + std::to_string(seed) + ", step " + std::to_string(step) + ")"),
        seed_(seed),
        step_(step) {}
  std::uint64_t seed() const { return seed_; }
  std::int64_t step() const { return step_; }

 private:
  std::uint64_t seed_;
  std::int64_t step_;
};

// -- distributions and selectors ------------------------------------------

/// Column-wise softmax (each column is one head).
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

struct SampledAction {
  std::vector<int> actions;  // one per head
  double log_prob = 0.0;     // joint: sum over heads
};

SampledAction sample_action(const Eigen::MatrixXd& logits, Rng& rng);
/// Each head takes its argmax; lowest index wins ties.
SampledAction greedy_action(const Eigen::MatrixXd& logits);
double joint_log_prob(const Eigen::MatrixXd& logits, std::span<const int> actions);

int select_greedy(std::span<const double> values);
Eigen::VectorXd eps_greedy_probabilities(std::span<const double> values, double epsilon);
int select_eps_greedy(std::span<const double> values, double epsilon, Rng& rng);
/// Probabilities proportional to exp(+beta * value); beta = +inf is greedy.
Eigen::VectorXd boltzmann_probabilities(std::span<const double> values, double beta);
int select_boltzmann(std::span<const double> values, double beta, Rng& rng);

/// Inverse-CDF draw from a discrete distribution.
int sample_index(const Eigen::Ref<const Eigen::VectorXd>& probabilities, Rng& rng);

// -- rollouts ---------------------------------------------------------------

class RolloutBuffer {
 public:
  RolloutBuffer(int capacity, int observation_size, int heads);

  void push(const Eigen::VectorXd& observation, std::span<const int> actions, double log_prob, double reward,
            double value, bool done);
  void clear();

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  bool full() const { return size_ == capacity_; }

  const Eigen::MatrixXd& observations() const { return observations_; }  // obs x T
  const Eigen::MatrixXi& actions() const { return actions_; }            // heads x T
  const Eigen::VectorXd& log_probs() const { return log_probs_; }
  const Eigen::VectorXd& rewards() const { return rewards_; }
  const Eigen::VectorXd& values() const { return values_; }
  const std::vector<bool>& dones() const { return dones_; }

 private:
  int capacity_;
  int size_ = 0;
  Eigen::MatrixXd observations_;
  Eigen::MatrixXi actions_;
  Eigen::VectorXd log_probs_, rewards_, values_;
  std::vector<bool> dones_;
};

struct AdvantageEstimate {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;  // advantages + values
};

/// Generalized advantage recursion over the filled part of the buffer;
/// `bootstrap_value` is V(s_T) for the state after the last stored step.
/// Throws std::invalid_argument on an empty buffer.
AdvantageEstimate gae_advantages(const RolloutBuffer& buffer, double gamma, double lambda,
                                 double bootstrap_value);

class Adam {
 public:
  explicit Adam(const PolicyModeld& model, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-5);
  void apply(PolicyModeld& model, const PolicyModeld::Tensors& grads);
  std::int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  PolicyModeld::Tensors m_, v_;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped-surrogate PPO update over `cfg.epochs` shuffled minibatch passes.
/// Advantages are normalized per update; gradients are clipped to a global
/// norm of `cfg.max_grad_norm`. Throws TrainingDiverged on non-finite loss.
UpdateStats ppo_update(PolicyModeld& model, Adam& optimizer, const RolloutBuffer& buffer,
                       const AdvantageEstimate& estimate, const TrainConfig& cfg, Rng& rng,
                       std::int64_t env_step = 0);

/// Per-sample clipped surrogate min(r A, clip(r, 1 - e, 1 + e) A).
double clipped_surrogate(double ratio, double advantage, double clip_epsilon);

// -- training loop -----------------------------------------------------------

struct EnvStep {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool done = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_size() const = 0;
  virtual int head_count() const = 0;
  virtual int action_count() const { return 5; }
  virtual Eigen::VectorXd reset() = 0;
  virtual EnvStep step(std::span<const int> actions) = 0;
};

struct CurveRow {
  int update = 0;
  std::int64_t env_steps = 0;
  double mean_episode_reward = 0.0;
  int episodes = 0;
  UpdateStats stats;
};

struct TrainResult {
  PolicyModeld model;
  std::vector<CurveRow> curve;
};

using TrainCallback = std::function<void(const CurveRow&)>;

/// Runs PPO on `env` for cfg.total_steps environment steps. Deterministic
/// for a fixed cfg.seed and deterministic environment.
TrainResult train_ppo(Environment& env, const TrainConfig& cfg, const TrainCallback& on_update = {});

}  // namespace swarmfault
