#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Each one is the slow, obvious version of something the library does fast.

#include "swarmfault/policy_model.hpp"
#include "swarmfault/rl.hpp"
#include "swarmfault/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using swarmfault::PolicyModeld;

// Largest relative error between backward() and central differences of the
// linear probe loss L = <C, logits> + <d, value> over a random batch.
// Components where both gradients are below `floor` are compared absolutely
// against it.
inline double backprop_fd_error(std::uint64_t seed, int inputs = 6, int hidden = 16, int heads = 3,
                                int batch = 4, double h = 1e-5, double floor = 1e-8) {
  std::mt19937_64 rng(seed);
  swarmfault::ModelShape shape{inputs, hidden, heads, 5};
  PolicyModeld model = PolicyModeld::initialized(shape, rng);
  // perturb biases and the small policy head so no gradient is trivially zero
  std::normal_distribution<double> n01(0.0, 1.0);
  for (auto& t : model.tensors())
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += 0.3 * n01(rng);

  Eigen::MatrixXd obs(inputs, batch);
  for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = n01(rng);
  Eigen::MatrixXd c(shape.logit_count(), batch);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = n01(rng);
  Eigen::RowVectorXd d(batch);
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = n01(rng);

  // the differences are taken on an extended-precision copy so roundoff
  // stays far below the tolerance even for tiny gradient components
  using Wide = swarmfault::PolicyModel<long double>;
  Wide wide(shape);
  for (int k = 0; k < PolicyModeld::kTensorCount; ++k) wide.tensors()[k] = model.tensors()[k].cast<long double>();
  const Wide::Matrix obs_w = obs.cast<long double>();
  const Wide::Matrix c_w = c.cast<long double>();
  const Wide::RowVector d_w = d.cast<long double>();
  auto loss = [&](const Wide& m) {
    Wide::Batch b;
    m.forward(obs_w, b);
    return (b.logits.cwiseProduct(c_w)).sum() + b.value.dot(d_w);
  };

  PolicyModeld::Batch b;
  model.forward(obs, b);
  const auto grads = model.backward(b, c, d);

  double worst = 0.0;
  for (int k = 0; k < PolicyModeld::kTensorCount; ++k) {
    auto& t = wide.tensors()[k];
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const long double keep = t.data()[i];
      t.data()[i] = keep + h;
      const long double up = loss(wide);
      t.data()[i] = keep - h;
      const long double down = loss(wide);
      t.data()[i] = keep;
      const double numeric = static_cast<double>((up - down) / (2 * h));
      const double analytic = grads[k].data()[i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), floor});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

// Advantages by explicit summation: A_t = sum_k (gamma lambda)^(k-t) delta_k
// up to the end of t's episode.
inline std::vector<double> gae_quadratic(const std::vector<double>& rewards, const std::vector<double>& values,
                                         const std::vector<bool>& dones, double bootstrap, double gamma,
                                         double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = dones[t] ? 0.0 : (t + 1 < n ? values[t + 1] : bootstrap);
    delta[t] = rewards[t] + gamma * next - values[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      adv[t] += w * delta[k];
      if (dones[k]) break;
      w *= gamma * lambda;
    }
  }
  return adv;
}

// Deterministic chain: states 0..S-1, actions 0 = left, 1 = right. Reaching
// the right end pays 1 and ends the episode; stepping left from state 0
// pays `trap` and ends it too.
struct Chain {
  int states = 5;
  double trap = 0.1;

  struct Outcome {
    int next;
    double reward;
    bool done;
  };
  Outcome step(int s, int a) const {
    if (a == 0) {
      if (s == 0) return {0, trap, true};
      return {s - 1, 0.0, false};
    }
    if (s + 1 == states - 1) return {s + 1, 1.0, true};
    return {s + 1, 0.0, false};
  }

  double q(int s, int a, const std::vector<double>& v, double gamma) const {
    const auto o = step(s, a);
    return o.reward + (o.done ? 0.0 : gamma * v[o.next]);
  }

  // Greedy action of Q* (by value iteration) for each non-terminal state.
  std::vector<int> optimal_policy(double gamma) const {
    std::vector<double> v(states, 0.0);
    for (int it = 0; it < 10000; ++it) {
      std::vector<double> nv(states, 0.0);
      for (int s = 0; s + 1 < states; ++s) nv[s] = std::max(q(s, 0, v, gamma), q(s, 1, v, gamma));
      v = nv;
    }
    std::vector<int> pi;
    for (int s = 0; s + 1 < states; ++s) pi.push_back(q(s, 1, v, gamma) > q(s, 0, v, gamma) ? 1 : 0);
    return pi;
  }
};

class ChainEnv : public swarmfault::Environment {
 public:
  ChainEnv(Chain chain, std::uint64_t seed, int horizon = 20) : chain_(chain), rng_(seed), horizon_(horizon) {}
  int observation_size() const override { return chain_.states; }
  int head_count() const override { return 1; }
  int action_count() const override { return 2; }
  Eigen::VectorXd reset() override {
    s_ = static_cast<int>(rng_() % static_cast<std::uint64_t>(chain_.states - 1));
    t_ = 0;
    return obs(s_);
  }
  swarmfault::EnvStep step(std::span<const int> a) override {
    const auto o = chain_.step(s_, a[0]);
    s_ = o.next;
    ++t_;
    return {obs(s_), o.reward, o.done || t_ >= horizon_};
  }
  Eigen::VectorXd obs(int s) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(chain_.states);
    v[s] = 1.0;
    return v;
  }

 private:
  Chain chain_;
  std::mt19937_64 rng_;
  int horizon_;
  int s_ = 0, t_ = 0;
};

inline swarmfault::TrainConfig chain_train_config(std::uint64_t seed) {
  swarmfault::TrainConfig cfg;
  cfg.rollout_length = 512;
  cfg.total_steps = 20480;
  cfg.hidden = 32;
  cfg.seed = seed;
  return cfg;
}

// Trains PPO on the chain and compares its greedy policy with value iteration.
inline bool ppo_solves_chain(std::uint64_t seed) {
  const Chain chain;
  const auto cfg = chain_train_config(seed);
  ChainEnv env(chain, seed ^ 0x9e3779b97f4a7c15ULL);
  const auto result = swarmfault::train_ppo(env, cfg);
  const auto target = chain.optimal_policy(cfg.gamma);
  for (int s = 0; s + 1 < chain.states; ++s) {
    const auto out = result.model.forward(env.obs(s));
    if (swarmfault::greedy_action(out.logits).actions[0] != target[s]) return false;
  }
  return true;
}

// All pairs within `cutoff`, by the definition.
inline swarmfault::PairList pairs_by_definition(const std::vector<swarmfault::Vec2>& pts, double cutoff) {
  swarmfault::PairList out;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i)
    for (int j = i + 1; j < static_cast<int>(pts.size()); ++j)
      if ((pts[i] - pts[j]).squaredNorm() <= cutoff * cutoff) out.emplace_back(i, j);
  return out;
}

}  // namespace oracle
