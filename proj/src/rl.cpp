#include "swarmfault/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace swarmfault {

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("gae_lambda must be in [0, 1]");
  if (!(clip_epsilon > 0.0)) throw std::invalid_argument("clip_epsilon must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (minibatch_size < 1) throw std::invalid_argument("minibatch_size must be >= 1");
  if (rollout_length < 1) throw std::invalid_argument("rollout_length must be >= 1");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (!(value_coef >= 0.0)) throw std::invalid_argument("value_coef must be >= 0");
  if (!(entropy_coef >= 0.0)) throw std::invalid_argument("entropy_coef must be >= 0");
  if (!(max_grad_norm > 0.0)) throw std::invalid_argument("max_grad_norm must be positive");
  if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    p.col(c) = (logits.col(c).array() - m).exp().matrix();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

namespace {

Eigen::VectorXd log_softmax(const Eigen::Ref<const Eigen::VectorXd>& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return (z.array() - lse).matrix();
}

int argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> values) {
  return {values.data(), static_cast<Eigen::Index>(values.size())};
}

}  // namespace

int sample_index(const Eigen::Ref<const Eigen::VectorXd>& probabilities, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u = u01(rng) * probabilities.sum();
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    last_positive = i;
    acc += probabilities[i];
    if (u < acc) return i;
  }
  return last_positive;
}

SampledAction sample_action(const Eigen::MatrixXd& logits, Rng& rng) {
  SampledAction s;
  s.actions.resize(logits.cols());
  for (Eigen::Index h = 0; h < logits.cols(); ++h) {
    const Eigen::VectorXd lp = log_softmax(logits.col(h));
    const int a = sample_index(lp.array().exp().matrix(), rng);
    s.actions[h] = a;
    s.log_prob += lp[a];
  }
  return s;
}

SampledAction greedy_action(const Eigen::MatrixXd& logits) {
  SampledAction s;
  s.actions.resize(logits.cols());
  for (Eigen::Index h = 0; h < logits.cols(); ++h) {
    const Eigen::VectorXd lp = log_softmax(logits.col(h));
    const int a = argmax_lowest(logits.col(h));
    s.actions[h] = a;
    s.log_prob += lp[a];
  }
  return s;
}

double joint_log_prob(const Eigen::MatrixXd& logits, std::span<const int> actions) {
  if (static_cast<Eigen::Index>(actions.size()) != logits.cols())
    throw std::invalid_argument("action count does not match head count");
  double lp = 0.0;
  for (Eigen::Index h = 0; h < logits.cols(); ++h) lp += log_softmax(logits.col(h))[actions[h]];
  return lp;
}

int select_greedy(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("no values to select from");
  return argmax_lowest(as_vector(values));
}

Eigen::VectorXd eps_greedy_probabilities(std::span<const double> values, double epsilon) {
  if (values.empty()) throw std::invalid_argument("no values to select from");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in [0, 1]");
  const auto k = static_cast<Eigen::Index>(values.size());
  Eigen::VectorXd p = Eigen::VectorXd::Constant(k, epsilon / static_cast<double>(k));
  p[select_greedy(values)] += 1.0 - epsilon;
  return p;
}

int select_eps_greedy(std::span<const double> values, double epsilon, Rng& rng) {
  return sample_index(eps_greedy_probabilities(values, epsilon), rng);
}

Eigen::VectorXd boltzmann_probabilities(std::span<const double> values, double beta) {
  if (values.empty()) throw std::invalid_argument("no values to select from");
  if (std::isnan(beta)) throw std::invalid_argument("beta must not be NaN");
  const auto v = as_vector(values);
  if (std::isinf(beta)) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(v.size());
    p[beta > 0 ? argmax_lowest(v) : argmax_lowest(-v)] = 1.0;
    return p;
  }
  Eigen::VectorXd z = beta * v;
  z.array() -= z.maxCoeff();
  Eigen::VectorXd p = z.array().exp().matrix();
  return p / p.sum();
}

int select_boltzmann(std::span<const double> values, double beta, Rng& rng) {
  return sample_index(boltzmann_probabilities(values, beta), rng);
}

RolloutBuffer::RolloutBuffer(int capacity, int observation_size, int heads)
    : capacity_(capacity),
      observations_(observation_size, capacity),
      actions_(heads, capacity),
      log_probs_(capacity),
      rewards_(capacity),
      values_(capacity),
      dones_(capacity, false) {
  if (capacity < 1) throw std::invalid_argument("buffer capacity must be >= 1");
}

void RolloutBuffer::push(const Eigen::VectorXd& observation, std::span<const int> actions, double log_prob,
                         double reward, double value, bool done) {
  if (full()) throw std::length_error("rollout buffer is full");
  if (observation.size() != observations_.rows()) throw std::invalid_argument("observation size mismatch");
  if (static_cast<Eigen::Index>(actions.size()) != actions_.rows())
    throw std::invalid_argument("action count mismatch");
  observations_.col(size_) = observation;
  for (Eigen::Index h = 0; h < actions_.rows(); ++h) actions_(h, size_) = actions[h];
  log_probs_[size_] = log_prob;
  rewards_[size_] = reward;
  values_[size_] = value;
  dones_[size_] = done;
  ++size_;
}

void RolloutBuffer::clear() { size_ = 0; }

AdvantageEstimate gae_advantages(const RolloutBuffer& buffer, double gamma, double lambda,
                                 double bootstrap_value) {
  const int n = buffer.size();
  if (n == 0) throw std::invalid_argument("gae_advantages: empty buffer");
  AdvantageEstimate est;
  est.advantages.resize(n);
  double running = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double next_value = t == n - 1 ? bootstrap_value : buffer.values()[t + 1];
    const double live = buffer.dones()[t] ? 0.0 : 1.0;
    const double delta = buffer.rewards()[t] + gamma * next_value * live - buffer.values()[t];
    running = delta + gamma * lambda * live * running;
    est.advantages[t] = running;
  }
  est.returns = est.advantages + buffer.values().head(n);
  return est;
}

Adam::Adam(const PolicyModeld& model, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (int k = 0; k < PolicyModeld::kTensorCount; ++k) {
    const auto& w = model.tensors()[k];
    m_[k] = Eigen::MatrixXd::Zero(w.rows(), w.cols());
    v_[k] = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  }
}

void Adam::apply(PolicyModeld& model, const PolicyModeld::Tensors& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (int k = 0; k < PolicyModeld::kTensorCount; ++k) {
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grads[k];
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grads[k].cwiseAbs2();
    model.tensors()[k].array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
  }
}

double clipped_surrogate(double ratio, double advantage, double clip_epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

UpdateStats ppo_update(PolicyModeld& model, Adam& optimizer, const RolloutBuffer& buffer,
                       const AdvantageEstimate& estimate, const TrainConfig& cfg, Rng& rng,
                       std::int64_t env_step) {
  const int n = buffer.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty buffer");
  if (estimate.advantages.size() != n || estimate.returns.size() != n)
    throw std::invalid_argument("ppo_update: advantage estimate does not match buffer");

  const int heads = model.shape().heads;
  const int actions = model.shape().actions;

  Eigen::VectorXd adv = estimate.advantages;
  const double mean = adv.mean();
  const double var = (adv.array() - mean).square().mean();
  adv = (adv.array() - mean) / (std::sqrt(var) + 1e-8);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  UpdateStats total;
  int batches = 0;
  PolicyModeld::Batch fwd;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < n; start += cfg.minibatch_size) {
      const int b = std::min(cfg.minibatch_size, n - start);
      Eigen::MatrixXd obs(buffer.observations().rows(), b);
      for (int j = 0; j < b; ++j) obs.col(j) = buffer.observations().col(order[start + j]);
      model.forward(obs, fwd);

      Eigen::MatrixXd dlogits(heads * actions, b);
      Eigen::RowVectorXd dvalue(b);
      double pi_loss = 0.0, v_loss = 0.0, entropy = 0.0, kl = 0.0, clipped = 0.0;
      for (int j = 0; j < b; ++j) {
        const int idx = order[start + j];
        double logp = 0.0;
        std::vector<Eigen::VectorXd> probs(heads);
        std::vector<double> head_entropy(heads);
        for (int h = 0; h < heads; ++h) {
          const Eigen::VectorXd lp = log_softmax(fwd.logits.block(h * actions, j, actions, 1));
          probs[h] = lp.array().exp().matrix();
          logp += lp[buffer.actions()(h, idx)];
          head_entropy[h] = -(probs[h].array() * lp.array()).sum();
          entropy += head_entropy[h];
        }
        const double old_logp = buffer.log_probs()[idx];
        const double ratio = std::exp(logp - old_logp);
        const double a = adv[idx];
        const double unclipped = ratio * a;
        const double surrogate = clipped_surrogate(ratio, a, cfg.clip_epsilon);
        pi_loss -= surrogate;
        kl += old_logp - logp;
        if (std::abs(ratio - 1.0) > cfg.clip_epsilon) clipped += 1.0;
        // d(-surrogate)/d(logp): nonzero only when the unclipped branch is active
        const double dlogp = unclipped <= surrogate ? -unclipped / b : 0.0;
        for (int h = 0; h < heads; ++h) {
          auto block = dlogits.block(h * actions, j, actions, 1);
          block = -dlogp * probs[h];
          block(buffer.actions()(h, idx), 0) += dlogp;
          if (cfg.entropy_coef > 0.0) {
            const Eigen::ArrayXd lp = probs[h].array().max(1e-300).log();
            // d(-c H)/dz_k = c p_k (log p_k + H)
            block.array() += (cfg.entropy_coef / b) * probs[h].array() * (lp + head_entropy[h]);
          }
        }
        const double err = fwd.value(j) - estimate.returns[idx];
        v_loss += 0.5 * err * err;
        dvalue(j) = cfg.value_coef * err / b;
      }
      pi_loss /= b;
      v_loss /= b;
      entropy /= b;
      if (!std::isfinite(pi_loss) || !std::isfinite(v_loss))
        throw TrainingDiverged("non-finite PPO loss", cfg.seed, env_step);

      auto grads = model.backward(fwd, dlogits, dvalue);
      double sq = 0.0;
      for (const auto& g : grads) sq += g.squaredNorm();
      const double norm = std::sqrt(sq);
      if (!std::isfinite(norm)) throw TrainingDiverged("non-finite gradient", cfg.seed, env_step);
      if (norm > cfg.max_grad_norm)
        for (auto& g : grads) g *= cfg.max_grad_norm / norm;
      optimizer.apply(model, grads);

      total.policy_loss += pi_loss;
      total.value_loss += v_loss;
      total.entropy += entropy;
      total.approx_kl += kl / b;
      total.clip_fraction += clipped / b;
      ++batches;
    }
  }
  if (!model.all_finite()) throw TrainingDiverged("non-finite weights", cfg.seed, env_step);
  total.policy_loss /= batches;
  total.value_loss /= batches;
  total.entropy /= batches;
  total.approx_kl /= batches;
  total.clip_fraction /= batches;
  return total;
}

TrainResult train_ppo(Environment& env, const TrainConfig& cfg, const TrainCallback& on_update) {
  cfg.validate();
  Rng rng(cfg.seed);
  ModelShape shape{env.observation_size(), cfg.hidden, env.head_count(), env.action_count()};
  TrainResult result{PolicyModeld::initialized(shape, rng), {}};
  PolicyModeld& model = result.model;
  Adam adam(model, cfg.learning_rate);
  RolloutBuffer buffer(cfg.rollout_length, shape.inputs, shape.heads);

  Eigen::VectorXd obs = env.reset();
  // running statistics of the discounted return, for reward scaling
  double ret = 0.0, ret_mean = 0.0, ret_m2 = 0.0;
  std::int64_t ret_count = 0;
  double episode_reward = 0.0;
  std::int64_t steps = 0;
  int update = 0;
  while (steps < cfg.total_steps) {
    buffer.clear();
    double finished_reward = 0.0;
    int finished = 0;
    bool last_done = false;
    while (!buffer.full() && steps < cfg.total_steps) {
      const auto out = model.forward(obs);
      const auto sample = sample_action(out.logits, rng);
      EnvStep st = env.step(sample.actions);
      double reward = st.reward;
      if (cfg.scale_rewards) {
        ret = ret * cfg.gamma + st.reward;
        ++ret_count;
        const double delta = ret - ret_mean;
        ret_mean += delta / static_cast<double>(ret_count);
        ret_m2 += delta * (ret - ret_mean);
        const double scale = ret_count > 1 ? std::sqrt(ret_m2 / static_cast<double>(ret_count) + 1e-8) : 1.0;
        reward = std::clamp(st.reward / scale, -10.0, 10.0);
        if (st.done) ret = 0.0;
      }
      buffer.push(obs, sample.actions, sample.log_prob, reward, out.value, st.done);
      ++steps;
      episode_reward += st.reward;
      last_done = st.done;
      if (st.done) {
        finished_reward += episode_reward;
        ++finished;
        episode_reward = 0.0;
        obs = env.reset();
      } else {
        obs = std::move(st.observation);
      }
    }
    const double bootstrap = last_done ? 0.0 : model.forward(obs).value;
    const auto estimate = gae_advantages(buffer, cfg.gamma, cfg.gae_lambda, bootstrap);
    CurveRow row;
    row.update = update++;
    row.env_steps = steps;
    row.episodes = finished;
    row.mean_episode_reward = finished > 0 ? finished_reward / finished : std::numeric_limits<double>::quiet_NaN();
    row.stats = ppo_update(model, adam, buffer, estimate, cfg, rng, steps);
    result.curve.push_back(row);
    if (on_update) on_update(row);
  }
  return result;
}

}  // namespace swarmfault
