#include "hdice/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hdice {

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::Gae:
      return "gae";
    case Estimator::Hca:
      return "hca";
    case Estimator::HcaClip:
      return "hca_clip";
    case Estimator::HDice:
      return "hdice";
  }
  return "?";
}

void PpoConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ContractError("clip_eps must lie in (0, 1)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("gamma must lie in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ContractError("gae_lambda must lie in [0, 1]");
  if (epochs < 1) throw ContractError("ppo epochs must be at least 1");
  if (minibatch_size < 1) throw ContractError("minibatch size must be positive");
  if (!(lr > 0.0)) throw ContractError("learning rate must be positive");
  if (max_grad_norm && !(*max_grad_norm > 0.0)) throw ContractError("max_grad_norm must be positive");
}

GaeResult gae_advantages(const RolloutBatch& batch, const Vector& values, double gamma, double lambda) {
  require_dims(values.size() == batch.size(), "value estimates do not match the batch");
  GaeResult out;
  out.advantages.estimator = Estimator::Gae;
  out.advantages.values.resize(batch.size());
  for (std::size_t i = 0; i < batch.trajectory_count(); ++i) {
    const auto begin = batch.offsets[i], end = batch.offsets[i + 1];
    double running = 0.0;
    for (Eigen::Index t = end; t-- > begin;) {
      const double next_value = (t + 1 < end) ? values(t + 1) : 0.0;
      const double delta = batch.rewards(t) + gamma * next_value - values(t);
      running = delta + gamma * lambda * running;
      out.advantages.values(t) = running;
    }
  }
  out.value_targets = out.advantages.values + values;
  ensure_finite(out.advantages.values, "gae advantages");
  return out;
}

GaeResult gae_advantages(const RolloutBatch& batch, const ActorCritic& model, double gamma, double lambda) {
  return gae_advantages(batch, model.values(batch.observations), gamma, lambda);
}

Vector standardize(const Vector& x) {
  if (x.size() == 0) return x;
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().mean());
  return (x.array() - mean) / std::max(sd, 1e-8);
}

PpoLoss ppo_loss(const ActorCritic& model, const Matrix& observations, const Matrix& actions,
                 const Vector& old_log_probs, const Vector& advantages, const Vector* value_targets,
                 const PpoConfig& config) {
  const auto n = observations.rows();
  require_dims(n > 0 && actions.rows() == n && old_log_probs.size() == n && advantages.size() == n,
               "ppo minibatch fields have unequal lengths");
  if (value_targets) {
    if (!model.has_value_head()) throw ContractError("value targets given for a policy without a value head");
    require_dims(value_targets->size() == n, "value targets do not match the minibatch");
  }
  const auto pass = model.forward(observations);
  const auto lik = evaluate_actions(model.action_space(), pass.head, model.log_std(), actions);

  const double inv_n = 1.0 / static_cast<double>(n);
  const double lo = 1.0 - config.clip_eps, hi = 1.0 + config.clip_eps;
  Vector d_logp(n);
  PpoLoss out;
  double surrogate = 0.0;
  long clipped = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ratio = std::exp(lik.log_prob(i) - old_log_probs(i));
    const double adv = advantages(i);
    const double unclipped = ratio * adv;
    const double clipped_obj = std::clamp(ratio, lo, hi) * adv;
    if (clipped_obj < unclipped) {
      surrogate += clipped_obj;
      d_logp(i) = 0.0;
      ++clipped;
    } else {
      surrogate += unclipped;
      d_logp(i) = -adv * ratio * inv_n;  // d(-ratio A / n)/d log pi
    }
  }
  out.surrogate = -surrogate * inv_n;
  out.entropy = lik.entropy.mean();
  out.clip_fraction = static_cast<double>(clipped) * inv_n;

  const double c_ent = config.entropy_coef;
  Matrix d_head = lik.d_log_prob_d_head.array().colwise() * d_logp.array();
  d_head -= (c_ent * inv_n) * lik.d_entropy_d_head;
  std::optional<RowVector> d_log_std;
  if (!model.action_space().is_discrete()) {
    d_log_std = (lik.d_log_prob_d_log_std.array().colwise() * d_logp.array()).colwise().sum().matrix();
    *d_log_std -= c_ent * lik.d_entropy_d_log_std;
  }
  std::optional<Vector> d_values;
  out.total = out.surrogate - c_ent * out.entropy;
  if (value_targets) {
    const Vector err = pass.values - *value_targets;
    out.value = err.squaredNorm() * inv_n;
    out.total += config.value_loss_coef * out.value;
    d_values = (2.0 * config.value_loss_coef * inv_n) * err;
  }
  ensure_finite(out.total, "ppo loss");
  out.grads = model.backward(pass, d_head, d_log_std ? &*d_log_std : nullptr, d_values ? &*d_values : nullptr);
  return out;
}

PpoStats ppo_update(ActorCritic& model, nn::Adam<double>& optimizer, const RolloutBatch& batch,
                    const AdvantageRecord& advantages, const Vector* value_targets, const PpoConfig& config,
                    Rng& rng) {
  config.validate();
  const bool gae = advantages.estimator == Estimator::Gae;
  if (gae != model.has_value_head())
    throw ContractError(gae ? "GAE updates need a value head" : "only GAE updates may carry a value head");
  if (gae != (value_targets != nullptr))
    throw ContractError("value targets must be supplied exactly for GAE updates");
  require_dims(advantages.values.size() == batch.size(), "advantages do not match the batch");
  ensure_finite(advantages.values, "advantages");

  const Vector adv = config.normalize_advantages ? standardize(advantages.values) : advantages.values;
  const auto n = batch.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  PpoStats stats;
  const auto params = model.parameters();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += config.minibatch_size) {
      const auto m = std::min<Eigen::Index>(config.minibatch_size, n - start);
      Matrix obs(m, batch.observations.cols()), act(m, batch.actions.cols());
      Vector old_lp(m), a(m), targets(value_targets ? m : 0);
      for (Eigen::Index k = 0; k < m; ++k) {
        const auto idx = order[static_cast<std::size_t>(start + k)];
        obs.row(k) = batch.observations.row(idx);
        act.row(k) = batch.actions.row(idx);
        old_lp(k) = batch.log_probs(idx);
        a(k) = adv(idx);
        if (value_targets) targets(k) = (*value_targets)(idx);
      }
      const PpoLoss loss = ppo_loss(model, obs, act, old_lp, a, value_targets ? &targets : nullptr, config);
      optimizer.step(params, loss.grads, config.max_grad_norm);
      stats.policy_loss += loss.surrogate;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      stats.clip_fraction += loss.clip_fraction;
      ++stats.updates;
    }
  }
  if (stats.updates > 0) {
    const double k = static_cast<double>(stats.updates);
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
  }
  return stats;
}

}  // namespace hdice
