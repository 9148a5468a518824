#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "hdice/nn/adam.hpp"
#include "hdice/policy.hpp"
#include "hdice/rollout.hpp"

namespace hdice {

enum class Estimator { Gae, Hca, HcaClip, HDice };

std::string_view to_string(Estimator e);

struct PpoConfig {
  double lr = 3e-4;
  double clip_eps = 0.2;
  int epochs = 30;
  double entropy_coef = 0.1;
  double value_loss_coef = 1e-4;
  double gae_lambda = 0.95;
  double gamma = 0.99;
  int minibatch_size = 256;
  std::optional<double> max_grad_norm;
  bool normalize_advantages = true;

  void validate() const;
};

struct AdvantageRecord {
  Vector values;
  Estimator estimator = Estimator::Gae;
};

struct GaeResult {
  AdvantageRecord advantages;
  Vector value_targets;
};

/// GAE over each trajectory; every trajectory end counts as done, so the
/// bootstrap term vanishes at the last step.
GaeResult gae_advantages(const RolloutBatch& batch, const Vector& values, double gamma, double lambda);
GaeResult gae_advantages(const RolloutBatch& batch, const ActorCritic& model, double gamma, double lambda);

/// Shifts and scales to zero mean and unit (population) standard deviation.
Vector standardize(const Vector& x);

struct PpoLoss {
  double total = 0.0;
  double surrogate = 0.0;  // -mean(min(rho A, clip(rho) A))
  double value = 0.0;      // mean squared value error, before the coefficient
  double entropy = 0.0;    // mean entropy
  double clip_fraction = 0.0;
  std::vector<Matrix> grads;  // in ActorCritic::parameters() order
};

/// Clipped-surrogate loss (to be minimized) with entropy bonus and, when
/// `value_targets` is given, the value regression term.
PpoLoss ppo_loss(const ActorCritic& model, const Matrix& observations, const Matrix& actions,
                 const Vector& old_log_probs, const Vector& advantages, const Vector* value_targets,
                 const PpoConfig& config);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  long updates = 0;
};

/// Runs `epochs` passes of shuffled minibatch Adam steps on the batch.
/// Value targets must be given exactly when the estimator is GAE, and the
/// model must have a value head exactly in that case.
PpoStats ppo_update(ActorCritic& model, nn::Adam<double>& optimizer, const RolloutBatch& batch,
                    const AdvantageRecord& advantages, const Vector* value_targets, const PpoConfig& config, Rng& rng);

}  // namespace hdice
