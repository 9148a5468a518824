#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "hdice/action_head.hpp"
#include "hdice/nn/mlp.hpp"
#include "hdice/nn/normalizer.hpp"
#include "hdice/policy.hpp"
#include "hdice/ppo.hpp"
#include "hdice/samplers.hpp"

namespace hdice {

/// Which return the hindsight models condition on.
enum class ConditionOn { ReturnToGo, TrajectoryReturn };

std::string_view to_string(ConditionOn c);
ConditionOn parse_condition_on(std::string_view text);

/// Per-step conditioning return: z_t, or Z(tau) of the step's trajectory.
Vector conditioning_returns(const RolloutBatch& batch, ConditionOn condition);

/// Supervised settings shared by the auxiliary models.
struct AuxTrainConfig {
  int epochs = 10;
  double lr = 3e-4;
  int batch_size = 256;
  std::optional<double> max_grad_norm = 10.0;

  void validate() const;
};

struct TrainResult {
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
};

inline const std::vector<Eigen::Index> kAuxHidden{128, 128};

/// h(a|s,z): an MLP over [observation ; normalized z] feeding a categorical
/// or Gaussian action head. Gaussian heads use a state-independent log-std.
class HindsightModel final : public HindsightSampler {
 public:
  using Net = nn::Mlp<double>;

  HindsightModel(Eigen::Index observation_dim, env::ActionSpace space, std::uint64_t seed,
                 const std::vector<Eigen::Index>& hidden = kAuxHidden);
  HindsightModel(env::ActionSpace space, Net net, RowVector log_std, nn::RunningNormalizer<double> z_normalizer);

  const env::ActionSpace& action_space() const { return space_; }
  Eigen::Index observation_dim() const { return net_.input_dim() - 1; }
  const Net& net() const { return net_; }
  RowVector log_std() const { return log_std_.row(0); }
  const nn::RunningNormalizer<double>& z_normalizer() const { return z_norm_; }

  /// Refits the z normalizer from scratch on these returns.
  void fit_normalizer(const Vector& z);

  /// Network inputs for raw returns.
  Matrix inputs(const Matrix& observations, const Vector& z) const;
  Matrix head(const Matrix& observations, const Vector& z) const;

  Vector log_probs(const Matrix& observations, const Vector& z, const Matrix& actions) const;
  /// Row-wise action probabilities (discrete spaces).
  Matrix probabilities(const Matrix& observations, const Vector& z) const;
  Matrix sample_actions(const Matrix& observations, const Vector& z, Rng& rng) const override;

  struct Loss {
    double value = 0.0;
    std::vector<Matrix> grads;
  };
  /// Mean negative log-likelihood with gradients in parameters() order.
  Loss nll(const Matrix& observations, const Vector& z, const Matrix& actions) const;

  /// Network weights, then the log-std row (continuous spaces).
  std::vector<Matrix*> parameters();

 private:
  env::ActionSpace space_;
  Net net_;
  Matrix log_std_;  // 1 x dim; 1 x 0 for discrete spaces
  nn::RunningNormalizer<double> z_norm_;
};

/// Fits the z normalizer on `z`, then runs Adam over shuffled minibatches.
/// Pass a freshly constructed model to follow the reset-before-training rule.
TrainResult train_hindsight(HindsightModel& model, const Matrix& observations, const Matrix& actions,
                            const Vector& z, const AuxTrainConfig& config, Rng& rng);

inline constexpr double kRatioCap = 1e6;
inline constexpr double kMinHindsightDensity = 1e-12;

struct RatioResult {
  AdvantageRecord advantages;
  Vector ratios;
  long saturated = 0;  // steps whose hindsight likelihood fell below kMinHindsightDensity
};

/// pi/h from likelihoods; saturates at `cap` when h < kMinHindsightDensity.
double direct_ratio(double pi, double h, double cap = kRatioCap, long* saturated = nullptr);

/// Advantages (1 - ratio) * z from log-likelihoods of pi and h. With `clip`
/// the ratio is clamped to [0, 1] first.
RatioResult hca_advantage_from_log_probs(const Vector& log_pi, const Vector& log_h, const Vector& z, bool clip,
                                         double cap = kRatioCap);

RatioResult hca_advantage(const ActorCritic& policy, const HindsightModel& hindsight, const RolloutBatch& batch,
                          const Vector& z, bool clip, double cap = kRatioCap);

}  // namespace hdice
