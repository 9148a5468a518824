#pragma once

#include <cstdint>
#include <deque>
#include <string_view>
#include <vector>

#include "hdice/hindsight.hpp"

namespace hdice {

/// chi(z|s): a 1-D Gaussian over (optionally normalized) returns whose mean
/// and log-std come from an MLP. Density queries take raw returns.
class ReturnPredictor final : public ReturnDistribution {
 public:
  using Net = nn::Mlp<double>;

  ReturnPredictor(Eigen::Index observation_dim, std::uint64_t seed, bool normalize_targets = true,
                  const std::vector<Eigen::Index>& hidden = kAuxHidden);
  ReturnPredictor(Net net, nn::RunningNormalizer<double> target_normalizer);

  Eigen::Index observation_dim() const { return net_.input_dim(); }
  const Net& net() const { return net_; }
  const nn::RunningNormalizer<double>& target_normalizer() const { return norm_; }

  void fit_normalizer(const Vector& z);

  /// Mean and clamped log-std in normalized units, one row per observation.
  Matrix raw_output(const Matrix& observations) const { return net_.forward(observations); }
  /// Mean and standard deviation in raw return units.
  Vector mean(const Matrix& observations) const;
  Vector stddev(const Matrix& observations) const;

  Vector log_density(const Matrix& observations, const Vector& z) const;
  Vector density(const Matrix& observations, const Vector& z) const override;
  Vector sample(const Matrix& observations, Rng& rng) const override;

  struct Loss {
    double value = 0.0;
    std::vector<Matrix> grads;
  };
  /// Mean Gaussian negative log-likelihood of the normalized targets.
  Loss nll(const Matrix& observations, const Vector& z) const;

  std::vector<Matrix*> parameters() { return net_.parameters(); }

 private:
  Net net_;
  nn::RunningNormalizer<double> norm_;
};

TrainResult train_return_predictor(ReturnPredictor& model, const Matrix& observations, const Vector& z,
                                   const AuxTrainConfig& config, Rng& rng);

/// phi(s, a, z) = C * sigmoid(MLP([observation ; encoded action ; normalized z])).
class DiceModel final : public DiceFunction {
 public:
  using Net = nn::Mlp<double>;

  DiceModel(Eigen::Index observation_dim, env::ActionSpace space, double c, std::uint64_t seed,
            const std::vector<Eigen::Index>& hidden = kAuxHidden);
  DiceModel(env::ActionSpace space, Net net, nn::RunningNormalizer<double> z_normalizer);

  const env::ActionSpace& action_space() const { return space_; }
  const Net& net() const { return net_; }
  const nn::RunningNormalizer<double>& z_normalizer() const { return z_norm_; }
  double c() const { return net_.transform().scale; }
  Eigen::Index observation_dim() const { return net_.input_dim() - encoded_width(space_) - 1; }

  void fit_normalizer(const Vector& z);
  Matrix inputs(const Matrix& observations, const Matrix& actions, const Vector& z) const;

  Vector evaluate(const Matrix& observations, const Matrix& actions, const Vector& z) const override;
  std::vector<Matrix> backward(const Matrix& observations, const Matrix& actions, const Vector& z,
                               const Vector& upstream) const override;
  std::vector<Matrix*> parameters() override { return net_.parameters(); }
  double upper_bound() const override { return c(); }

 private:
  env::ActionSpace space_;
  Net net_;
  nn::RunningNormalizer<double> z_norm_;
};

/// Distribution psi over returns in the second expectation of the DICE objective.
class PsiSampler {
 public:
  enum class Kind { Uniform, Conditional, Discrete };

  static PsiSampler uniform(double lo, double hi);
  /// psi(z) = chi(z|s); the ratio then needs no chi factor.
  static PsiSampler conditional();
  /// Uniform over a finite set of return values (tabular use).
  static PsiSampler discrete(std::vector<double> values);

  Kind kind() const { return kind_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& values() const { return values_; }
  /// True when psi is constant in z, so the ratio is phi * chi.
  bool is_constant() const { return kind_ != Kind::Conditional; }

  Vector sample(const Matrix& observations, const ReturnDistribution& chi, Rng& rng) const;

 private:
  Kind kind_ = Kind::Uniform;
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<double> values_;
};

std::string_view to_string(PsiSampler::Kind kind);

/// One Monte-Carlo draw for each expectation of the objective.
struct DiceSamples {
  // (s, a, z) ~ D^h: s from the batch, z ~ chi(.|s), a ~ h(.|s, z)
  Matrix h_observations;
  Matrix h_actions;
  Vector h_returns;
  // (s, a) from the batch, z ~ psi
  Matrix pi_observations;
  Matrix pi_actions;
  Vector psi_returns;
};

DiceSamples draw_dice_samples(const Matrix& observations, const Matrix& actions, const ReturnDistribution& chi,
                              const HindsightSampler& hindsight, const PsiSampler& psi, Rng& rng);

struct DiceLoss {
  double value = 0.0;
  double squared_term = 0.0;  // 0.5 * mean(phi^2) on the D^h draw
  double linear_term = 0.0;   // mean(phi) on the psi draw
  std::vector<Matrix> grads;
};

/// 0.5 * mean(phi^2) over the D^h draw minus mean(phi) over the psi draw.
DiceLoss dice_objective(const DiceFunction& phi, const DiceSamples& samples);

/// Draws fresh samples and evaluates the objective. chi and h are only sampled.
DiceLoss dice_loss(const DiceFunction& phi, const ReturnDistribution& chi, const HindsightSampler& hindsight,
                   const Matrix& observations, const Matrix& actions, const PsiSampler& psi, Rng& rng);

/// Adam on the objective over shuffled minibatches of (s, a) pairs, with new
/// Monte-Carlo draws for every minibatch.
TrainResult train_dice(DiceFunction& phi, const ReturnDistribution& chi, const HindsightSampler& hindsight,
                       const Matrix& observations, const Matrix& actions, const PsiSampler& psi,
                       const AuxTrainConfig& config, Rng& rng);

/// pi/h recovered as phi * chi for constant psi, or phi alone for psi = chi.
Vector hdice_ratio(const DiceFunction& phi, const ReturnDistribution& chi, const Matrix& observations,
                   const Matrix& actions, const Vector& z, const PsiSampler& psi);

RatioResult hdice_advantage(const DiceFunction& phi, const ReturnDistribution& chi, const Matrix& observations,
                            const Matrix& actions, const Vector& z, const PsiSampler& psi);

/// Trains the auxiliary models every n-th iteration on the last n batches.
class AuxSchedule {
 public:
  explicit AuxSchedule(int n);

  int n() const { return n_; }
  std::size_t buffered() const { return buffer_.size(); }

  struct Decision {
    bool train_now = false;
    int batches = 0;
    RolloutBatch data;  // filled only when train_now
  };

  /// Buffers the batch of 1-based `iteration` and decides whether to train.
  Decision push(long iteration, RolloutBatch batch);

 private:
  int n_;
  std::deque<RolloutBatch> buffer_;
};

}  // namespace hdice
