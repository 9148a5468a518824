#include "hdice/hindsight.hpp"

#include <algorithm>
#include <cmath>

#include "hdice/nn/distributions.hpp"
#include "minibatch.hpp"

namespace hdice {

std::string_view to_string(ConditionOn c) {
  return c == ConditionOn::ReturnToGo ? "return_to_go" : "trajectory_return";
}

ConditionOn parse_condition_on(std::string_view text) {
  if (text == "return_to_go") return ConditionOn::ReturnToGo;
  if (text == "trajectory_return") return ConditionOn::TrajectoryReturn;
  throw ParseError("condition_on must be return_to_go or trajectory_return, got '" + std::string(text) + "'");
}

Vector conditioning_returns(const RolloutBatch& batch, ConditionOn condition) {
  if (condition == ConditionOn::TrajectoryReturn) return batch.step_trajectory_returns();
  require_dims(batch.returns_to_go.size() == batch.size(), "returns-to-go have not been computed");
  return batch.returns_to_go;
}

void AuxTrainConfig::validate() const {
  if (epochs < 1) throw ContractError("auxiliary epochs must be at least 1");
  if (!(lr > 0.0)) throw ContractError("auxiliary learning rate must be positive");
  if (batch_size < 1) throw ContractError("auxiliary batch size must be positive");
  if (max_grad_norm && !(*max_grad_norm > 0.0)) throw ContractError("auxiliary max_grad_norm must be positive");
}

namespace {

std::vector<Eigen::Index> hindsight_dims(Eigen::Index obs_dim, const env::ActionSpace& space,
                                         const std::vector<Eigen::Index>& hidden) {
  std::vector<Eigen::Index> dims{obs_dim + 1};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(head_width(space));
  return dims;
}

}  // namespace

HindsightModel::HindsightModel(Eigen::Index observation_dim, env::ActionSpace space, std::uint64_t seed,
                               const std::vector<Eigen::Index>& hidden)
    : space_(space),
      net_(hindsight_dims(observation_dim, space, hidden), nn::OutputTransform<double>::identity(), seed),
      log_std_(Matrix::Zero(1, space.is_discrete() ? 0 : space.size())),
      z_norm_(1) {}

HindsightModel::HindsightModel(env::ActionSpace space, Net net, RowVector log_std,
                               nn::RunningNormalizer<double> z_normalizer)
    : space_(space), net_(std::move(net)), log_std_(log_std), z_norm_(std::move(z_normalizer)) {
  if (space_.is_discrete()) log_std_.resize(1, 0);
  require_dims(net_.output_dim() == head_width(space_), "hindsight head does not match the action space");
  require_dims(net_.input_dim() >= 2, "hindsight input needs an observation and a return");
  require_dims(z_norm_.features() == 1, "hindsight return normalizer must be one-dimensional");
  if (!space_.is_discrete()) require_dims(log_std_.cols() == space_.size(), "log-std size mismatch");
}

void HindsightModel::fit_normalizer(const Vector& z) {
  z_norm_ = nn::RunningNormalizer<double>(1, z_norm_.enabled());
  z_norm_.update(z);
}

Matrix HindsightModel::inputs(const Matrix& observations, const Vector& z) const {
  require_dims(observations.cols() == observation_dim(), "hindsight observation width mismatch");
  require_dims(z.size() == observations.rows(), "one return per observation is required");
  Matrix x(observations.rows(), observations.cols() + 1);
  x.leftCols(observations.cols()) = observations;
  x.col(observations.cols()) = z_norm_.apply(z).col(0);
  return x;
}

Matrix HindsightModel::head(const Matrix& observations, const Vector& z) const {
  return net_.forward(inputs(observations, z));
}

Vector HindsightModel::log_probs(const Matrix& observations, const Vector& z, const Matrix& actions) const {
  return action_log_probs(space_, head(observations, z), log_std(), actions);
}

Matrix HindsightModel::probabilities(const Matrix& observations, const Vector& z) const {
  if (!space_.is_discrete()) throw ContractError("action probabilities are only defined for discrete spaces");
  return nn::log_softmax_rows(head(observations, z)).array().exp();
}

Matrix HindsightModel::sample_actions(const Matrix& observations, const Vector& z, Rng& rng) const {
  return hdice::sample_actions(space_, head(observations, z), log_std(), rng);
}

HindsightModel::Loss HindsightModel::nll(const Matrix& observations, const Vector& z, const Matrix& actions) const {
  if (observations.rows() == 0) throw ContractError("hindsight loss needs at least one sample");
  Net::Cache cache;
  const Matrix out = net_.forward(inputs(observations, z), cache);
  const auto lik = evaluate_actions(space_, out, log_std(), actions);
  const double inv_n = 1.0 / static_cast<double>(observations.rows());
  Loss loss;
  loss.value = -lik.log_prob.mean();
  ensure_finite(loss.value, "hindsight loss");
  loss.grads = net_.backward(cache, -inv_n * lik.d_log_prob_d_head).params;
  if (!space_.is_discrete()) loss.grads.push_back(-inv_n * lik.d_log_prob_d_log_std.colwise().sum());
  return loss;
}

std::vector<Matrix*> HindsightModel::parameters() {
  auto out = net_.parameters();
  if (!space_.is_discrete()) out.push_back(&log_std_);
  return out;
}

TrainResult train_hindsight(HindsightModel& model, const Matrix& observations, const Matrix& actions,
                            const Vector& z, const AuxTrainConfig& config, Rng& rng) {
  config.validate();
  if (observations.rows() == 0) throw ContractError("cannot train the hindsight model on an empty batch");
  require_dims(actions.rows() == observations.rows() && z.size() == observations.rows(),
               "hindsight training fields have unequal lengths");
  model.fit_normalizer(z);
  nn::Adam<double> adam({config.lr});
  const auto params = model.parameters();
  TrainResult result;
  result.epoch_losses = detail::minibatch_epochs(
      observations.rows(), config.epochs, config.batch_size, rng, [&](const std::vector<Eigen::Index>& idx) {
        const auto loss = model.nll(detail::gather_rows(observations, idx), detail::gather(z, idx),
                                    detail::gather_rows(actions, idx));
        adam.step(params, loss.grads, config.max_grad_norm);
        return loss.value;
      });
  result.final_loss = result.epoch_losses.back();
  return result;
}

double direct_ratio(double pi, double h, double cap, long* saturated) {
  if (h < kMinHindsightDensity) {
    if (saturated) ++*saturated;
    return cap;
  }
  return std::min(pi / h, cap);
}

RatioResult hca_advantage_from_log_probs(const Vector& log_pi, const Vector& log_h, const Vector& z, bool clip,
                                         double cap) {
  require_dims(log_pi.size() == log_h.size() && log_pi.size() == z.size(), "ratio inputs have unequal lengths");
  RatioResult out;
  out.advantages.estimator = clip ? Estimator::HcaClip : Estimator::Hca;
  out.ratios.resize(z.size());
  out.advantages.values.resize(z.size());
  const double log_floor = std::log(kMinHindsightDensity);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double ratio;
    if (log_h(i) < log_floor) {
      ratio = cap;
      ++out.saturated;
    } else {
      ratio = std::min(std::exp(log_pi(i) - log_h(i)), cap);
    }
    if (clip) ratio = std::clamp(ratio, 0.0, 1.0);
    out.ratios(i) = ratio;
    out.advantages.values(i) = (1.0 - ratio) * z(i);
  }
  ensure_finite(out.advantages.values, "hca advantages");
  return out;
}

RatioResult hca_advantage(const ActorCritic& policy, const HindsightModel& hindsight, const RolloutBatch& batch,
                          const Vector& z, bool clip, double cap) {
  const Vector log_pi = policy.log_probs(batch.observations, batch.actions);
  const Vector log_h = hindsight.log_probs(batch.observations, z, batch.actions);
  return hca_advantage_from_log_probs(log_pi, log_h, z, clip, cap);
}

}  // namespace hdice
