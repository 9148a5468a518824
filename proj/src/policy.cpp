#include "hdice/policy.hpp"

#include "hdice/nn/distributions.hpp"

namespace hdice {

namespace {

std::vector<Eigen::Index> trunk_dims(Eigen::Index obs_dim, const std::vector<Eigen::Index>& hidden) {
  if (hidden.empty()) throw ContractError("policy trunk needs at least one hidden layer");
  std::vector<Eigen::Index> dims{obs_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  return dims;
}

}  // namespace

ActorCritic::ActorCritic(Eigen::Index observation_dim, env::ActionSpace space, const std::vector<Eigen::Index>& hidden,
                         bool with_value_head, std::uint64_t seed)
    : space_(space),
      trunk_(trunk_dims(observation_dim, hidden), nn::OutputTransform<double>::relu(), mix_seed(seed, 10)),
      actor_({hidden.back(), head_width(space)}, nn::OutputTransform<double>::identity(), mix_seed(seed, 11)) {
  if (with_value_head)
    value_.emplace(std::vector<Eigen::Index>{hidden.back(), 1}, nn::OutputTransform<double>::identity(),
                   mix_seed(seed, 12));
  log_std_ = Matrix::Zero(1, space_.is_discrete() ? 0 : space_.size());
}

ActorCritic::ActorCritic(env::ActionSpace space, Net trunk, Net actor, std::optional<Net> value, RowVector log_std)
    : space_(space), trunk_(std::move(trunk)), actor_(std::move(actor)), value_(std::move(value)), log_std_(log_std) {
  if (space_.is_discrete()) log_std_.resize(1, 0);
  require_dims(actor_.input_dim() == trunk_.output_dim(), "actor head does not match trunk width");
  require_dims(actor_.output_dim() == head_width(space_), "actor head does not match action space");
  if (value_) require_dims(value_->input_dim() == trunk_.output_dim() && value_->output_dim() == 1, "bad value head");
  if (!space_.is_discrete()) require_dims(log_std_.cols() == space_.size(), "log-std size mismatch");
}

std::vector<Matrix*> ActorCritic::parameters() {
  std::vector<Matrix*> out = trunk_.parameters();
  for (auto* p : actor_.parameters()) out.push_back(p);
  if (!space_.is_discrete()) out.push_back(&log_std_);
  if (value_)
    for (auto* p : value_->parameters()) out.push_back(p);
  return out;
}

ActorCritic::Pass ActorCritic::forward(const Matrix& observations) const {
  Pass pass;
  const Matrix features = trunk_.forward(observations, pass.trunk);
  pass.head = actor_.forward(features, pass.actor);
  if (value_) pass.values = value_->forward(features, pass.value).col(0);
  return pass;
}

std::vector<Matrix> ActorCritic::backward(const Pass& pass, const Matrix& d_head, const RowVector* d_log_std,
                                          const Vector* d_values) const {
  auto actor_grads = actor_.backward(pass.actor, d_head);
  Matrix d_features = actor_grads.input;
  std::optional<Net::Gradients> value_grads;
  if (value_) {
    Matrix dv = Matrix::Zero(pass.values.size(), 1);
    if (d_values) dv.col(0) = *d_values;
    value_grads = value_->backward(pass.value, dv);
    d_features += value_grads->input;
  }
  auto trunk_grads = trunk_.backward(pass.trunk, d_features);

  std::vector<Matrix> out = std::move(trunk_grads.params);
  for (auto& g : actor_grads.params) out.push_back(std::move(g));
  if (!space_.is_discrete()) out.push_back(d_log_std ? Matrix(*d_log_std) : Matrix(Matrix::Zero(1, space_.size())));
  if (value_grads)
    for (auto& g : value_grads->params) out.push_back(std::move(g));
  return out;
}

Vector ActorCritic::log_probs(const Matrix& observations, const Matrix& actions) const {
  const Matrix head = actor_.forward(trunk_.forward(observations));
  return action_log_probs(space_, head, log_std(), actions);
}

Vector ActorCritic::values(const Matrix& observations) const {
  if (!value_) throw ContractError("policy has no value head");
  return value_->forward(trunk_.forward(observations)).col(0);
}

RowVector ActorCritic::probabilities(const Vector& observation) const {
  if (!space_.is_discrete()) throw ContractError("action probabilities are only defined for discrete spaces");
  const Matrix head = actor_.forward(trunk_.forward(observation.transpose()));
  return nn::CategoricalHead<double>(head.row(0)).probabilities();
}

std::pair<Vector, double> ActorCritic::act(const Vector& observation, Rng& rng) const {
  const Matrix head = actor_.forward(trunk_.forward(observation.transpose()));
  const Matrix action = sample_actions(space_, head, log_std(), rng);
  const double lp = action_log_probs(space_, head, log_std(), action)(0);
  return {action.row(0).transpose(), lp};
}

}  // namespace hdice
