#include "hdice/dice.hpp"

#include <cmath>

#include "hdice/nn/distributions.hpp"
#include "minibatch.hpp"

namespace hdice {

namespace {

std::vector<Eigen::Index> stack_dims(Eigen::Index in, const std::vector<Eigen::Index>& hidden, Eigen::Index out) {
  std::vector<Eigen::Index> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

// ---- return predictor

ReturnPredictor::ReturnPredictor(Eigen::Index observation_dim, std::uint64_t seed, bool normalize_targets,
                                 const std::vector<Eigen::Index>& hidden)
    : net_(stack_dims(observation_dim, hidden, 2),
           nn::OutputTransform<double>::log_std_clamp(1, nn::kLogStdMin, nn::kLogStdMax), seed),
      norm_(1, normalize_targets) {}

ReturnPredictor::ReturnPredictor(Net net, nn::RunningNormalizer<double> target_normalizer)
    : net_(std::move(net)), norm_(std::move(target_normalizer)) {
  require_dims(net_.output_dim() == 2, "return predictor must output a mean and a log-std");
  require_dims(norm_.features() == 1, "return normalizer must be one-dimensional");
}

void ReturnPredictor::fit_normalizer(const Vector& z) {
  norm_ = nn::RunningNormalizer<double>(1, norm_.enabled());
  norm_.update(z);
}

Vector ReturnPredictor::mean(const Matrix& observations) const {
  return norm_.invert(raw_output(observations).col(0)).col(0);
}

Vector ReturnPredictor::stddev(const Matrix& observations) const {
  return raw_output(observations).col(1).array().exp() * norm_.scale()(0);
}

Vector ReturnPredictor::log_density(const Matrix& observations, const Vector& z) const {
  require_dims(z.size() == observations.rows(), "one return per observation is required");
  const Matrix out = raw_output(observations);
  const Vector zn = norm_.apply(z).col(0);
  const auto u = (zn - out.col(0)).array() / out.col(1).array().exp();
  return (-0.5 * u.square() - out.col(1).array() - nn::kHalfLog2Pi - std::log(norm_.scale()(0))).matrix();
}

Vector ReturnPredictor::density(const Matrix& observations, const Vector& z) const {
  return log_density(observations, z).array().exp();
}

Vector ReturnPredictor::sample(const Matrix& observations, Rng& rng) const {
  const Matrix out = raw_output(observations);
  Vector zn(observations.rows());
  for (Eigen::Index i = 0; i < zn.size(); ++i) zn(i) = out(i, 0) + std::exp(out(i, 1)) * rng.normal();
  return norm_.invert(zn).col(0);
}

ReturnPredictor::Loss ReturnPredictor::nll(const Matrix& observations, const Vector& z) const {
  if (observations.rows() == 0) throw ContractError("return loss needs at least one sample");
  require_dims(z.size() == observations.rows(), "one return per observation is required");
  Net::Cache cache;
  const Matrix out = net_.forward(observations, cache);
  const Vector zn = norm_.apply(z).col(0);
  const Vector inv_var = (-2.0 * out.col(1).array()).exp();
  const Vector diff = zn - out.col(0);
  const Vector usq = diff.array().square() * inv_var.array();
  const double inv_n = 1.0 / static_cast<double>(z.size());
  Loss loss;
  loss.value = (0.5 * usq.array() + out.col(1).array()).mean() + nn::kHalfLog2Pi;
  ensure_finite(loss.value, "return predictor loss");
  Matrix upstream(out.rows(), 2);
  upstream.col(0) = -inv_n * diff.cwiseProduct(inv_var);
  upstream.col(1) = inv_n * (1.0 - usq.array());
  loss.grads = net_.backward(cache, upstream).params;
  return loss;
}

TrainResult train_return_predictor(ReturnPredictor& model, const Matrix& observations, const Vector& z,
                                   const AuxTrainConfig& config, Rng& rng) {
  config.validate();
  if (observations.rows() == 0) throw ContractError("cannot train the return predictor on an empty batch");
  require_dims(z.size() == observations.rows(), "return training fields have unequal lengths");
  model.fit_normalizer(z);
  nn::Adam<double> adam({config.lr});
  const auto params = model.parameters();
  TrainResult result;
  result.epoch_losses = detail::minibatch_epochs(
      observations.rows(), config.epochs, config.batch_size, rng, [&](const std::vector<Eigen::Index>& idx) {
        const auto loss = model.nll(detail::gather_rows(observations, idx), detail::gather(z, idx));
        adam.step(params, loss.grads, config.max_grad_norm);
        return loss.value;
      });
  result.final_loss = result.epoch_losses.back();
  return result;
}

// ---- DICE model

DiceModel::DiceModel(Eigen::Index observation_dim, env::ActionSpace space, double c, std::uint64_t seed,
                     const std::vector<Eigen::Index>& hidden)
    : space_(space),
      net_(stack_dims(observation_dim + encoded_width(space) + 1, hidden, 1),
           nn::OutputTransform<double>::sigmoid_scaled(c), seed),
      z_norm_(1) {
  if (!(c > 0.0)) throw ContractError("the DICE range bound C must be positive");
}

DiceModel::DiceModel(env::ActionSpace space, Net net, nn::RunningNormalizer<double> z_normalizer)
    : space_(space), net_(std::move(net)), z_norm_(std::move(z_normalizer)) {
  require_dims(net_.output_dim() == 1, "DICE model must output a scalar");
  require_dims(net_.input_dim() > encoded_width(space_) + 1, "DICE input is too narrow");
  if (net_.transform().kind != nn::OutputKind::SigmoidScaled)
    throw ContractError("DICE model needs a scaled sigmoid output");
}

void DiceModel::fit_normalizer(const Vector& z) {
  z_norm_ = nn::RunningNormalizer<double>(1, z_norm_.enabled());
  z_norm_.update(z);
}

Matrix DiceModel::inputs(const Matrix& observations, const Matrix& actions, const Vector& z) const {
  require_dims(observations.cols() == observation_dim(), "DICE observation width mismatch");
  require_dims(actions.rows() == observations.rows() && z.size() == observations.rows(),
               "DICE inputs have unequal lengths");
  const Matrix enc = encode_actions(space_, actions);
  Matrix x(observations.rows(), net_.input_dim());
  x << observations, enc, z_norm_.apply(z);
  return x;
}

Vector DiceModel::evaluate(const Matrix& observations, const Matrix& actions, const Vector& z) const {
  return net_.forward(inputs(observations, actions, z)).col(0);
}

std::vector<Matrix> DiceModel::backward(const Matrix& observations, const Matrix& actions, const Vector& z,
                                        const Vector& upstream) const {
  Net::Cache cache;
  net_.forward(inputs(observations, actions, z), cache);
  return net_.backward(cache, upstream).params;
}

// ---- psi

PsiSampler PsiSampler::uniform(double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ContractError("uniform psi needs finite bounds with lo < hi");
  PsiSampler p;
  p.kind_ = Kind::Uniform;
  p.lo_ = lo;
  p.hi_ = hi;
  return p;
}

PsiSampler PsiSampler::conditional() {
  PsiSampler p;
  p.kind_ = Kind::Conditional;
  return p;
}

PsiSampler PsiSampler::discrete(std::vector<double> values) {
  if (values.empty()) throw ContractError("discrete psi needs at least one value");
  PsiSampler p;
  p.kind_ = Kind::Discrete;
  p.values_ = std::move(values);
  return p;
}

Vector PsiSampler::sample(const Matrix& observations, const ReturnDistribution& chi, Rng& rng) const {
  const auto n = observations.rows();
  Vector z(n);
  switch (kind_) {
    case Kind::Uniform:
      for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.uniform(lo_, hi_);
      return z;
    case Kind::Discrete:
      for (Eigen::Index i = 0; i < n; ++i) z(i) = values_[rng.index(values_.size())];
      return z;
    case Kind::Conditional:
      z = chi.sample(observations, rng);
      ensure_finite(z, "conditional psi samples");
      return z;
  }
  return z;
}

std::string_view to_string(PsiSampler::Kind kind) {
  switch (kind) {
    case PsiSampler::Kind::Uniform:
      return "uniform";
    case PsiSampler::Kind::Conditional:
      return "conditional";
    case PsiSampler::Kind::Discrete:
      return "discrete";
  }
  return "?";
}

// ---- objective

DiceSamples draw_dice_samples(const Matrix& observations, const Matrix& actions, const ReturnDistribution& chi,
                              const HindsightSampler& hindsight, const PsiSampler& psi, Rng& rng) {
  require_dims(actions.rows() == observations.rows(), "DICE batch fields have unequal lengths");
  DiceSamples s;
  s.h_observations = observations;
  s.h_returns = chi.sample(observations, rng);
  s.h_actions = hindsight.sample_actions(observations, s.h_returns, rng);
  s.pi_observations = observations;
  s.pi_actions = actions;
  s.psi_returns = psi.sample(observations, chi, rng);
  return s;
}

DiceLoss dice_objective(const DiceFunction& phi, const DiceSamples& s) {
  const auto n1 = s.h_observations.rows(), n2 = s.pi_observations.rows();
  if (n1 == 0 || n2 == 0) throw ContractError("DICE objective needs samples for both expectations");
  const Vector phi_h = phi.evaluate(s.h_observations, s.h_actions, s.h_returns);
  const Vector phi_pi = phi.evaluate(s.pi_observations, s.pi_actions, s.psi_returns);
  DiceLoss out;
  out.squared_term = 0.5 * phi_h.squaredNorm() / static_cast<double>(n1);
  out.linear_term = phi_pi.mean();
  out.value = out.squared_term - out.linear_term;
  ensure_finite(out.value, "DICE loss");
  out.grads = phi.backward(s.h_observations, s.h_actions, s.h_returns, phi_h / static_cast<double>(n1));
  const auto g2 = phi.backward(s.pi_observations, s.pi_actions, s.psi_returns,
                               Vector::Constant(n2, -1.0 / static_cast<double>(n2)));
  for (std::size_t i = 0; i < out.grads.size(); ++i) out.grads[i] += g2[i];
  return out;
}

DiceLoss dice_loss(const DiceFunction& phi, const ReturnDistribution& chi, const HindsightSampler& hindsight,
                   const Matrix& observations, const Matrix& actions, const PsiSampler& psi, Rng& rng) {
  return dice_objective(phi, draw_dice_samples(observations, actions, chi, hindsight, psi, rng));
}

TrainResult train_dice(DiceFunction& phi, const ReturnDistribution& chi, const HindsightSampler& hindsight,
                       const Matrix& observations, const Matrix& actions, const PsiSampler& psi,
                       const AuxTrainConfig& config, Rng& rng) {
  config.validate();
  if (observations.rows() == 0) throw ContractError("cannot train the DICE model on an empty batch");
  nn::Adam<double> adam({config.lr});
  const auto params = phi.parameters();
  TrainResult result;
  result.epoch_losses = detail::minibatch_epochs(
      observations.rows(), config.epochs, config.batch_size, rng, [&](const std::vector<Eigen::Index>& idx) {
        const auto loss = dice_loss(phi, chi, hindsight, detail::gather_rows(observations, idx),
                                    detail::gather_rows(actions, idx), psi, rng);
        adam.step(params, loss.grads, config.max_grad_norm);
        return loss.value;
      });
  result.final_loss = result.epoch_losses.back();
  return result;
}

Vector hdice_ratio(const DiceFunction& phi, const ReturnDistribution& chi, const Matrix& observations,
                   const Matrix& actions, const Vector& z, const PsiSampler& psi) {
  const Vector value = phi.evaluate(observations, actions, z);
  if (!psi.is_constant()) return value;
  return value.cwiseProduct(chi.density(observations, z));
}

RatioResult hdice_advantage(const DiceFunction& phi, const ReturnDistribution& chi, const Matrix& observations,
                            const Matrix& actions, const Vector& z, const PsiSampler& psi) {
  RatioResult out;
  out.advantages.estimator = Estimator::HDice;
  out.ratios = hdice_ratio(phi, chi, observations, actions, z, psi);
  out.advantages.values = (1.0 - out.ratios.array()) * z.array();
  ensure_finite(out.advantages.values, "H-DICE advantages");
  return out;
}

// ---- schedule

AuxSchedule::AuxSchedule(int n) : n_(n) {
  if (n < 1) throw ContractError("auxiliary schedule period must be at least 1");
}

AuxSchedule::Decision AuxSchedule::push(long iteration, RolloutBatch batch) {
  if (iteration < 1) throw ContractError("iterations are numbered from 1");
  buffer_.push_back(std::move(batch));
  while (buffer_.size() > static_cast<std::size_t>(n_)) buffer_.pop_front();
  Decision d;
  d.train_now = iteration % n_ == 0;
  if (d.train_now) {
    std::vector<RolloutBatch> parts(buffer_.begin(), buffer_.end());
    d.batches = static_cast<int>(parts.size());
    d.data = concat(parts);
  }
  return d;
}

}  // namespace hdice
