#include "hdice/action_head.hpp"

#include <cmath>

#include "hdice/nn/distributions.hpp"

namespace hdice {

namespace {

Eigen::Index checked_index(const env::ActionSpace& space, double a) {
  const auto i = static_cast<Eigen::Index>(a);
  if (static_cast<double>(i) != a || i < 0 || i >= space.size()) throw DimensionError("discrete action out of range");
  return i;
}

void check_shapes(const env::ActionSpace& space, const Matrix& head, const RowVector& raw_log_std,
                  const Matrix& actions) {
  require_dims(head.cols() == head_width(space), "action head width does not match the action space");
  require_dims(actions.rows() == head.rows() && actions.cols() == space.width(),
               "action batch shape does not match the head");
  if (!space.is_discrete()) require_dims(raw_log_std.size() == space.size(), "log-std size mismatch");
}

}  // namespace

RowVector clamp_log_std(const RowVector& raw) {
  return raw.cwiseMax(nn::kLogStdMin).cwiseMin(nn::kLogStdMax);
}

ActionLikelihood evaluate_actions(const env::ActionSpace& space, const Matrix& head, const RowVector& raw_log_std,
                                  const Matrix& actions) {
  check_shapes(space, head, raw_log_std, actions);
  const auto n = head.rows();
  ActionLikelihood out;
  if (space.is_discrete()) {
    const Matrix logp = nn::log_softmax_rows(head);
    const Matrix p = logp.array().exp();
    out.log_prob.resize(n);
    out.d_log_prob_d_head = -p;
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto a = checked_index(space, actions(r, 0));
      out.log_prob(r) = logp(r, a);
      out.d_log_prob_d_head(r, a) += 1.0;
    }
    out.entropy = nn::categorical_entropy_rows(logp);
    // dH/dl_j = -p_j (log p_j + H)
    out.d_entropy_d_head = -(p.array() * (logp.array().colwise() + out.entropy.array()));
    return out;
  }
  const RowVector log_std = clamp_log_std(raw_log_std);
  const RowVector inside = ((raw_log_std.array() >= nn::kLogStdMin) && (raw_log_std.array() <= nn::kLogStdMax))
                               .cast<double>()
                               .matrix();
  const RowVector inv_var = (-2.0 * log_std.array()).exp();
  const Matrix diff = actions - head;
  const Matrix zsq = diff.array().square().rowwise() * inv_var.array();
  out.log_prob = (-0.5 * zsq.array()).rowwise().sum().matrix();
  out.log_prob.array() -= log_std.sum() + nn::kHalfLog2Pi * static_cast<double>(space.size());
  out.d_log_prob_d_head = diff.array().rowwise() * inv_var.array();
  out.d_log_prob_d_log_std = (zsq.array() - 1.0).rowwise() * inside.array();
  out.entropy = Vector::Constant(n, (log_std.array() + 0.5 + nn::kHalfLog2Pi).sum());
  out.d_entropy_d_head = Matrix::Zero(n, head.cols());
  out.d_entropy_d_log_std = inside;
  return out;
}

Vector action_log_probs(const env::ActionSpace& space, const Matrix& head, const RowVector& raw_log_std,
                        const Matrix& actions) {
  check_shapes(space, head, raw_log_std, actions);
  if (space.is_discrete()) {
    const Matrix logp = nn::log_softmax_rows(head);
    Vector out(head.rows());
    for (Eigen::Index r = 0; r < head.rows(); ++r) out(r) = logp(r, checked_index(space, actions(r, 0)));
    return out;
  }
  return nn::gaussian_log_prob_rows<double>(head, clamp_log_std(raw_log_std).replicate(head.rows(), 1), actions);
}

Matrix sample_actions(const env::ActionSpace& space, const Matrix& head, const RowVector& raw_log_std, Rng& rng) {
  require_dims(head.cols() == head_width(space), "action head width does not match the action space");
  Matrix out(head.rows(), space.width());
  if (space.is_discrete()) {
    for (Eigen::Index r = 0; r < head.rows(); ++r)
      out(r, 0) = static_cast<double>(nn::CategoricalHead<double>(head.row(r)).sample(rng));
    return out;
  }
  const RowVector log_std = clamp_log_std(raw_log_std);
  for (Eigen::Index r = 0; r < head.rows(); ++r) out.row(r) = nn::GaussianHead<double>(head.row(r), log_std).sample(rng);
  return out;
}

Matrix encode_actions(const env::ActionSpace& space, const Matrix& actions) {
  require_dims(actions.cols() == space.width(), "action batch width mismatch");
  if (!space.is_discrete()) return actions;
  Matrix out = Matrix::Zero(actions.rows(), space.size());
  for (Eigen::Index r = 0; r < actions.rows(); ++r) out(r, checked_index(space, actions(r, 0))) = 1.0;
  return out;
}

}  // namespace hdice
