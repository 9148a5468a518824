#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "hdice/core.hpp"

namespace hdice::nn {

template <typename Scalar>
struct AdamConfig {
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

/// Global 2-norm over a list of gradient tensors.
template <typename Scalar>
Scalar global_norm(std::span<const MatrixX<Scalar>> grads) {
  Scalar sq = Scalar(0);
  for (const auto& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

/// Adam with optional global-norm gradient clipping. Moments are allocated on
/// the first step and must keep the parameter shapes afterwards.
template <typename Scalar>
class Adam {
 public:
  using Mat = MatrixX<Scalar>;

  Adam() = default;
  explicit Adam(AdamConfig<Scalar> config) : config_(config) {}

  const AdamConfig<Scalar>& config() const { return config_; }
  long step_count() const { return t_; }
  const std::vector<Mat>& first_moments() const { return m_; }
  const std::vector<Mat>& second_moments() const { return v_; }

  /// Returns the pre-clipping gradient norm.
  Scalar step(std::span<Mat* const> params, std::span<const Mat> grads,
              std::optional<Scalar> max_grad_norm = std::nullopt) {
    if (params.size() != grads.size()) throw DimensionError("adam: parameter and gradient counts differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
      require_dims(params[i]->rows() == grads[i].rows() && params[i]->cols() == grads[i].cols(),
                   "adam: gradient shape does not match parameter");
      ensure_finite(grads[i], "adam gradient");
    }
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Mat::Zero(p->rows(), p->cols()));
        v_.push_back(Mat::Zero(p->rows(), p->cols()));
      }
    } else {
      require_dims(m_.size() == params.size(), "adam: parameter count changed between steps");
      for (std::size_t i = 0; i < params.size(); ++i)
        require_dims(m_[i].rows() == params[i]->rows() && m_[i].cols() == params[i]->cols(),
                     "adam: parameter shape changed between steps");
    }

    const Scalar norm = global_norm<Scalar>(grads);
    Scalar scale = Scalar(1);
    if (max_grad_norm && norm > *max_grad_norm) scale = *max_grad_norm / norm;

    ++t_;
    const Scalar b1 = config_.beta1, b2 = config_.beta2;
    const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto g = (grads[i] * scale).array();
      m_[i] = (b1 * m_[i].array() + (Scalar(1) - b1) * g).matrix();
      v_[i] = (b2 * v_[i].array() + (Scalar(1) - b2) * g.square()).matrix();
      params[i]->array() -= config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
    }
    return norm;
  }

 private:
  AdamConfig<Scalar> config_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long t_ = 0;
};

}  // namespace hdice::nn
