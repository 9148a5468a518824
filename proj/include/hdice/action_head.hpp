#pragma once

#include "hdice/env/environment.hpp"

namespace hdice {

/// Log-likelihood and entropy of an action batch, with their derivatives with
/// respect to the head output (logits or means) and the raw log-std vector.
struct ActionLikelihood {
  Vector log_prob;
  Vector entropy;
  Matrix d_log_prob_d_head;
  Matrix d_entropy_d_head;
  Matrix d_log_prob_d_log_std;     // continuous only, rows = samples
  RowVector d_entropy_d_log_std;   // continuous only, per-sample derivative (same for every row)
};

/// Width of the network output that parameterizes the action distribution.
inline Eigen::Index head_width(const env::ActionSpace& space) { return space.size(); }

RowVector clamp_log_std(const RowVector& raw);

ActionLikelihood evaluate_actions(const env::ActionSpace& space, const Matrix& head, const RowVector& raw_log_std,
                                  const Matrix& actions);

/// Log-probabilities only (no derivatives).
Vector action_log_probs(const env::ActionSpace& space, const Matrix& head, const RowVector& raw_log_std,
                        const Matrix& actions);

Matrix sample_actions(const env::ActionSpace& space, const Matrix& head, const RowVector& raw_log_std, Rng& rng);

/// One-hot for discrete spaces, the raw vector for continuous ones.
Matrix encode_actions(const env::ActionSpace& space, const Matrix& actions);
inline Eigen::Index encoded_width(const env::ActionSpace& space) { return space.size(); }

}  // namespace hdice
