#pragma once

#include <numeric>
#include <vector>

#include "hdice/core.hpp"

namespace hdice::detail {

inline Matrix gather_rows(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]);
  return out;
}

inline Vector gather(const Vector& v, const std::vector<Eigen::Index>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(idx[k]);
  return out;
}

/// Shuffled minibatch passes over n rows; `step` returns the minibatch loss.
/// Returns the mean loss of each epoch.
template <typename Step>
std::vector<double> minibatch_epochs(Eigen::Index n, int epochs, int batch_size, Rng& rng, Step&& step) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    double sum = 0.0;
    long count = 0;
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      const auto end = std::min<Eigen::Index>(n, start + batch_size);
      std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + end);
      sum += step(idx);
      ++count;
    }
    losses.push_back(count > 0 ? sum / static_cast<double>(count) : 0.0);
  }
  return losses;
}

}  // namespace hdice::detail
