#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hdice/core.hpp"

namespace hdice::nn {

enum class OutputKind { Identity, SigmoidScaled, LogStdClamp, Relu };

/// Elementwise map applied after the last affine layer.
///
/// LogStdClamp treats the output as [means | log_stds] and clamps the columns
/// from `split` onward into [lo, hi]; the means pass through.
template <typename Scalar>
struct OutputTransform {
  OutputKind kind = OutputKind::Identity;
  Scalar scale = Scalar(1);
  Scalar lo = Scalar(-5);
  Scalar hi = Scalar(2);
  Eigen::Index split = 0;

  static OutputTransform identity() { return {}; }
  static OutputTransform relu() { return {OutputKind::Relu}; }
  static OutputTransform sigmoid_scaled(Scalar c) { return {OutputKind::SigmoidScaled, c}; }
  static OutputTransform log_std_clamp(Eigen::Index split, Scalar lo = Scalar(-5), Scalar hi = Scalar(2)) {
    return {OutputKind::LogStdClamp, Scalar(1), lo, hi, split};
  }
};

/// Fully-connected ReLU network. Weights are stored (out x in), biases (out x 1),
/// and batches are row-major in the sense of one sample per row.
template <typename Scalar>
class Mlp {
 public:
  using Mat = MatrixX<Scalar>;

  struct Layer {
    Mat weight;
    Mat bias;
  };

  struct Cache {
    std::vector<Mat> inputs;          // input to each affine layer
    std::vector<Mat> preactivations;  // affine output of each layer
    Mat output;
  };

  struct Gradients {
    std::vector<Mat> params;  // same order as parameters()
    Mat input;
  };

  Mlp() = default;

  /// `dims` lists layer widths from input to output, e.g. {4, 128, 128, 1}.
  Mlp(const std::vector<Eigen::Index>& dims, OutputTransform<Scalar> transform, std::uint64_t init_seed)
      : transform_(transform), init_seed_(init_seed) {
    if (dims.size() < 2) throw DimensionError("mlp needs at least input and output widths");
    Rng rng(init_seed);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      const auto in = dims[i];
      const auto out = dims[i + 1];
      if (in <= 0 || out <= 0) throw DimensionError("mlp layer widths must be positive");
      // Same bound as torch.nn.Linear's default initialization.
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      Layer layer{Mat(out, in), Mat(out, 1)};
      for (Eigen::Index c = 0; c < in; ++c)
        for (Eigen::Index r = 0; r < out; ++r) layer.weight(r, c) = Scalar(rng.uniform(-bound, bound));
      for (Eigen::Index r = 0; r < out; ++r) layer.bias(r, 0) = Scalar(rng.uniform(-bound, bound));
      layers_.push_back(std::move(layer));
    }
    check_transform();
  }

  Mlp(std::vector<Layer> layers, OutputTransform<Scalar> transform)
      : layers_(std::move(layers)), transform_(transform) {
    if (layers_.empty()) throw DimensionError("mlp needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      require_dims(layers_[i].bias.rows() == layers_[i].weight.rows() && layers_[i].bias.cols() == 1,
                   "bias shape does not match weight");
      if (i + 1 < layers_.size())
        require_dims(layers_[i].weight.rows() == layers_[i + 1].weight.cols(), "layer dimensions do not chain");
    }
    check_transform();
  }

  Eigen::Index input_dim() const { return layers_.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers_.back().weight.rows(); }
  const std::vector<Layer>& layers() const { return layers_; }
  const OutputTransform<Scalar>& transform() const { return transform_; }
  std::uint64_t init_seed() const { return init_seed_; }

  std::vector<Mat*> parameters() {
    std::vector<Mat*> out;
    for (auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  std::vector<const Mat*> parameters() const {
    std::vector<const Mat*> out;
    for (const auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  Mat forward(const Mat& x) const {
    Cache cache;
    return forward(x, cache);
  }

  Mat forward(const Mat& x, Cache& cache) const {
    require_dims(x.cols() == input_dim(), "mlp input has " + std::to_string(x.cols()) + " columns, expected " +
                                              std::to_string(input_dim()));
    cache.inputs.clear();
    cache.preactivations.clear();
    Mat h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      Mat z = h * l.weight.transpose();
      z.rowwise() += l.bias.col(0).transpose();
      cache.inputs.push_back(std::move(h));
      if (i + 1 < layers_.size()) {
        h = z.cwiseMax(Scalar(0));
      } else {
        h = apply_transform(z);
      }
      cache.preactivations.push_back(std::move(z));
    }
    ensure_finite(h, "mlp output");
    cache.output = h;
    return h;
  }

  /// Reverse-mode pass for d(loss)/d(params) given d(loss)/d(output).
  Gradients backward(const Cache& cache, const Mat& upstream) const {
    require_dims(upstream.rows() == cache.output.rows() && upstream.cols() == cache.output.cols(),
                 "upstream gradient shape does not match mlp output");
    Gradients grads;
    grads.params.resize(2 * layers_.size());
    Mat delta = transform_backward(cache.preactivations.back(), cache.output, upstream);
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& l = layers_[k];
      grads.params[2 * k] = delta.transpose() * cache.inputs[k];
      grads.params[2 * k + 1] = delta.colwise().sum().transpose();
      Mat dh = delta * l.weight;
      if (k > 0) {
        delta = dh.cwiseProduct((cache.preactivations[k - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
      } else {
        grads.input = std::move(dh);
      }
    }
    return grads;
  }

 private:
  void check_transform() const {
    if (transform_.kind == OutputKind::SigmoidScaled && !(transform_.scale > Scalar(0)))
      throw ContractError("sigmoid output scale must be positive");
    if (transform_.kind == OutputKind::LogStdClamp &&
        (transform_.split < 0 || transform_.split > output_dim() || !(transform_.lo < transform_.hi)))
      throw ContractError("invalid log-std clamp transform");
  }

  Mat apply_transform(const Mat& z) const {
    switch (transform_.kind) {
      case OutputKind::Identity:
        return z;
      case OutputKind::Relu:
        return z.cwiseMax(Scalar(0));
      case OutputKind::SigmoidScaled:
        // Saturated sigmoids would round onto the closed endpoints; keep (0, C) open.
        return z.unaryExpr([c = transform_.scale](Scalar v) {
          return std::clamp(c * sigmoid(v), std::numeric_limits<Scalar>::denorm_min(),
                            std::nextafter(c, Scalar(0)));
        });
      case OutputKind::LogStdClamp: {
        Mat out = z;
        const auto n = z.cols() - transform_.split;
        out.rightCols(n) = z.rightCols(n).cwiseMax(transform_.lo).cwiseMin(transform_.hi);
        return out;
      }
    }
    return z;
  }

  Mat transform_backward(const Mat& z, const Mat& out, const Mat& upstream) const {
    switch (transform_.kind) {
      case OutputKind::Identity:
        return upstream;
      case OutputKind::Relu:
        return upstream.cwiseProduct((z.array() > Scalar(0)).template cast<Scalar>().matrix());
      case OutputKind::SigmoidScaled: {
        // d/dz [C s(z)] = C s(z)(1 - s(z)) = out (1 - out / C)
        const Scalar c = transform_.scale;
        return upstream.cwiseProduct(out.unaryExpr([c](Scalar o) { return o * (Scalar(1) - o / c); }));
      }
      case OutputKind::LogStdClamp: {
        Mat d = upstream;
        const auto n = z.cols() - transform_.split;
        const auto inside =
            ((z.rightCols(n).array() >= transform_.lo) && (z.rightCols(n).array() <= transform_.hi)).template cast<Scalar>();
        d.rightCols(n) = d.rightCols(n).cwiseProduct(inside.matrix());
        return d;
      }
    }
    return upstream;
  }

  static Scalar sigmoid(Scalar v) {
    if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (Scalar(1) + e);
  }

  std::vector<Layer> layers_;
  OutputTransform<Scalar> transform_;
  std::uint64_t init_seed_ = 0;
};

}  // namespace hdice::nn
