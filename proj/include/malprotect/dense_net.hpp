#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "malprotect/feature_vector.hpp"

namespace malprotect {

enum class OutputKind { softmax, sigmoid };

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // out x in
  VectorX<Scalar> bias;
};

/// Fully connected network: rectifier on every hidden layer, softmax (with a
/// temperature) or elementwise sigmoid on the output layer. Batches are
/// column-major, one sample per column.
///
/// Softmax output trains on mean cross-entropy of softmax(z / T); sigmoid
/// output trains on mean squared error averaged over output units.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  struct Gradient {
    std::vector<Matrix> weights;
    std::vector<Vector> bias;
  };

  Mlp() = default;

  /// All weights zero.
  Mlp(std::vector<std::size_t> sizes, OutputKind output) : sizes_(std::move(sizes)), output_(output) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs an input and an output layer");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw std::invalid_argument("layer sizes must be positive");
      layers_.push_back({Matrix::Zero(Eigen::Index(sizes_[l + 1]), Eigen::Index(sizes_[l])),
                         Vector::Zero(Eigen::Index(sizes_[l + 1]))});
    }
  }

  /// He-normal weights for rectifier layers, Glorot-normal for the output
  /// layer, zero biases.
  template <typename Generator>
  static Mlp initialized(std::vector<std::size_t> sizes, OutputKind output, Generator& gen) {
    Mlp net(std::move(sizes), output);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
      auto& W = net.layers_[l].weights;
      const bool last = l + 1 == net.layers_.size();
      const double fan_in = double(W.cols());
      const double stddev = last ? std::sqrt(2.0 / (fan_in + double(W.rows()))) : std::sqrt(2.0 / fan_in);
      std::normal_distribution<double> normal(0.0, stddev);
      for (Eigen::Index r = 0; r < W.rows(); ++r)
        for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = Scalar(normal(gen));
    }
    return net;
  }

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  std::size_t input_size() const noexcept { return sizes_.front(); }
  std::size_t output_size() const noexcept { return sizes_.back(); }
  OutputKind output() const noexcept { return output_; }
  Scalar temperature() const noexcept { return temperature_; }
  void set_temperature(Scalar t) {
    if (!(t > Scalar(0))) throw std::invalid_argument("temperature must be positive");
    temperature_ = t;
  }
  std::vector<DenseLayer<Scalar>>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer<Scalar>>& layers() const noexcept { return layers_; }

  /// Output-layer pre-activations for a batch.
  Matrix logits(const Matrix& X) const {
    Matrix a = X;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = layers_[l].weights * a;
      z.colwise() += layers_[l].bias;
      if (l + 1 < layers_.size()) z = z.cwiseMax(Scalar(0));
      a = std::move(z);
    }
    return a;
  }

  Matrix forward(const Matrix& X) const { return activate(logits(X)); }
  Vector forward(const Vector& x) const { return activate(logits(Matrix(x))).col(0); }

  /// Output-layer pre-activations for a binary input. The first layer sums
  /// the weight columns of enabled features in ascending index order onto the
  /// bias; later layers are dense matrix-vector products.
  Vector logits_sparse(std::span<const FeatureIndex> enabled) const {
    const auto& first = layers_.front();
    Vector a = first.bias;
    for (FeatureIndex i : enabled) a += first.weights.col(Eigen::Index(i));
    for (std::size_t l = 1; l < layers_.size(); ++l) {
      a = a.cwiseMax(Scalar(0));
      Vector z = layers_[l].weights * a + layers_[l].bias;
      a = std::move(z);
    }
    return a;
  }

  Vector forward_sparse(std::span<const FeatureIndex> enabled) const {
    return activate(Matrix(logits_sparse(enabled))).col(0);
  }

  Matrix activate(const Matrix& z) const {
    if (output_ == OutputKind::sigmoid) return z.unaryExpr([](Scalar v) { return sigmoid(v); });
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      Vector s = z.col(c) / temperature_;
      s.array() -= s.maxCoeff();
      s = s.array().exp();
      out.col(c) = s / s.sum();
    }
    return out;
  }

  Scalar loss(const Matrix& X, const Matrix& targets) const {
    return loss_from_output(forward(X), targets);
  }

  Scalar loss_from_output(const Matrix& Y, const Matrix& targets) const {
    const Scalar batch = Scalar(Y.cols());
    if (output_ == OutputKind::sigmoid)
      return (Y - targets).squaredNorm() / (batch * Scalar(Y.rows()));
    const Matrix logp = Y.array().max(Scalar(1e-300)).log().matrix();
    return -(targets.cwiseProduct(logp)).sum() / batch;
  }

  /// Mean loss over the batch; fills `grad` with d loss / d parameters.
  Scalar backward(const Matrix& X, const Matrix& targets, Gradient& grad) const {
    return backprop(X, targets, grad, nullptr);
  }

  /// d loss / d input, one column per sample (loss is the batch mean).
  Matrix input_gradient(const Matrix& X, const Matrix& targets) const {
    Gradient grad;
    Matrix dx;
    backprop(X, targets, grad, &dx);
    return dx;
  }

  void step(const Gradient& grad, Scalar learning_rate) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].weights -= learning_rate * grad.weights[l];
      layers_[l].bias -= learning_rate * grad.bias[l];
    }
  }

  static Scalar sigmoid(Scalar v) {
    return v >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-v)) : std::exp(v) / (Scalar(1) + std::exp(v));
  }

 private:
  Scalar backprop(const Matrix& X, const Matrix& targets, Gradient& grad, Matrix* input_grad) const {
    const std::size_t L = layers_.size();
    std::vector<Matrix> pre(L), act(L + 1);
    act[0] = X;
    for (std::size_t l = 0; l < L; ++l) {
      pre[l] = layers_[l].weights * act[l];
      pre[l].colwise() += layers_[l].bias;
      act[l + 1] = l + 1 < L ? Matrix(pre[l].cwiseMax(Scalar(0))) : activate(pre[l]);
    }
    const Matrix& Y = act[L];
    const Scalar batch = Scalar(X.cols());
    const Scalar loss = loss_from_output(Y, targets);

    Matrix delta;
    if (output_ == OutputKind::sigmoid) {
      delta = (Scalar(2) / (batch * Scalar(Y.rows()))) *
              ((Y - targets).array() * Y.array() * (Scalar(1) - Y.array())).matrix();
    } else {
      delta = (Y - targets) / (batch * temperature_);
    }

    grad.weights.resize(L);
    grad.bias.resize(L);
    for (std::size_t l = L; l-- > 0;) {
      grad.weights[l].noalias() = delta * act[l].transpose();
      grad.bias[l] = delta.rowwise().sum();
      if (l > 0) {
        Matrix back = layers_[l].weights.transpose() * delta;
        delta = back.cwiseProduct(pre[l - 1].unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); }));
      } else if (input_grad) {
        *input_grad = layers_[0].weights.transpose() * delta;
      }
    }
    return loss;
  }

  std::vector<std::size_t> sizes_;
  OutputKind output_ = OutputKind::softmax;
  Scalar temperature_ = Scalar(1);
  std::vector<DenseLayer<Scalar>> layers_;
};

}  // namespace malprotect
