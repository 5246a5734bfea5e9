#pragma once

// Feedforward actor-critic approximator with analytic backprop.
//
// Two tanh trunks (input -> hidden -> hidden), one feeding the factored
// policy heads (one categorical head of `actions` logits per agent), one
// feeding the scalar value head. Batched passes store samples as columns.

#include <Eigen/Core>
#include <Eigen/QR>

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmfault {

struct ModelShape {
  int inputs = 0;
  int hidden = 64;
  int heads = 1;
  int actions = 5;

  int logit_count() const { return heads * actions; }
  bool operator==(const ModelShape&) const = default;
};

template <typename Scalar>
class PolicyModel {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  // Weight matrices are (out x in); biases are (out x 1).
  enum Tensor : int {
    kPiW1, kPiB1, kPiW2, kPiB2, kPiW3, kPiB3,
    kVW1, kVB1, kVW2, kVB2, kVW3, kVB3,
    kTensorCount
  };

  using Tensors = std::array<Matrix, kTensorCount>;

  struct Output {
    Matrix logits;  // actions x heads
    Scalar value{};
  };

  struct Batch {
    Matrix input;
    Matrix pi_h1, pi_h2, logits;
    Matrix v_h1, v_h2;
    RowVector value;
  };

  PolicyModel() = default;

  /// All-zero weights.
  explicit PolicyModel(const ModelShape& shape) : shape_(shape) {
    if (shape.inputs <= 0 || shape.hidden <= 0 || shape.heads <= 0 || shape.actions <= 0)
      throw std::invalid_argument("model dimensions must be positive");
    const int in = shape.inputs, h = shape.hidden, out = shape.logit_count();
    const std::array<std::pair<int, int>, kTensorCount> dims = {{
        {h, in}, {h, 1}, {h, h}, {h, 1}, {out, h}, {out, 1},
        {h, in}, {h, 1}, {h, h}, {h, 1}, {1, h}, {1, 1},
    }};
    for (int k = 0; k < kTensorCount; ++k) tensors_[k] = Matrix::Zero(dims[k].first, dims[k].second);
  }

  /// Orthogonal init: gain sqrt(2) on hidden layers, 0.01 on the policy
  /// head, 1 on the value head; zero biases.
  template <typename Rng>
  static PolicyModel initialized(const ModelShape& shape, Rng& rng) {
    PolicyModel m(shape);
    const Scalar g = std::sqrt(Scalar(2));
    m.tensors_[kPiW1] = orthogonal(shape.hidden, shape.inputs, g, rng);
    m.tensors_[kPiW2] = orthogonal(shape.hidden, shape.hidden, g, rng);
    m.tensors_[kPiW3] = orthogonal(shape.logit_count(), shape.hidden, Scalar(0.01), rng);
    m.tensors_[kVW1] = orthogonal(shape.hidden, shape.inputs, g, rng);
    m.tensors_[kVW2] = orthogonal(shape.hidden, shape.hidden, g, rng);
    m.tensors_[kVW3] = orthogonal(1, shape.hidden, Scalar(1), rng);
    return m;
  }

  const ModelShape& shape() const { return shape_; }
  Tensors& tensors() { return tensors_; }
  const Tensors& tensors() const { return tensors_; }

  Output forward(const Eigen::Ref<const Vector>& obs) const {
    if (obs.size() != shape_.inputs)
      throw std::invalid_argument("observation size " + std::to_string(obs.size()) + " != model input " +
                                  std::to_string(shape_.inputs));
    const auto& t = tensors_;
    const Vector p1 = squash(t[kPiW1] * obs + t[kPiB1]);
    const Vector p2 = squash(t[kPiW2] * p1 + t[kPiB2]);
    const Vector z = t[kPiW3] * p2 + t[kPiB3];
    const Vector v1 = squash(t[kVW1] * obs + t[kVB1]);
    const Vector v2 = squash(t[kVW2] * v1 + t[kVB2]);
    Output out;
    out.logits = Eigen::Map<const Matrix>(z.data(), shape_.actions, shape_.heads);
    out.value = (t[kVW3] * v2 + t[kVB3])(0, 0);
    return out;
  }

  /// Forward over a batch of observations (inputs x B).
  void forward(const Matrix& obs, Batch& b) const {
    if (obs.rows() != shape_.inputs) throw std::invalid_argument("batch observation size mismatch");
    const auto& t = tensors_;
    b.input = obs;
    b.pi_h1 = squash((t[kPiW1] * obs).colwise() + t[kPiB1].col(0));
    b.pi_h2 = squash((t[kPiW2] * b.pi_h1).colwise() + t[kPiB2].col(0));
    b.logits = (t[kPiW3] * b.pi_h2).colwise() + t[kPiB3].col(0);
    b.v_h1 = squash((t[kVW1] * obs).colwise() + t[kVB1].col(0));
    b.v_h2 = squash((t[kVW2] * b.v_h1).colwise() + t[kVB2].col(0));
    b.value = (t[kVW3] * b.v_h2).array() + t[kVB3](0, 0);
  }

  /// Parameter gradients given upstream gradients on the logits
  /// (logit_count x B) and on the value output (1 x B).
  Tensors backward(const Batch& b, const Matrix& dlogits, const RowVector& dvalue) const {
    const auto& t = tensors_;
    Tensors g;
    // policy trunk
    g[kPiW3] = dlogits * b.pi_h2.transpose();
    g[kPiB3] = dlogits.rowwise().sum();
    Matrix d2 = (t[kPiW3].transpose() * dlogits).cwiseProduct(tanh_prime(b.pi_h2));
    g[kPiW2] = d2 * b.pi_h1.transpose();
    g[kPiB2] = d2.rowwise().sum();
    Matrix d1 = (t[kPiW2].transpose() * d2).cwiseProduct(tanh_prime(b.pi_h1));
    g[kPiW1] = d1 * b.input.transpose();
    g[kPiB1] = d1.rowwise().sum();
    // value trunk
    g[kVW3] = dvalue * b.v_h2.transpose();
    g[kVB3] = Matrix::Constant(1, 1, dvalue.sum());
    Matrix e2 = (t[kVW3].transpose() * dvalue).cwiseProduct(tanh_prime(b.v_h2));
    g[kVW2] = e2 * b.v_h1.transpose();
    g[kVB2] = e2.rowwise().sum();
    Matrix e1 = (t[kVW2].transpose() * e2).cwiseProduct(tanh_prime(b.v_h1));
    g[kVW1] = e1 * b.input.transpose();
    g[kVB1] = e1.rowwise().sum();
    return g;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& m : tensors_) n += static_cast<std::size_t>(m.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& m : tensors_)
      if (!m.allFinite()) return false;
    return true;
  }

  bool operator==(const PolicyModel& o) const {
    if (!(shape_ == o.shape_)) return false;
    for (int k = 0; k < kTensorCount; ++k)
      if (tensors_[k] != o.tensors_[k]) return false;
    return true;
  }

 private:
  // tanh through the vectorized exp; the scalar libm tanh dominated training
  template <typename Derived>
  static Matrix squash(const Eigen::MatrixBase<Derived>& x) {
    return (Scalar(1) - Scalar(2) / ((Scalar(2) * x.array()).exp() + Scalar(1))).matrix();
  }

  static Matrix tanh_prime(const Matrix& activated) {
    return (Scalar(1) - activated.array().square()).matrix();
  }

  template <typename Rng>
  static Matrix orthogonal(int rows, int cols, Scalar gain, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const int big = std::max(rows, cols), small = std::min(rows, cols);
    Matrix a(big, small);
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = Scalar(n01(rng));
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(big, small);
    // Fix column signs so the factorization is unique.
    const Matrix r = qr.matrixQR().template triangularView<Eigen::Upper>();
    for (int j = 0; j < small; ++j)
      if (r(j, j) < Scalar(0)) q.col(j) = -q.col(j);
    Matrix w = rows >= cols ? q : Matrix(q.transpose());
    return gain * w;
  }

  ModelShape shape_{};
  Tensors tensors_{};
};

using PolicyModeld = PolicyModel<double>;

}  // namespace swarmfault
