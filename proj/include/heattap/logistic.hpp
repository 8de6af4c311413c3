#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace heattap {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row-wise softmax, in place. Subtracts each row's max before exponentiating.
template <typename Derived>
void softmax_rows(Eigen::MatrixBase<Derived>& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
}

/// softmax(W f + b) for a single feature vector.
template <typename DerivedW, typename DerivedB, typename DerivedF>
VectorX<typename DerivedW::Scalar> softmax_predict(const Eigen::MatrixBase<DerivedW>& weights,
                                                   const Eigen::MatrixBase<DerivedB>& bias,
                                                   const Eigen::MatrixBase<DerivedF>& features) {
  using Scalar = typename DerivedW::Scalar;
  VectorX<Scalar> z = weights * features + bias;
  z.array() = (z.array() - z.maxCoeff()).exp();
  return z / z.sum();
}

template <typename Scalar>
struct SoftmaxLoss {
  Scalar loss = 0;           ///< cross_entropy + reg * l2
  Scalar cross_entropy = 0;  ///< mean negative log-likelihood
  Scalar l2 = 0;             ///< 0.5 * ||W||_F^2, bias excluded
  MatrixX<Scalar> grad_weights;
  VectorX<Scalar> grad_bias;
};

/// Regularized multinomial cross-entropy and its exact gradient.
///
///   loss   = -(1/N) sum_i log p_{i,y_i} + reg * 0.5 ||W||_F^2
///   dW     = (1/N) (P - Y)^T F + reg * W
///   db     = (1/N) colsum(P - Y)
///
/// `features` is N x d, `weights` K x d, `labels` class indices in [0, K).
template <typename Scalar>
SoftmaxLoss<Scalar> softmax_loss_gradient(const Eigen::Ref<const MatrixX<Scalar>>& weights,
                                          const Eigen::Ref<const VectorX<Scalar>>& bias,
                                          const Eigen::Ref<const MatrixX<Scalar>>& features,
                                          std::span<const int> labels, Scalar reg,
                                          bool with_gradient = true) {
  const Eigen::Index n = features.rows();
  const Eigen::Index k = weights.rows();
  if (n == 0) throw std::invalid_argument("empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("label count does not match batch size");
  if (features.cols() != weights.cols() || bias.size() != k)
    throw std::invalid_argument("parameter shapes do not match the features");
  for (int y : labels)
    if (y < 0 || y >= k) throw std::invalid_argument("label " + std::to_string(y) + " out of range");

  // Blocks of samples with classes along columns: each block's logits stay in
  // cache between the forward and backward products.
  constexpr Eigen::Index kBlock = 256;
  MatrixX<Scalar> probs(k, std::min(n, kBlock));
  SoftmaxLoss<Scalar> out;
  if (with_gradient) {
    out.grad_weights = MatrixX<Scalar>::Zero(k, features.cols());
    out.grad_bias = VectorX<Scalar>::Zero(k);
  }
  Scalar nll = 0;
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index m = std::min(kBlock, n - start);
    const auto block = features.middleRows(start, m);
    auto p = probs.leftCols(m);
    p.noalias() = weights * block.transpose();
    p.colwise() += bias;
    const auto col_max = p.colwise().maxCoeff().eval();
    for (Eigen::Index i = 0; i < m; ++i) nll -= p(labels[start + i], i) - col_max(i);
    p.array() = (p.rowwise() - col_max).array().exp();
    const auto totals = p.colwise().sum().eval();
    nll += totals.array().log().sum();
    if (!with_gradient) continue;
    p.array().rowwise() /= totals.array();
    for (Eigen::Index i = 0; i < m; ++i) p(labels[start + i], i) -= Scalar(1);
    out.grad_weights.noalias() += p * block;
    out.grad_bias += p.rowwise().sum();
  }

  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  out.cross_entropy = nll * inv_n;
  out.l2 = Scalar(0.5) * weights.squaredNorm();
  out.loss = out.cross_entropy + reg * out.l2;
  if (!with_gradient) return out;
  out.grad_weights *= inv_n;
  out.grad_weights += reg * weights;
  out.grad_bias *= inv_n;
  return out;
}

}  // namespace heattap
