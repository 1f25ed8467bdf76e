/**
 * @file gaussian_belief.hpp
 * @brief Multivariate Gaussian beliefs over logistic bandit parameters.
 *
 * Beliefs are held in information form (mean plus precision) so that the
 * flat prior, which has no covariance, is representable: its precision is
 * the zero matrix. Covariance is only materialized when a belief is proper.
 *
 * The reparameterizations used by the bandit (reference arm to independent
 * arm logits, arm relabeling) are linear maps wrapped in TransformMatrix.
 */

#ifndef ORTS_GAUSSIAN_BELIEF_HPP
#define ORTS_GAUSSIAN_BELIEF_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "orts/errors.hpp"

namespace orts {

/// Pivot tolerance used by the positive-definiteness test.
inline constexpr double kPivotTolerance = 1e-10;

/// Arm relabeling: `perm[i]` is the new (0-based) position of old arm `i`.
using Permutation = std::vector<std::size_t>;

template <typename Scalar = double>
class GaussianBelief {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  GaussianBelief() = default;

  /**
   * @brief Builds a belief from a mean and a precision matrix.
   *
   * The precision is symmetrized on construction. A zero-sized belief is
   * allowed; it is the neutral element for embed_flat_last.
   */
  GaussianBelief(Vector mean, Matrix precision)
      : mean_(std::move(mean)), precision_(std::move(precision)) {
    if (precision_.rows() != precision_.cols() ||
        precision_.rows() != mean_.size()) {
      throw InvalidDimension("GaussianBelief: mean has length " +
                             std::to_string(mean_.size()) +
                             " but precision is " +
                             std::to_string(precision_.rows()) + "x" +
                             std::to_string(precision_.cols()));
    }
    symmetrize();
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Vector &mean() const { return mean_; }
  const Matrix &precision() const { return precision_; }

  /// True when the precision admits a Cholesky factor with pivots above tolerance.
  bool is_proper() const {
    if (dim() == 0) return true;
    Eigen::LLT<Matrix> llt(precision_);
    if (llt.info() != Eigen::Success) return false;
    const auto pivots = llt.matrixLLT().diagonal().array().square();
    return (pivots > Scalar(kPivotTolerance)).all();
  }

  /// Covariance of a proper belief.
  Matrix covariance() const {
    Eigen::LLT<Matrix> llt = checked_cholesky<CannotMarginalize>("covariance");
    return llt.solve(Matrix::Identity(dim(), dim()));
  }

  /// Cholesky factor of the precision; throws ErrorT when improper.
  template <typename ErrorT>
  Eigen::LLT<Matrix> checked_cholesky(const char *context) const {
    if (!is_proper()) {
      throw ErrorT(std::string(context) +
                   ": belief is improper (precision not positive definite)");
    }
    return Eigen::LLT<Matrix>(precision_);
  }

 private:
  void symmetrize() {
    const Matrix sym = (precision_ + precision_.transpose()) / Scalar(2);
    precision_ = sym;
  }

  Vector mean_;
  Matrix precision_;
};

using Belief = GaussianBelief<double>;

/// An invertible linear reparameterization together with its inverse.
template <typename Scalar = double>
class TransformMatrix {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit TransformMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
      throw InvalidTransform("TransformMatrix must be square and non-empty");
    }
    Eigen::FullPivLU<Matrix> lu(entries_);
    if (!lu.isInvertible()) {
      throw InvalidTransform("TransformMatrix is singular");
    }
    inverse_ = lu.inverse();
  }

  Eigen::Index dim() const { return entries_.rows(); }
  const Matrix &entries() const { return entries_; }
  const Matrix &inverse() const { return inverse_; }

  /// Composition: (*this) applied after `rhs`.
  TransformMatrix operator*(const TransformMatrix &rhs) const {
    return TransformMatrix(Matrix(entries_ * rhs.entries_));
  }

  TransformMatrix inverted() const { return TransformMatrix(inverse_); }

 private:
  Matrix entries_;
  Matrix inverse_;
};

template <typename Scalar = double>
GaussianBelief<Scalar> make_flat_belief(Eigen::Index dim) {
  using B = GaussianBelief<Scalar>;
  if (dim < 1) throw InvalidDimension("make_flat_belief: dim must be >= 1");
  return B(B::Vector::Zero(dim), B::Matrix::Zero(dim, dim));
}

/**
 * @brief Map from reference-arm parameters to independent per-arm logits.
 *
 * Entry (i, j) is one when i == j or j is the last index. Applied to
 * (odds ratios, intercept) it yields every arm's logit.
 */
template <typename Scalar = double>
TransformMatrix<Scalar> build_c_ind(Eigen::Index k) {
  using M = typename TransformMatrix<Scalar>::Matrix;
  if (k < 1) throw InvalidDimension("build_c_ind: K must be >= 1");
  M c = M::Identity(k, k);
  c.col(k - 1).setOnes();
  return TransformMatrix<Scalar>(std::move(c));
}

inline Permutation invert_permutation(const Permutation &perm) {
  Permutation inv(perm.size(), perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= perm.size() || inv[perm[i]] != perm.size()) {
      throw InvalidPermutation("permutation is not a bijection on {0.." +
                               std::to_string(perm.size()) + ")");
    }
    inv[perm[i]] = i;
  }
  return inv;
}

/// Permutation matrix with (C x)[perm[i]] = x[i].
template <typename Scalar = double>
TransformMatrix<Scalar> build_c_f(const Permutation &perm) {
  using M = typename TransformMatrix<Scalar>::Matrix;
  if (perm.empty()) throw InvalidDimension("build_c_f: empty permutation");
  const Permutation inv = invert_permutation(perm);
  const auto k = static_cast<Eigen::Index>(perm.size());
  M c = M::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    c(i, static_cast<Eigen::Index>(inv[static_cast<std::size_t>(i)])) = 1;
  }
  return TransformMatrix<Scalar>(std::move(c));
}

/// Relabels arms in reference parameterization: C_ind^-1 C_f C_ind.
template <typename Scalar = double>
TransformMatrix<Scalar> compose_reindex(const Permutation &perm) {
  const auto k = static_cast<Eigen::Index>(perm.size());
  const TransformMatrix<Scalar> c_ind = build_c_ind<Scalar>(k);
  return c_ind.inverted() * build_c_f<Scalar>(perm) * c_ind;
}

/// Pushes a belief through an invertible linear map. Works for improper beliefs.
template <typename Scalar>
GaussianBelief<Scalar> transform(const GaussianBelief<Scalar> &belief,
                                 const TransformMatrix<Scalar> &c) {
  if (c.dim() != belief.dim()) {
    throw InvalidDimension("transform: belief dim " +
                           std::to_string(belief.dim()) +
                           " does not match transform dim " +
                           std::to_string(c.dim()));
  }
  const auto &inv = c.inverse();
  return GaussianBelief<Scalar>(c.entries() * belief.mean(),
                                inv.transpose() * belief.precision() * inv);
}

namespace detail {

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix.
template <typename Matrix>
Matrix psd_pseudo_inverse(const Matrix &m) {
  using Scalar = typename Matrix::Scalar;
  if (m.rows() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const auto &values = eig.eigenvalues();
  const Scalar largest = values.cwiseAbs().maxCoeff();
  const Scalar cutoff =
      std::max(Scalar(kPivotTolerance), largest * Scalar(m.rows()) *
                                            Eigen::NumTraits<Scalar>::epsilon());
  auto inv_values = values;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    inv_values(i) = values(i) > cutoff ? Scalar(1) / values(i) : Scalar(0);
  }
  return eig.eigenvectors() * inv_values.asDiagonal() *
         eig.eigenvectors().transpose();
}

template <typename Matrix>
Matrix select(const Matrix &m, const std::vector<Eigen::Index> &rows,
              const std::vector<Eigen::Index> &cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          m(rows[i], cols[j]);
  return out;
}

}  // namespace detail

/**
 * @brief Marginal over a subset of coordinates, in information form.
 *
 * The marginal precision is the Schur complement P_kk - P_kd P_dd^+ P_dk,
 * using a pseudo-inverse of the dropped block so that beliefs with flat
 * directions marginalize to their limiting marginal (flat stays flat).
 * Coordinates are returned in the order given by `keep`.
 */
template <typename Scalar>
GaussianBelief<Scalar> marginalize(const GaussianBelief<Scalar> &belief,
                                   const std::vector<Eigen::Index> &keep) {
  using B = GaussianBelief<Scalar>;
  std::vector<bool> kept(static_cast<std::size_t>(belief.dim()), false);
  for (auto i : keep) {
    if (i < 0 || i >= belief.dim() || kept[static_cast<std::size_t>(i)]) {
      throw InvalidDimension("marginalize: invalid or repeated index");
    }
    kept[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Eigen::Index> drop;
  for (Eigen::Index i = 0; i < belief.dim(); ++i)
    if (!kept[static_cast<std::size_t>(i)]) drop.push_back(i);

  typename B::Vector mean(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i)
    mean(static_cast<Eigen::Index>(i)) = belief.mean()(keep[i]);

  const auto &p = belief.precision();
  typename B::Matrix p_kk = detail::select(p, keep, keep);
  if (!drop.empty()) {
    const typename B::Matrix p_kd = detail::select(p, keep, drop);
    const typename B::Matrix p_dd = detail::select(p, drop, drop);
    p_kk -= p_kd * detail::psd_pseudo_inverse(p_dd) * p_kd.transpose();
  }
  return B(std::move(mean), std::move(p_kk));
}

/// Drops the last coordinate (the reference intercept) of a proper belief.
template <typename Scalar>
GaussianBelief<Scalar> marginalize_drop_last(
    const GaussianBelief<Scalar> &belief) {
  using B = GaussianBelief<Scalar>;
  const Eigen::Index k = belief.dim();
  if (k < 2) throw InvalidDimension("marginalize_drop_last: dim must be >= 2");
  if (!belief.is_proper()) {
    throw CannotMarginalize("marginalize_drop_last: belief is improper");
  }
  const auto &p = belief.precision();
  const Eigen::Index n = k - 1;
  typename B::Matrix schur = p.topLeftCorner(n, n) -
                             p.topRightCorner(n, 1) *
                                 p.bottomLeftCorner(1, n) / p(n, n);
  return B(belief.mean().head(n), std::move(schur));
}

/// Appends a coordinate with zero precision and the given mean.
template <typename Scalar>
GaussianBelief<Scalar> embed_flat_last(const GaussianBelief<Scalar> &belief,
                                       Scalar start_last = Scalar(0)) {
  using B = GaussianBelief<Scalar>;
  const Eigen::Index n = belief.dim();
  typename B::Vector mean(n + 1);
  mean << belief.mean(), start_last;
  typename B::Matrix precision = B::Matrix::Zero(n + 1, n + 1);
  precision.topLeftCorner(n, n) = belief.precision();
  return B(std::move(mean), std::move(precision));
}

/**
 * @brief Draws `count` samples from a proper belief.
 *
 * Returns a count x dim matrix, one draw per row. With P = L L^T the draw is
 * mean + L^-T z for standard normal z.
 */
template <typename Scalar, typename Urng>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sample(
    const GaussianBelief<Scalar> &belief, Eigen::Index count, Urng &rng) {
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (count < 1) throw InvalidDimension("sample: count must be >= 1");
  const auto llt = belief.template checked_cholesky<CannotSample>("sample");
  std::normal_distribution<Scalar> normal;
  M z(belief.dim(), count);
  for (Eigen::Index j = 0; j < count; ++j)
    for (Eigen::Index i = 0; i < belief.dim(); ++i) z(i, j) = normal(rng);
  llt.matrixU().solveInPlace(z);
  z.colwise() += belief.mean();
  return z.transpose();
}

}  // namespace orts

#endif  // ORTS_GAUSSIAN_BELIEF_HPP
