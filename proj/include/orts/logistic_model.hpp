/**
 * @file logistic_model.hpp
 * @brief Logistic likelihood for K arms with a reference-arm intercept.
 *
 * Parameters are (b_1, ..., b_{K-1}, b_K): arm i < K has logit b_i + b_K and
 * the reference arm K has logit b_K, so b_i is the log odds ratio of arm i
 * against the reference. Aggregated rewards per arm are binomial counts.
 */

#ifndef ORTS_LOGISTIC_MODEL_HPP
#define ORTS_LOGISTIC_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include "orts/errors.hpp"
#include "orts/gaussian_belief.hpp"

namespace orts {

/// Trial and success counts per arm for one round.
class RoundData {
 public:
  RoundData() = default;

  RoundData(std::vector<std::int64_t> trials, std::vector<std::int64_t> successes)
      : n_(std::move(trials)), c_(std::move(successes)) {
    if (n_.size() != c_.size()) {
      throw InvalidRoundData("RoundData: " + std::to_string(n_.size()) +
                             " trial counts but " + std::to_string(c_.size()) +
                             " success counts");
    }
    for (std::size_t i = 0; i < n_.size(); ++i) {
      if (c_[i] < 0 || c_[i] > n_[i]) {
        throw InvalidRoundData("RoundData: arm " + std::to_string(i) +
                               " has c=" + std::to_string(c_[i]) +
                               " outside [0, n=" + std::to_string(n_[i]) + "]");
      }
    }
  }

  static RoundData zeros(std::size_t k) {
    return RoundData(std::vector<std::int64_t>(k, 0),
                     std::vector<std::int64_t>(k, 0));
  }

  std::size_t size() const { return n_.size(); }
  const std::vector<std::int64_t> &trials() const { return n_; }
  const std::vector<std::int64_t> &successes() const { return c_; }

  std::int64_t total_trials() const {
    std::int64_t total = 0;
    for (auto v : n_) total += v;
    return total;
  }

 private:
  std::vector<std::int64_t> n_;
  std::vector<std::int64_t> c_;
};

/// Real-valued counts; what the objective actually consumes.
template <typename Scalar = double>
struct Counts {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> trials;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> successes;

  static Counts from(const RoundData &data) {
    const auto k = static_cast<Eigen::Index>(data.size());
    Counts out{decltype(trials)(k), decltype(successes)(k)};
    for (Eigen::Index i = 0; i < k; ++i) {
      out.trials(i) = static_cast<Scalar>(data.trials()[static_cast<std::size_t>(i)]);
      out.successes(i) =
          static_cast<Scalar>(data.successes()[static_cast<std::size_t>(i)]);
    }
    return out;
  }
};

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// log(sigmoid(x)) without overflow.
template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  if (x >= Scalar(0)) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar logit(Scalar p) {
  return std::log(p / (Scalar(1) - p));
}

/// Per-arm logits: b_i + b_K for i < K, b_K for the reference.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> arm_logits(
    const Eigen::MatrixBase<Derived> &beta) {
  using Vector = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index k = beta.size();
  Vector eta = beta;
  if (k == 0) return eta;
  eta.head(k - 1).array() += beta(k - 1);
  return eta;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> probs_from_params(
    const Eigen::MatrixBase<Derived> &beta) {
  using Scalar = typename Derived::Scalar;
  return arm_logits(beta).unaryExpr([](Scalar x) { return sigmoid(x); });
}

/// Inverse of probs_from_params.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> params_from_probs(
    const Eigen::MatrixBase<Derived> &p) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index k = p.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> beta =
      p.unaryExpr([](Scalar v) { return logit(v); });
  if (k > 0) {
    const Scalar intercept = beta(k - 1);
    beta.array() -= intercept;
    beta(k - 1) = intercept;
  }
  return beta;
}

template <typename Scalar>
struct Objective {
  Scalar value;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gradient;
};

/**
 * @brief Negative log posterior (up to a constant) and its gradient.
 *
 * value = -sum_i [c_i log p_i + (n_i - c_i) log(1 - p_i)]
 *         + 1/2 (mu - m)^T P (mu - m)
 * Flat prior directions contribute nothing.
 */
template <typename Scalar>
Objective<Scalar> neg_log_posterior(
    const typename GaussianBelief<Scalar>::Vector &mu, const Counts<Scalar> &data,
    const GaussianBelief<Scalar> &prior) {
  const Eigen::Index k = mu.size();
  if (k == 0 || data.trials.size() != k || prior.dim() != k) {
    throw InvalidDimension("neg_log_posterior: mu has length " +
                           std::to_string(k) + ", data " +
                           std::to_string(data.trials.size()) + ", prior " +
                           std::to_string(prior.dim()));
  }
  const auto eta = arm_logits(mu);
  Scalar value(0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> residual(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Scalar n = data.trials(i);
    const Scalar c = data.successes(i);
    value -= c * log_sigmoid(eta(i)) + (n - c) * log_sigmoid(-eta(i));
    residual(i) = n * sigmoid(eta(i)) - c;
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gradient = residual;
  gradient(k - 1) = residual.sum();

  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> diff = mu - prior.mean();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pd = prior.precision() * diff;
  value += Scalar(0.5) * diff.dot(pd);
  gradient += pd;
  return {value, std::move(gradient)};
}

template <typename Scalar>
Objective<Scalar> neg_log_posterior(
    const typename GaussianBelief<Scalar>::Vector &mu, const RoundData &data,
    const GaussianBelief<Scalar> &prior) {
  return neg_log_posterior<Scalar>(mu, Counts<Scalar>::from(data), prior);
}

/// Likelihood curvature: n_i p_i (1 - p_i) on the diagonal and the last
/// row/column, with their sum in the corner.
template <typename Derived, typename TrialsDerived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> hessian_lambda(
    const Eigen::MatrixBase<Derived> &mu,
    const Eigen::MatrixBase<TrialsDerived> &trials) {
  using Scalar = typename Derived::Scalar;
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index k = mu.size();
  if (trials.size() != k) {
    throw InvalidDimension("hessian_lambda: dimension mismatch");
  }
  const auto p = probs_from_params(mu);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w =
      trials.array() * p.array() * (Scalar(1) - p.array());
  M lambda = M::Zero(k, k);
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    lambda(i, i) = w(i);
    lambda(i, k - 1) = w(i);
    lambda(k - 1, i) = w(i);
  }
  lambda(k - 1, k - 1) = w.sum();
  return lambda;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> hessian_lambda(
    const Eigen::MatrixBase<Derived> &mu, const RoundData &data) {
  return hessian_lambda(mu, Counts<typename Derived::Scalar>::from(data).trials);
}

/**
 * @brief Counts the MAP fit actually uses.
 *
 * An arm with all-failure or all-success counts has no finite optimum when
 * the prior leaves its own coordinate flat; such arms get half a success
 * added out of one extra trial.
 */
template <typename Scalar>
Counts<Scalar> effective_counts(const RoundData &data,
                                const GaussianBelief<Scalar> &prior) {
  Counts<Scalar> counts = Counts<Scalar>::from(data);
  const auto &p = prior.precision();
  for (Eigen::Index i = 0; i < counts.trials.size(); ++i) {
    const Scalar n = counts.trials(i);
    const Scalar c = counts.successes(i);
    const bool degenerate = n > Scalar(0) && (c == Scalar(0) || c == n);
    const bool flat = p(i, i) <= Scalar(kPivotTolerance);
    if (degenerate && flat) {
      counts.trials(i) = n + Scalar(1);
      counts.successes(i) = c + Scalar(0.5);
    }
  }
  return counts;
}

struct NewtonOptions {
  int max_iterations = 100;
  int max_halvings = 30;
  double gradient_tolerance = 1e-10;
};

/// Posterior mode by damped Newton, starting from the prior mean.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> fit_map(
    const Counts<Scalar> &data, const GaussianBelief<Scalar> &prior,
    const NewtonOptions &options = {}) {
  using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (data.trials.size() != prior.dim()) {
    throw InvalidDimension("fit_map: data has " +
                           std::to_string(data.trials.size()) +
                           " arms but prior has dim " +
                           std::to_string(prior.dim()));
  }
  V x = prior.mean();
  auto current = neg_log_posterior<Scalar>(x, data, prior);
  Scalar grad_norm = current.gradient.cwiseAbs().maxCoeff();

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (grad_norm <= Scalar(options.gradient_tolerance)) return x;

    const M hessian = prior.precision() + hessian_lambda(x, data.trials);
    V step;
    Eigen::LLT<M> llt(hessian);
    if (llt.info() == Eigen::Success) {
      step = llt.solve(-current.gradient);
    } else {
      // Directions with no curvature carry no gradient either; the
      // minimum-norm step leaves them where they are.
      step = hessian.completeOrthogonalDecomposition().solve(-current.gradient);
    }

    Scalar scale(1);
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, scale /= Scalar(2)) {
      const V trial = x + scale * step;
      auto next = neg_log_posterior<Scalar>(trial, data, prior);
      if (next.value < current.value) {
        x = trial;
        current = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Near the optimum the objective is flat to rounding; take the full
      // step if it still shrinks the gradient.
      const V trial = x + step;
      auto next = neg_log_posterior<Scalar>(trial, data, prior);
      if (next.gradient.cwiseAbs().maxCoeff() < grad_norm) {
        x = trial;
        current = std::move(next);
      } else {
        break;
      }
    }
    grad_norm = current.gradient.cwiseAbs().maxCoeff();
  }
  if (grad_norm <= Scalar(options.gradient_tolerance)) return x;
  throw OptimizationFailure(
      "fit_map: Newton did not converge (gradient inf-norm " +
          std::to_string(static_cast<double>(grad_norm)) + ")",
      x.template cast<double>(), static_cast<double>(grad_norm));
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> fit_map(
    const RoundData &data, const GaussianBelief<Scalar> &prior,
    const NewtonOptions &options = {}) {
  if (data.size() != static_cast<std::size_t>(prior.dim())) {
    throw InvalidDimension("fit_map: data/prior dimension mismatch");
  }
  return fit_map(effective_counts(data, prior), prior, options);
}

/// Laplace approximation of the posterior after observing one round.
template <typename Scalar>
GaussianBelief<Scalar> laplace_update(const GaussianBelief<Scalar> &prior,
                                      const RoundData &data,
                                      const NewtonOptions &options = {}) {
  if (data.size() != static_cast<std::size_t>(prior.dim())) {
    throw InvalidDimension("laplace_update: data/prior dimension mismatch");
  }
  const Counts<Scalar> counts = effective_counts(data, prior);
  typename GaussianBelief<Scalar>::Vector mode = fit_map(counts, prior, options);
  typename GaussianBelief<Scalar>::Matrix precision =
      prior.precision() + hessian_lambda(mode, counts.trials);
  return GaussianBelief<Scalar>(std::move(mode), std::move(precision));
}

}  // namespace orts

#endif  // ORTS_LOGISTIC_MODEL_HPP
