#ifndef ORTS_TESTS_TEST_UTIL_HPP
#define ORTS_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "orts/continuous.hpp"
#include "orts/gaussian_belief.hpp"

namespace orts::test {

inline double max_abs(const Eigen::MatrixXd &m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

template <typename Urng>
Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Urng &rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

/// Precision A A^T / k + 0.5 I with a N(0, 1) mean.
template <typename Urng>
GaussianBelief<double> random_proper_belief(Eigen::Index k, Urng &rng) {
  const Eigen::MatrixXd a = random_matrix(k, k, rng);
  const Eigen::MatrixXd p =
      a * a.transpose() / static_cast<double>(k) + 0.5 * Eigen::MatrixXd::Identity(k, k);
  return {random_matrix(k, 1, rng), p};
}

template <typename Urng>
std::vector<std::size_t> random_permutation(std::size_t k, Urng &rng) {
  std::vector<std::size_t> f(k);
  std::iota(f.begin(), f.end(), 0);
  std::shuffle(f.begin(), f.end(), rng);
  return f;
}

/// Rows are observations.
inline Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd &draws) {
  const Eigen::MatrixXd centered = draws.rowwise() - draws.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(draws.rows() - 1);
}

/**
 * Probability that each of three arms is optimal under a proper belief over
 * (b_1, b_2, b_K), by midpoint quadrature of the bivariate normal marginal of
 * the odds ratios (b_1, b_2) on a grid spanning +-8 standard deviations.
 * The reference arm wins where both odds ratios are negative.
 */
inline Eigen::Vector3d three_arm_quadrature(const GaussianBelief<double> &belief,
                                            int grid = 1200) {
  const Eigen::Matrix2d cov = belief.covariance().topLeftCorner(2, 2);
  const Eigen::Vector2d mean = belief.mean().head(2);
  const Eigen::Matrix2d prec = cov.inverse();
  const double norm = 1.0 / (2.0 * 3.14159265358979323846 * std::sqrt(cov.determinant()));
  const double s1 = std::sqrt(cov(0, 0)), s2 = std::sqrt(cov(1, 1));
  const double lo1 = mean(0) - 8 * s1, lo2 = mean(1) - 8 * s2;
  const double h1 = 16 * s1 / grid, h2 = 16 * s2 / grid;
  Eigen::Vector3d mass = Eigen::Vector3d::Zero();
  for (int i = 0; i < grid; ++i) {
    const double b1 = lo1 + (i + 0.5) * h1;
    for (int j = 0; j < grid; ++j) {
      const double b2 = lo2 + (j + 0.5) * h2;
      const Eigen::Vector2d d(b1 - mean(0), b2 - mean(1));
      const double density = norm * std::exp(-0.5 * d.dot(prec * d)) * h1 * h2;
      if (b1 > b2 && b1 > 0) {
        mass(0) += density;
      } else if (b2 > 0 && b2 >= b1) {
        mass(1) += density;
      } else {
        mass(2) += density;
      }
    }
  }
  return mass;
}

/// Fraction of posterior draws in which arm `a` has a larger logit than `b`.
template <typename Urng>
double prob_logit_greater(const ArmRegistry &registry, const ArmId &a,
                          const ArmId &b, Eigen::Index draws, Urng &rng) {
  const auto ia = static_cast<Eigen::Index>(*registry.index_of(a));
  const auto ib = static_cast<Eigen::Index>(*registry.index_of(b));
  const Eigen::Index k = registry.belief.dim();
  const Eigen::MatrixXd beta = sample(registry.belief, draws, rng);
  // Logit of arm i is beta_i + beta_K, and beta_K for the reference.
  auto logit = [&](Eigen::Index row, Eigen::Index i) {
    return i + 1 == k ? beta(row, k - 1) : beta(row, i) + beta(row, k - 1);
  };
  Eigen::Index wins = 0;
  for (Eigen::Index r = 0; r < draws; ++r)
    if (logit(r, ia) > logit(r, ib)) ++wins;
  return static_cast<double>(wins) / static_cast<double>(draws);
}

}  // namespace orts::test

#endif  // ORTS_TESTS_TEST_UTIL_HPP
