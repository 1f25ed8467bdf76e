#include <doctest.h>

#include <cmath>

#include "orts/policy.hpp"
#include "test_util.hpp"

using namespace orts;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double logit_of(double p) { return std::log(p / (1.0 - p)); }

RoundData binomial_round(const VectorXd &p, const std::vector<std::int64_t> &n, Rng &rng) {
  std::vector<std::int64_t> c(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    std::binomial_distribution<std::int64_t> binom(n[i], p(static_cast<Eigen::Index>(i)));
    c[i] = binom(rng);
  }
  return RoundData(n, c);
}

VectorXd shift_logits(const VectorXd &p, double delta) {
  return p.unaryExpr([delta](double v) { return sigmoid(logit_of(v) + delta); });
}

}  // namespace

TEST_CASE("initial proportions are uniform") {
  CHECK(test::max_abs(initial_proportions(10) - VectorXd::Constant(10, 0.1)) < 1e-15);
  CHECK(initial_proportions(1)(0) == 1.0);
  CHECK(initial_proportions(4) == VectorXd::Constant(4, 0.25));
  CHECK_THROWS_AS(initial_proportions(0), InvalidDimension);
}

TEST_CASE("allocation_proportions") {
  Rng rng(101);
  SUBCASE("symmetric about zero") {
    const Belief b(Eigen::Vector2d(0.0, -0.4), MatrixXd::Identity(2, 2));
    const VectorXd p = allocation_proportions(b, 10000, rng);
    CHECK(std::abs(p(0) - 0.5) < 0.02);
    CHECK(std::abs(p(1) - 0.5) < 0.02);
  }
  SUBCASE("concentrated") {
    const Belief b(Eigen::Vector2d(5.0, 0.0), (1e4 * MatrixXd::Identity(2, 2)).eval());
    const VectorXd p = allocation_proportions(b, 10000, rng);
    CHECK(std::abs(p(0) - 1.0) < 1e-3);
    CHECK(p(1) < 1e-3);
  }
  SUBCASE("three arms against quadrature") {
    const Belief b(Eigen::Vector3d(0.5, -0.5, 0.0), MatrixXd::Identity(3, 3));
    const VectorXd p = allocation_proportions(b, 100000, rng);
    const Eigen::Vector3d expected = test::three_arm_quadrature(b);
    CHECK(std::abs(expected.sum() - 1.0) < 1e-6);
    CHECK(test::max_abs(p - expected) < 0.01);
  }
  SUBCASE("simplex and determinism") {
    for (int trial = 0; trial < 10; ++trial) {
      const Belief b = test::random_proper_belief(2 + trial % 7, rng);
      Rng a(trial), c(trial);
      const VectorXd p = allocation_proportions(b, 2000, a);
      CHECK((p.array() >= 0.0).all());
      CHECK(std::abs(p.sum() - 1.0) < 1e-9);
      CHECK(p == allocation_proportions(b, 2000, c));
    }
  }
  SUBCASE("single arm") {
    CHECK(allocation_proportions(Belief(VectorXd::Zero(1), MatrixXd::Ones(1, 1)), 10, rng)(0) ==
          1.0);
  }
  SUBCASE("improper belief cannot be sampled") {
    CHECK_THROWS_AS(allocation_proportions(make_flat_belief(3), 100, rng), CannotSample);
  }
}

TEST_CASE("allocation follows relabeling of arms") {
  Rng rng(55);
  for (int trial = 0; trial < 3; ++trial) {
    const Belief b(VectorXd::Random(4) * 0.5, MatrixXd::Identity(4, 4) * 4.0);
    const Permutation f = test::random_permutation(4, rng);
    const VectorXd original = allocation_proportions(b, 100000, rng);
    const VectorXd relabeled =
        allocation_proportions(transform(b, compose_reindex(f)), 100000, rng);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(relabeled(static_cast<Eigen::Index>(f[i])) -
                     original(static_cast<Eigen::Index>(i))) < 0.01);
    }
  }
}

TEST_CASE("full_ts_update") {
  const RoundData data({100, 100, 100, 100}, {30, 31, 28, 35});
  const auto start = LogisticPolicyState::initial(4, UpdateMode::full);
  const auto next = full_ts_update(start, data);
  CHECK(next.round_index == 1);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double c = data.successes()[static_cast<std::size_t>(i)] / 100.0;
    CHECK(std::abs(next.belief.mean()(i) - (logit_of(c) - logit_of(0.35))) < 1e-8);
  }
  CHECK(std::abs(next.belief.mean()(3) - logit_of(0.35)) < 1e-8);

  const auto unchanged = full_ts_update(next, RoundData::zeros(4));
  CHECK(unchanged.belief.mean() == next.belief.mean());
  CHECK(test::max_abs(unchanged.belief.precision() - next.belief.precision()) == 0.0);
  CHECK(unchanged.round_index == 2);

  const RoundData symmetric({80, 80, 80}, {20, 20, 20});
  const auto one = full_ts_update(LogisticPolicyState::initial(3, UpdateMode::full), symmetric);
  const auto two = full_ts_update(one, symmetric);
  CHECK(test::max_abs(two.belief.precision() - 2.0 * one.belief.precision()) < 1e-9);
}

TEST_CASE("or_ts_update") {
  SUBCASE("first round matches full update") {
    const RoundData data({120, 90, 150, 100, 80}, {30, 31, 40, 35, 20});
    const auto full = full_ts_update(LogisticPolicyState::initial(5, UpdateMode::full), data);
    const auto odds = or_ts_update(LogisticPolicyState::initial(5, UpdateMode::odds_ratio), data);
    CHECK(test::max_abs(full.belief.mean() - odds.belief.mean()) < 1e-10);
    CHECK(test::max_abs(full.belief.precision() - odds.belief.precision()) < 1e-10);
  }
  SUBCASE("carried prior has a flat intercept") {
    const auto first = or_ts_update(LogisticPolicyState::initial(3, UpdateMode::odds_ratio),
                                    RoundData({100, 100, 100}, {30, 40, 50}));
    const Belief prior = odds_ratio_prior(first.belief);
    CHECK(prior.precision().row(2).isZero());
    CHECK(prior.precision().col(2).isZero());
    CHECK(prior.mean()(2) == first.belief.mean()(2));
    const Belief expected = marginalize_drop_last(first.belief);
    CHECK(test::max_abs(prior.precision().topLeftCorner(2, 2) - expected.precision()) < 1e-12);
  }
  SUBCASE("zero data keeps the odds ratios") {
    const auto first = or_ts_update(LogisticPolicyState::initial(3, UpdateMode::odds_ratio),
                                    RoundData({100, 100, 100}, {30, 40, 50}));
    const auto second = or_ts_update(first, RoundData::zeros(3));
    CHECK(test::max_abs(second.belief.mean() - first.belief.mean()) < 1e-12);
    CHECK_FALSE(second.belief.is_proper());
  }
  SUBCASE("common logit shift moves odds ratios less than the full update") {
    const VectorXd base = VectorXd(Eigen::Matrix<double, 5, 1>(0.30, 0.30, 0.31, 0.30, 0.30));
    const VectorXd shifted = shift_logits(base, 1.0);
    const std::vector<std::int64_t> even(5, 1000);
    // Second round is allocated unevenly, as a bandit would.
    const std::vector<std::int64_t> uneven{4000, 500, 4000, 500, 1000};
    int or_moves_less = 0;
    for (int seed = 0; seed < 100; ++seed) {
      Rng rng(1000 + seed);
      const RoundData r1 = binomial_round(base, even, rng);
      const RoundData r2 = binomial_round(shifted, uneven, rng);
      const auto full1 = full_ts_update(LogisticPolicyState::initial(5, UpdateMode::full), r1);
      const auto full2 = full_ts_update(full1, r2);
      const auto odds1 =
          or_ts_update(LogisticPolicyState::initial(5, UpdateMode::odds_ratio), r1);
      const auto odds2 = or_ts_update(odds1, r2);
      const double full_move = (full2.belief.mean() - full1.belief.mean()).head(4).norm();
      const double odds_move = (odds2.belief.mean() - odds1.belief.mean()).head(4).norm();
      if (odds_move < full_move) ++or_moves_less;
    }
    CHECK(or_moves_less >= 90);
  }
  SUBCASE("large samples recover true odds ratios under any common shift") {
    const VectorXd base = VectorXd(Eigen::Vector4d(0.25, 0.32, 0.28, 0.30));
    const VectorXd truth = params_from_probs(base).head(3);
    const std::vector<std::int64_t> n(4, 100000);
    for (const double delta : {-1.5, 0.0, 0.7, 2.0}) {
      Rng rng(static_cast<std::uint64_t>(delta * 100 + 500));
      auto state = or_ts_update(LogisticPolicyState::initial(4, UpdateMode::odds_ratio),
                                binomial_round(base, n, rng));
      state = or_ts_update(state, binomial_round(shift_logits(base, delta), n, rng));
      CHECK(test::max_abs(state.belief.mean().head(3) - truth) < 0.05);
    }
  }
  SUBCASE("mode switches per round") {
    auto state = LogisticPolicyState::initial(3, UpdateMode::odds_ratio);
    state = logistic_update(state, RoundData({100, 100, 100}, {30, 40, 50}));
    state.mode = UpdateMode::full;
    const auto full = logistic_update(state, RoundData({100, 100, 100}, {20, 30, 40}));
    CHECK(full.belief.is_proper());
    CHECK(full.round_index == 2);
  }
}

TEST_CASE("beta_ts_update") {
  const BetaState start = BetaState::uniform(2);
  const BetaState next = beta_ts_update(start, RoundData({10, 0}, {3, 0}));
  CHECK(next.alpha == Eigen::Vector2d(4, 1));
  CHECK(next.beta == Eigen::Vector2d(8, 1));
  CHECK(beta_ts_update(start, RoundData::zeros(2)).alpha == start.alpha);

  BetaState s = BetaState::uniform(5);
  std::int64_t total = 0;
  Rng rng(3);
  for (int round = 0; round < 6; ++round) {
    const RoundData d = binomial_round(VectorXd::Constant(5, 0.4), {10, 20, 30, 40, 50}, rng);
    total += d.total_trials();
    s = beta_ts_update(s, d);
  }
  CHECK((s.alpha + s.beta).sum() == doctest::Approx(2.0 * 5 + static_cast<double>(total)));
  CHECK_THROWS_AS(beta_ts_update(start, RoundData::zeros(3)), InvalidDimension);
}

TEST_CASE("beta_ts_proportions") {
  Rng rng(9);
  const VectorXd even = beta_ts_proportions(BetaState::uniform(2), 10000, rng);
  CHECK(std::abs(even(0) - 0.5) < 0.02);

  const BetaState strong{Eigen::Vector2d(1000, 1), Eigen::Vector2d(1000, 1000)};
  CHECK(beta_ts_proportions(strong, 10000, rng)(0) > 0.99);

  // P(X > Y) for X ~ Beta(2, 1), Y ~ Beta(1, 1) is the integral of 2x * x.
  const BetaState tilted{Eigen::Vector2d(2, 1), Eigen::Vector2d(1, 1)};
  CHECK(std::abs(beta_ts_proportions(tilted, 10000, rng)(0) - 2.0 / 3.0) < 0.02);

  Rng a(4), b(4);
  CHECK(beta_ts_proportions(tilted, 500, a) == beta_ts_proportions(tilted, 500, b));
}

TEST_CASE("Policy wrapper") {
  Rng rng(12);
  for (const auto kind : {PolicyKind::beta_ts, PolicyKind::full_ts, PolicyKind::or_ts}) {
    Policy policy(kind, 3, 2000);
    CHECK(policy.proportions(rng) == initial_proportions(3));
    policy.update(RoundData({300, 300, 300}, {60, 90, 150}));
    const VectorXd p = policy.proportions(rng);
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
    CHECK(p(2) > 0.9);
  }
  SUBCASE("improper logistic belief falls back to uniform") {
    Policy policy(PolicyKind::full_ts, 3, 100);
    policy.update(RoundData({0, 50, 50}, {0, 10, 20}));
    CHECK(policy.proportions(rng) == initial_proportions(3));
  }
  CHECK(parse_policy_kind("or_ts") == PolicyKind::or_ts);
  CHECK_THROWS_AS(parse_policy_kind("ucb"), ConfigError);
}
