#ifndef ORTS_POLICY_HPP
#define ORTS_POLICY_HPP

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "orts/gaussian_belief.hpp"
#include "orts/logistic_model.hpp"

namespace orts {

using Rng = std::mt19937_64;

/// Monte Carlo draws per allocation when the caller does not choose.
inline constexpr int kDefaultDraws = 10000;

/// Traffic shares over arms; non-negative and summing to one.
using AllocationProportions = Eigen::VectorXd;

enum class UpdateMode { full, odds_ratio };

enum class PolicyKind { beta_ts, full_ts, or_ts };

std::string to_string(UpdateMode mode);
std::string to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string &name);
UpdateMode parse_update_mode(const std::string &name);

/// Beta posterior per arm for the conjugate baseline.
struct BetaState {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;

  static BetaState uniform(Eigen::Index k);
};

struct LogisticPolicyState {
  Belief belief;
  UpdateMode mode = UpdateMode::full;
  std::int64_t round_index = 0;

  static LogisticPolicyState initial(Eigen::Index k, UpdateMode mode);
};

AllocationProportions initial_proportions(Eigen::Index k);

/**
 * Thompson proportions for a proper logistic belief: each draw's odds ratios
 * are compared against 0 for the reference, and the argmax is tallied.
 * Ties go to the lowest index. Throws CannotSample for improper beliefs.
 */
AllocationProportions allocation_proportions(const Belief &belief, int n_draws,
                                             Rng &rng);

LogisticPolicyState full_ts_update(const LogisticPolicyState &state,
                                   const RoundData &data);

/// Prior carried into an odds-ratio round: the intercept is marginalized out
/// and replaced by a flat direction starting at the previous intercept mean.
Belief odds_ratio_prior(const Belief &belief);

LogisticPolicyState or_ts_update(const LogisticPolicyState &state,
                                 const RoundData &data);

/// Dispatches on state.mode.
LogisticPolicyState logistic_update(const LogisticPolicyState &state,
                                    const RoundData &data);

BetaState beta_ts_update(const BetaState &state, const RoundData &data);

AllocationProportions beta_ts_proportions(const BetaState &state, int n_draws,
                                          Rng &rng);

/// Any of the three policies behind one update/allocate interface.
class Policy {
 public:
  Policy(PolicyKind kind, Eigen::Index k, int n_draws = kDefaultDraws);

  PolicyKind kind() const { return kind_; }
  Eigen::Index arms() const { return arms_; }
  std::int64_t rounds_observed() const { return rounds_; }

  /// Uniform before the first update or while the belief is improper.
  AllocationProportions proportions(Rng &rng) const;
  void update(const RoundData &data);

  const std::variant<BetaState, LogisticPolicyState> &state() const {
    return state_;
  }

 private:
  PolicyKind kind_;
  Eigen::Index arms_;
  int n_draws_;
  std::int64_t rounds_ = 0;
  std::variant<BetaState, LogisticPolicyState> state_;
};

}  // namespace orts

#endif  // ORTS_POLICY_HPP
