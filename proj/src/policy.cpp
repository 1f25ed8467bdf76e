#include "orts/policy.hpp"

#include <stdexcept>

namespace orts {

std::string to_string(UpdateMode mode) {
  return mode == UpdateMode::full ? "full" : "odds_ratio";
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::beta_ts: return "beta_ts";
    case PolicyKind::full_ts: return "full_ts";
    case PolicyKind::or_ts: return "or_ts";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(const std::string &name) {
  if (name == "beta_ts") return PolicyKind::beta_ts;
  if (name == "full_ts") return PolicyKind::full_ts;
  if (name == "or_ts") return PolicyKind::or_ts;
  throw ConfigError("unknown policy '" + name +
                    "' (expected beta_ts, full_ts or or_ts)");
}

UpdateMode parse_update_mode(const std::string &name) {
  if (name == "full") return UpdateMode::full;
  if (name == "odds_ratio") return UpdateMode::odds_ratio;
  throw ConfigError("unknown update mode '" + name +
                    "' (expected full or odds_ratio)");
}

BetaState BetaState::uniform(Eigen::Index k) {
  if (k < 1) throw InvalidDimension("BetaState: K must be >= 1");
  return {Eigen::VectorXd::Ones(k), Eigen::VectorXd::Ones(k)};
}

LogisticPolicyState LogisticPolicyState::initial(Eigen::Index k,
                                                 UpdateMode mode) {
  return {make_flat_belief<double>(k), mode, 0};
}

AllocationProportions initial_proportions(Eigen::Index k) {
  if (k < 1) throw InvalidDimension("initial_proportions: K must be >= 1");
  return Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
}

namespace {

AllocationProportions tally(const std::vector<std::int64_t> &wins, int n_draws) {
  AllocationProportions out(static_cast<Eigen::Index>(wins.size()));
  for (std::size_t i = 0; i < wins.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) =
        static_cast<double>(wins[i]) / static_cast<double>(n_draws);
  }
  return out;
}

void check_draws(int n_draws) {
  if (n_draws < 1) throw InvalidDimension("n_draws must be >= 1");
}

}  // namespace

AllocationProportions allocation_proportions(const Belief &belief, int n_draws,
                                             Rng &rng) {
  check_draws(n_draws);
  const Eigen::Index k = belief.dim();
  if (k < 1) throw InvalidDimension("allocation_proportions: empty belief");
  const Eigen::MatrixXd draws = sample(belief, n_draws, rng);
  std::vector<std::int64_t> wins(static_cast<std::size_t>(k), 0);
  for (Eigen::Index s = 0; s < n_draws; ++s) {
    // The reference arm's odds ratio against itself is 0.
    Eigen::Index best = k - 1;
    double best_value = 0.0;
    for (Eigen::Index i = 0; i + 1 < k; ++i) {
      const double v = draws(s, i);
      if (v > best_value || (v == best_value && i < best)) {
        best = i;
        best_value = v;
      }
    }
    ++wins[static_cast<std::size_t>(best)];
  }
  return tally(wins, n_draws);
}

LogisticPolicyState full_ts_update(const LogisticPolicyState &state,
                                   const RoundData &data) {
  return {laplace_update(state.belief, data), state.mode,
          state.round_index + 1};
}

Belief odds_ratio_prior(const Belief &belief) {
  const Eigen::Index k = belief.dim();
  if (k < 2) return belief;
  const double start_last = belief.mean()(k - 1);
  if (belief.is_proper()) {
    return embed_flat_last(marginalize_drop_last(belief), start_last);
  }
  // Partially or fully flat: take the limiting marginal in information form.
  std::vector<Eigen::Index> keep(static_cast<std::size_t>(k - 1));
  for (Eigen::Index i = 0; i + 1 < k; ++i) keep[static_cast<std::size_t>(i)] = i;
  return embed_flat_last(marginalize(belief, keep), start_last);
}

LogisticPolicyState or_ts_update(const LogisticPolicyState &state,
                                 const RoundData &data) {
  return {laplace_update(odds_ratio_prior(state.belief), data), state.mode,
          state.round_index + 1};
}

LogisticPolicyState logistic_update(const LogisticPolicyState &state,
                                    const RoundData &data) {
  return state.mode == UpdateMode::odds_ratio ? or_ts_update(state, data)
                                              : full_ts_update(state, data);
}

BetaState beta_ts_update(const BetaState &state, const RoundData &data) {
  if (data.size() != static_cast<std::size_t>(state.alpha.size())) {
    throw InvalidDimension("beta_ts_update: data/state dimension mismatch");
  }
  BetaState next = state;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    next.alpha(idx) += static_cast<double>(data.successes()[i]);
    next.beta(idx) +=
        static_cast<double>(data.trials()[i] - data.successes()[i]);
  }
  return next;
}

AllocationProportions beta_ts_proportions(const BetaState &state, int n_draws,
                                          Rng &rng) {
  check_draws(n_draws);
  const Eigen::Index k = state.alpha.size();
  if (k < 1) throw InvalidDimension("beta_ts_proportions: empty state");
  std::vector<std::gamma_distribution<double>> ga, gb;
  for (Eigen::Index i = 0; i < k; ++i) {
    ga.emplace_back(state.alpha(i), 1.0);
    gb.emplace_back(state.beta(i), 1.0);
  }
  std::vector<std::int64_t> wins(static_cast<std::size_t>(k), 0);
  for (int s = 0; s < n_draws; ++s) {
    Eigen::Index best = 0;
    double best_value = -1.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double x = ga[static_cast<std::size_t>(i)](rng);
      const double y = gb[static_cast<std::size_t>(i)](rng);
      const double draw = x / (x + y);
      if (draw > best_value) {
        best = i;
        best_value = draw;
      }
    }
    ++wins[static_cast<std::size_t>(best)];
  }
  return tally(wins, n_draws);
}

Policy::Policy(PolicyKind kind, Eigen::Index k, int n_draws)
    : kind_(kind), arms_(k), n_draws_(n_draws) {
  check_draws(n_draws);
  switch (kind) {
    case PolicyKind::beta_ts:
      state_ = BetaState::uniform(k);
      break;
    case PolicyKind::full_ts:
      state_ = LogisticPolicyState::initial(k, UpdateMode::full);
      break;
    case PolicyKind::or_ts:
      state_ = LogisticPolicyState::initial(k, UpdateMode::odds_ratio);
      break;
  }
}

AllocationProportions Policy::proportions(Rng &rng) const {
  if (rounds_ == 0) return initial_proportions(arms_);
  if (const auto *beta = std::get_if<BetaState>(&state_)) {
    return beta_ts_proportions(*beta, n_draws_, rng);
  }
  const auto &logistic = std::get<LogisticPolicyState>(state_);
  if (!logistic.belief.is_proper()) return initial_proportions(arms_);
  return allocation_proportions(logistic.belief, n_draws_, rng);
}

void Policy::update(const RoundData &data) {
  if (auto *beta = std::get_if<BetaState>(&state_)) {
    *beta = beta_ts_update(*beta, data);
  } else {
    auto &logistic = std::get<LogisticPolicyState>(state_);
    logistic = logistic_update(logistic, data);
  }
  ++rounds_;
}

}  // namespace orts
