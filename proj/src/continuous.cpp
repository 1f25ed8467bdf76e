#include "orts/continuous.hpp"

#include <algorithm>
#include <set>

namespace orts {

const ArmId &ArmRegistry::reference() const {
  if (arms.empty()) throw InvalidRound("registry has no arms");
  return arms.back();
}

std::optional<std::size_t> ArmRegistry::index_of(const ArmId &id) const {
  const auto it = std::find(arms.begin(), arms.end(), id);
  if (it == arms.end()) return std::nullopt;
  return static_cast<std::size_t>(it - arms.begin());
}

std::string to_string(ContinuityDecision decision) {
  return decision == ContinuityDecision::continue_bandit ? "continue_bandit"
                                                         : "reinitialize";
}

DiscontinuityFallback parse_fallback(const std::string &name) {
  if (name == "reinitialize") return DiscontinuityFallback::reinitialize;
  if (name == "full_rank_prior") return DiscontinuityFallback::full_rank_prior;
  throw ConfigError("unknown discontinuity fallback '" + name +
                    "' (expected reinitialize or full_rank_prior)");
}

std::string to_string(DiscontinuityFallback fallback) {
  return fallback == DiscontinuityFallback::reinitialize ? "reinitialize"
                                                         : "full_rank_prior";
}

namespace {

void check_active(const std::vector<ArmId> &active) {
  if (active.empty()) throw InvalidRound("active arm set is empty");
  std::set<ArmId> seen;
  for (const auto &id : active) {
    if (!seen.insert(id).second) {
      throw InvalidRound("arm '" + id + "' listed twice in the active set");
    }
  }
}

/// Lowest registry position among active arms already in the registry.
std::optional<ArmId> lowest_observed(const ArmRegistry &registry,
                                     const std::vector<ArmId> &active) {
  for (const auto &id : registry.arms) {
    if (std::find(active.begin(), active.end(), id) != active.end()) return id;
  }
  return std::nullopt;
}

ArmRegistry anchor_into(const ArmRegistry &registry,
                        const std::vector<ArmId> &active) {
  if (registry.empty()) return registry;
  const ArmId &ref = registry.reference();
  if (std::find(active.begin(), active.end(), ref) != active.end()) {
    return registry;
  }
  if (const auto target = lowest_observed(registry, active)) {
    return reanchor_reference(registry, *target);
  }
  return registry;
}

}  // namespace

std::size_t overlap(const std::vector<ArmId> &active,
                    const ArmRegistry &registry) {
  return static_cast<std::size_t>(
      std::count_if(active.begin(), active.end(),
                    [&](const ArmId &id) { return registry.contains(id); }));
}

ContinuityDecision check_continuity(const std::vector<ArmId> &active,
                                    const ArmRegistry &registry) {
  check_active(active);
  return overlap(active, registry) >= 2 ? ContinuityDecision::continue_bandit
                                        : ContinuityDecision::reinitialize;
}

ArmRegistry reanchor_reference(const ArmRegistry &registry,
                               const ArmId &new_reference) {
  const auto pos = registry.index_of(new_reference);
  if (!pos) throw UnknownArm("unknown arm '" + new_reference + "'");
  const std::size_t k = registry.arms.size();
  if (*pos + 1 == k) return registry;

  Permutation perm(k);
  ArmRegistry out = registry;
  out.arms.clear();
  for (std::size_t i = 0; i < k; ++i) {
    if (i == *pos) continue;
    perm[i] = out.arms.size();
    out.arms.push_back(registry.arms[i]);
  }
  perm[*pos] = k - 1;
  out.arms.push_back(new_reference);
  out.belief = transform(registry.belief, compose_reindex<double>(perm));
  return out;
}

RoundPlan plan_round(const ArmRegistry &registry,
                     const std::vector<ArmId> &active, int n_draws, Rng &rng) {
  check_active(active);
  RoundPlan plan;
  plan.active = active;
  for (const auto &id : active) {
    (registry.contains(id) ? plan.observed : plan.unobserved).push_back(id);
  }
  const auto a = static_cast<double>(active.size());
  plan.proportions = initial_proportions(static_cast<Eigen::Index>(active.size()));
  if (plan.observed.size() < 2) return plan;

  const ArmRegistry anchored = anchor_into(registry, active);
  std::vector<Eigen::Index> keep;
  std::vector<ArmId> kept_ids;
  for (std::size_t i = 0; i < anchored.arms.size(); ++i) {
    const auto &id = anchored.arms[i];
    if (std::find(active.begin(), active.end(), id) != active.end()) {
      keep.push_back(static_cast<Eigen::Index>(i));
      kept_ids.push_back(id);
    }
  }
  const Belief marginal = marginalize(anchored.belief, keep);
  if (!marginal.is_proper()) return plan;

  const AllocationProportions p_ts =
      allocation_proportions(marginal, n_draws, rng);
  const double share = static_cast<double>(plan.observed.size()) / a;
  for (std::size_t j = 0; j < kept_ids.size(); ++j) {
    const auto it = std::find(active.begin(), active.end(), kept_ids[j]);
    plan.proportions(it - active.begin()) =
        share * p_ts(static_cast<Eigen::Index>(j));
  }
  return plan;
}

ArmRegistry absorb_round(const ArmRegistry &registry,
                         const std::vector<ArmId> &active,
                         const RoundData &data, UpdateMode mode,
                         DiscontinuityFallback fallback) {
  check_active(active);
  if (data.size() != active.size()) {
    throw InvalidRoundData("absorb_round: " + std::to_string(data.size()) +
                           " count entries for " +
                           std::to_string(active.size()) + " active arms");
  }
  const bool fresh = registry.empty();
  if (!fresh &&
      check_continuity(active, registry) == ContinuityDecision::reinitialize) {
    if (fallback == DiscontinuityFallback::reinitialize) {
      throw MustReinitialize(
          "absorb_round: fewer than two active arms carry over from previous "
          "rounds; reinitialize the registry");
    }
    mode = UpdateMode::full;
  }

  const ArmRegistry anchored = anchor_into(registry, active);
  std::vector<ArmId> added;
  for (const auto &id : active)
    if (!anchored.contains(id)) added.push_back(id);

  // Parameter order: previous non-reference arms, new arms, reference.
  ArmRegistry grown;
  grown.round = registry.round;
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
  if (fresh) {
    grown.arms = active;
    mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(active.size()));
    precision = Eigen::MatrixXd::Zero(mean.size(), mean.size());
  } else {
    const auto k = static_cast<Eigen::Index>(anchored.arms.size());
    const auto u = static_cast<Eigen::Index>(added.size());
    const Eigen::Index n = k + u;
    std::vector<Eigen::Index> position(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i + 1 < k; ++i) position[static_cast<std::size_t>(i)] = i;
    position[static_cast<std::size_t>(k - 1)] = n - 1;

    grown.arms.assign(anchored.arms.begin(), anchored.arms.end() - 1);
    grown.arms.insert(grown.arms.end(), added.begin(), added.end());
    grown.arms.push_back(anchored.reference());

    mean = Eigen::VectorXd::Zero(n);
    precision = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < k; ++i) {
      const Eigen::Index pi = position[static_cast<std::size_t>(i)];
      mean(pi) = anchored.belief.mean()(i);
      for (Eigen::Index j = 0; j < k; ++j) {
        precision(pi, position[static_cast<std::size_t>(j)]) =
            anchored.belief.precision()(i, j);
      }
    }
  }

  std::vector<std::int64_t> trials(grown.arms.size(), 0);
  std::vector<std::int64_t> successes(grown.arms.size(), 0);
  for (std::size_t a = 0; a < active.size(); ++a) {
    const std::size_t idx = *grown.index_of(active[a]);
    trials[idx] = data.trials()[a];
    successes[idx] = data.successes()[a];
  }

  const LogisticPolicyState before{Belief(std::move(mean), std::move(precision)),
                                   mode, registry.round};
  const LogisticPolicyState after =
      logistic_update(before, RoundData(std::move(trials), std::move(successes)));
  grown.belief = after.belief;
  grown.round = registry.round + 1;
  return grown;
}

std::vector<std::pair<ArmId, double>> implied_probabilities(
    const ArmRegistry &registry) {
  std::vector<std::pair<ArmId, double>> out;
  if (registry.empty()) return out;
  const Eigen::VectorXd p = probs_from_params(registry.belief.mean());
  for (std::size_t i = 0; i < registry.arms.size(); ++i) {
    out.emplace_back(registry.arms[i], p(static_cast<Eigen::Index>(i)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace orts
