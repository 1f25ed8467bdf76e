/**
 * @file continuous.hpp
 * @brief Bandit bookkeeping for experiments whose arm set changes over rounds.
 *
 * The registry holds every arm seen so far in parameter order. The last arm
 * is always the reference; odds ratios of all other arms are relative to it.
 * New arms enter as flat directions just before the reference.
 */

#ifndef ORTS_CONTINUOUS_HPP
#define ORTS_CONTINUOUS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orts/policy.hpp"

namespace orts {

using ArmId = std::string;

struct ArmRegistry {
  std::vector<ArmId> arms;
  Belief belief;
  std::int64_t round = 0;

  bool empty() const { return arms.empty(); }
  const ArmId &reference() const;
  std::optional<std::size_t> index_of(const ArmId &id) const;
  bool contains(const ArmId &id) const { return index_of(id).has_value(); }
};

enum class ContinuityDecision { continue_bandit, reinitialize };

std::string to_string(ContinuityDecision decision);

/// What to do when fewer than two active arms were seen before.
enum class DiscontinuityFallback { reinitialize, full_rank_prior };

DiscontinuityFallback parse_fallback(const std::string &name);
std::string to_string(DiscontinuityFallback fallback);

struct RoundPlan {
  std::vector<ArmId> active;
  std::vector<ArmId> observed;
  std::vector<ArmId> unobserved;
  /// Aligned with `active`.
  AllocationProportions proportions;
};

/// Number of active arms already in the registry.
std::size_t overlap(const std::vector<ArmId> &active, const ArmRegistry &registry);

ContinuityDecision check_continuity(const std::vector<ArmId> &active,
                                    const ArmRegistry &registry);

/// Moves `new_reference` to the last position and reparameterizes the belief.
ArmRegistry reanchor_reference(const ArmRegistry &registry,
                               const ArmId &new_reference);

/**
 * Allocation for the next round. New arms get 1/|A|; previously seen arms
 * share the remaining |O|/|A| by Thompson proportions computed on the
 * marginal belief over those arms. Falls back to uniform while that marginal
 * is improper.
 */
RoundPlan plan_round(const ArmRegistry &registry,
                     const std::vector<ArmId> &active, int n_draws, Rng &rng);

/// Grows the registry by the round's new arms and updates the belief with
/// the round's counts. `data` is aligned with `active`.
ArmRegistry absorb_round(
    const ArmRegistry &registry, const std::vector<ArmId> &active,
    const RoundData &data, UpdateMode mode,
    DiscontinuityFallback fallback = DiscontinuityFallback::reinitialize);

/// Per-arm success probabilities implied by the belief mean, keyed by arm.
std::vector<std::pair<ArmId, double>> implied_probabilities(
    const ArmRegistry &registry);

}  // namespace orts

#endif  // ORTS_CONTINUOUS_HPP
