/**
 * @file simulation.hpp
 * @brief Environments and the round loop used to compare bandit policies.
 *
 * Every random quantity is drawn from one of four per-replication streams
 * (environment, allocation, reward, policy) derived from the run seed, so
 * policies run on the same seed see the same background shifts.
 */

#ifndef ORTS_SIMULATION_HPP
#define ORTS_SIMULATION_HPP

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "orts/continuous.hpp"
#include "orts/policy.hpp"

namespace orts {

struct Stationary {
  Eigen::VectorXd p;
};

/// Arm logits shifted each round by a common N(0, sigma^2) offset.
struct LogitDrift {
  Eigen::VectorXd base_beta;
  double sigma = 0.0;
};

struct ScheduledRound {
  Eigen::VectorXd p;
  std::int64_t trials = 0;
};

struct RegimeSchedule {
  std::vector<ScheduledRound> per_round;
};

using EnvironmentSpec = std::variant<Stationary, LogitDrift, RegimeSchedule>;

/// Throws InvalidEnvironment when probabilities leave [0, 1] or sigma < 0.
void validate_environment(const EnvironmentSpec &spec);
Eigen::Index environment_arms(const EnvironmentSpec &spec);

/// sigma = d * (logit(p_opt) - logit(p_sub)).
double sigma_from_d(double d, double p_opt, double p_sub);

/// Stationary when d == 0, otherwise logit drift calibrated from the gap
/// between the best and second-best arm.
EnvironmentSpec make_drift_environment(const Eigen::VectorXd &p, double d);

Eigen::VectorXd drift_probabilities(const Eigen::VectorXd &base_beta,
                                    double delta);

/// True success probabilities for a round (1-based).
Eigen::VectorXd env_step(const EnvironmentSpec &spec, std::int64_t round,
                         Rng &rng);

struct TwoRegimeOptions {
  Eigen::VectorXd base_ctr;
  /// Common logit shift applied from the first day of the second block.
  double regime_shift = -1.0;
  int first_block_days = 10;
  int second_block_days = 8;
  std::int64_t trials_first = 20000;
  std::int64_t trials_second = 20000;
  /// Optional per-day common logit offsets (minor daily effects).
  std::vector<double> daily_offsets;
};

RegimeSchedule make_two_regime_schedule(const TwoRegimeOptions &options);

enum class AllocationMode { multinomial, largest_remainder };

std::vector<std::int64_t> allocate_trials(
    const AllocationProportions &proportions, std::int64_t total, Rng &rng,
    AllocationMode mode = AllocationMode::multinomial);

std::vector<std::int64_t> draw_rewards(const std::vector<std::int64_t> &allocated,
                                       const Eigen::VectorXd &true_p, Rng &rng);

struct ExperimentConfig {
  Eigen::Index arms = 10;
  std::int64_t rounds = 50;
  std::int64_t trials_per_round = 10000;
  std::int64_t replications = 1;
  PolicyKind policy = PolicyKind::or_ts;
  std::uint64_t seed = 0;
  int n_draws = kDefaultDraws;
  double d = 0.0;
  AllocationMode allocation = AllocationMode::multinomial;
};

void validate_config(const ExperimentConfig &config);

struct RoundRecord {
  std::int64_t round = 0;
  AllocationProportions proportions;
  std::vector<std::int64_t> allocated;
  std::vector<std::int64_t> successes;
  Eigen::VectorXd true_p;
  double regret = 0.0;
  double expected_clicks = 0.0;
};

enum class Stream : std::uint64_t { environment = 1, allocation, reward, policy };

Rng make_stream(std::uint64_t seed, Stream stream);

/// One replication with config.seed. Errors are rethrown with the round.
std::vector<RoundRecord> run_experiment(const ExperimentConfig &config,
                                        const EnvironmentSpec &spec);

struct SummaryRow {
  std::int64_t round = 0;
  double mean_cum_regret = 0.0;
  double stderr_cum_regret = 0.0;
  double mean_expected_clicks = 0.0;
};

struct ReplicationTable {
  PolicyKind policy = PolicyKind::or_ts;
  /// Indexed by replication; replication r ran with seed config.seed + r.
  std::vector<std::vector<RoundRecord>> runs;
  std::vector<SummaryRow> summary;
};

ReplicationTable run_replications(const ExperimentConfig &config,
                                  const EnvironmentSpec &spec, int jobs = 1);

/// Cumulative regret after the last round of one replication.
double final_cumulative_regret(const std::vector<RoundRecord> &records);
double total_expected_clicks(const std::vector<RoundRecord> &records);

// Continuous experiments driven by a scripted arm schedule.

struct ScenarioRound {
  std::vector<ArmId> active;
  std::int64_t trials = 0;
  std::map<ArmId, double> true_p;
};

struct ContinuousScenario {
  UpdateMode mode = UpdateMode::odds_ratio;
  DiscontinuityFallback fallback = DiscontinuityFallback::reinitialize;
  std::uint64_t seed = 0;
  int n_draws = kDefaultDraws;
  AllocationMode allocation = AllocationMode::multinomial;
  std::vector<ScenarioRound> rounds;
};

struct ContinuousRoundRecord {
  std::int64_t round = 0;
  ContinuityDecision decision = ContinuityDecision::reinitialize;
  std::size_t overlap = 0;
  RoundPlan plan;
  std::vector<std::int64_t> allocated;
  std::vector<std::int64_t> successes;
  std::vector<double> true_p;
};

struct ContinuousRun {
  std::vector<ContinuousRoundRecord> rounds;
  ArmRegistry registry;
};

ContinuousRun run_continuous_scenario(const ContinuousScenario &scenario);

}  // namespace orts

#endif  // ORTS_SIMULATION_HPP
