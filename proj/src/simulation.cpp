#include "orts/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace orts {

namespace {

void check_probabilities(const Eigen::VectorXd &p, const std::string &what) {
  if (p.size() == 0) throw InvalidEnvironment(what + ": no arms");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p(i) >= 0.0 && p(i) <= 1.0)) {
      throw InvalidEnvironment(what + ": probability " + std::to_string(p(i)) +
                               " of arm " + std::to_string(i) +
                               " is outside [0, 1]");
    }
  }
}

}  // namespace

void validate_environment(const EnvironmentSpec &spec) {
  if (const auto *s = std::get_if<Stationary>(&spec)) {
    check_probabilities(s->p, "stationary environment");
  } else if (const auto *d = std::get_if<LogitDrift>(&spec)) {
    if (d->base_beta.size() == 0) throw InvalidEnvironment("logit drift: no arms");
    if (!(d->sigma >= 0.0)) throw InvalidEnvironment("logit drift: sigma < 0");
    if (!d->base_beta.allFinite())
      throw InvalidEnvironment("logit drift: non-finite base logit");
  } else {
    const auto &r = std::get<RegimeSchedule>(spec);
    if (r.per_round.empty()) throw InvalidEnvironment("regime schedule is empty");
    const Eigen::Index k = r.per_round.front().p.size();
    for (const auto &round : r.per_round) {
      check_probabilities(round.p, "regime schedule");
      if (round.p.size() != k)
        throw InvalidEnvironment("regime schedule: arm count changes between rounds");
      if (round.trials < 0)
        throw InvalidEnvironment("regime schedule: negative trial count");
    }
  }
}

Eigen::Index environment_arms(const EnvironmentSpec &spec) {
  if (const auto *s = std::get_if<Stationary>(&spec)) return s->p.size();
  if (const auto *d = std::get_if<LogitDrift>(&spec)) return d->base_beta.size();
  const auto &r = std::get<RegimeSchedule>(spec);
  return r.per_round.empty() ? 0 : r.per_round.front().p.size();
}

double sigma_from_d(double d, double p_opt, double p_sub) {
  if (!(0.0 < p_sub && p_sub < p_opt && p_opt < 1.0)) {
    throw InvalidEnvironment("sigma_from_d: need 0 < p_sub < p_opt < 1, got p_sub=" +
                             std::to_string(p_sub) +
                             ", p_opt=" + std::to_string(p_opt));
  }
  if (d < 0.0) throw InvalidEnvironment("sigma_from_d: d must be >= 0");
  return d * (logit(p_opt) - logit(p_sub));
}

EnvironmentSpec make_drift_environment(const Eigen::VectorXd &p, double d) {
  check_probabilities(p, "drift environment");
  if (d < 0.0) throw InvalidEnvironment("d must be >= 0");
  if (d == 0.0) return Stationary{p};
  const double best = p.maxCoeff();
  double second = -1.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) < best) second = std::max(second, p(i));
  if (second < 0.0) {
    throw InvalidEnvironment("d > 0 needs at least two distinct arm probabilities");
  }
  return LogitDrift{p.unaryExpr([](double v) { return logit(v); }),
                    sigma_from_d(d, best, second)};
}

Eigen::VectorXd drift_probabilities(const Eigen::VectorXd &base_beta,
                                    double delta) {
  return base_beta.unaryExpr([delta](double b) { return sigmoid(b + delta); });
}

Eigen::VectorXd env_step(const EnvironmentSpec &spec, std::int64_t round,
                         Rng &rng) {
  if (round < 1) throw InvalidRound("env_step: rounds are 1-based");
  if (const auto *s = std::get_if<Stationary>(&spec)) return s->p;
  if (const auto *d = std::get_if<LogitDrift>(&spec)) {
    std::normal_distribution<double> normal;
    return drift_probabilities(d->base_beta, d->sigma * normal(rng));
  }
  const auto &r = std::get<RegimeSchedule>(spec);
  if (round > static_cast<std::int64_t>(r.per_round.size())) {
    throw InvalidRound("env_step: round " + std::to_string(round) +
                       " is beyond the schedule (" +
                       std::to_string(r.per_round.size()) + " rounds)");
  }
  return r.per_round[static_cast<std::size_t>(round - 1)].p;
}

RegimeSchedule make_two_regime_schedule(const TwoRegimeOptions &options) {
  check_probabilities(options.base_ctr, "two-regime schedule");
  const int days = options.first_block_days + options.second_block_days;
  if (options.first_block_days < 1 || options.second_block_days < 1) {
    throw InvalidEnvironment("two-regime schedule: each block needs >= 1 day");
  }
  if (!options.daily_offsets.empty() &&
      static_cast<int>(options.daily_offsets.size()) != days) {
    throw InvalidEnvironment("two-regime schedule: daily_offsets must have one "
                             "entry per day");
  }
  const Eigen::VectorXd base =
      options.base_ctr.unaryExpr([](double v) { return logit(v); });
  RegimeSchedule schedule;
  for (int day = 0; day < days; ++day) {
    const bool second = day >= options.first_block_days;
    double shift = second ? options.regime_shift : 0.0;
    if (!options.daily_offsets.empty())
      shift += options.daily_offsets[static_cast<std::size_t>(day)];
    schedule.per_round.push_back(
        {drift_probabilities(base, shift),
         second ? options.trials_second : options.trials_first});
  }
  return schedule;
}

std::vector<std::int64_t> allocate_trials(
    const AllocationProportions &proportions, std::int64_t total, Rng &rng,
    AllocationMode mode) {
  const auto k = static_cast<std::size_t>(proportions.size());
  std::vector<std::int64_t> out(k, 0);
  if (k == 0 || total <= 0) return out;
  if ((proportions.array() < 0.0).any() ||
      std::abs(proportions.sum() - 1.0) > 1e-9) {
    throw InvalidDimension("allocate_trials: proportions are not a simplex");
  }

  if (mode == AllocationMode::largest_remainder) {
    std::vector<double> remainder(k);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const double exact =
          proportions(static_cast<Eigen::Index>(i)) * static_cast<double>(total);
      out[i] = static_cast<std::int64_t>(std::floor(exact));
      remainder[i] = exact - static_cast<double>(out[i]);
      assigned += out[i];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return remainder[a] > remainder[b];
    });
    for (std::size_t j = 0; assigned < total; ++j, ++assigned) ++out[order[j % k]];
    return out;
  }

  // Multinomial via conditional binomials; the last arm with positive share
  // takes what is left so the total is exact.
  std::size_t last = 0;
  for (std::size_t i = 0; i < k; ++i)
    if (proportions(static_cast<Eigen::Index>(i)) > 0.0) last = i;
  std::int64_t remaining = total;
  double mass = 1.0;
  for (std::size_t i = 0; i < last && remaining > 0; ++i) {
    const double p = proportions(static_cast<Eigen::Index>(i));
    if (p <= 0.0) continue;
    const double q = mass > 0.0 ? std::min(1.0, p / mass) : 1.0;
    std::binomial_distribution<std::int64_t> binom(remaining, q);
    out[i] = binom(rng);
    remaining -= out[i];
    mass -= p;
  }
  out[last] += remaining;
  return out;
}

std::vector<std::int64_t> draw_rewards(const std::vector<std::int64_t> &allocated,
                                       const Eigen::VectorXd &true_p, Rng &rng) {
  if (allocated.size() != static_cast<std::size_t>(true_p.size())) {
    throw InvalidDimension("draw_rewards: allocation/probability length mismatch");
  }
  std::vector<std::int64_t> out(allocated.size(), 0);
  for (std::size_t i = 0; i < allocated.size(); ++i) {
    const double p = true_p(static_cast<Eigen::Index>(i));
    if (allocated[i] <= 0 || p <= 0.0) continue;
    if (p >= 1.0) {
      out[i] = allocated[i];
      continue;
    }
    std::binomial_distribution<std::int64_t> binom(allocated[i], p);
    out[i] = binom(rng);
  }
  return out;
}

void validate_config(const ExperimentConfig &config) {
  if (config.arms < 1) throw ConfigError("K must be >= 1");
  if (config.rounds < 1) throw ConfigError("rounds must be >= 1");
  if (config.trials_per_round < 1) throw ConfigError("trials must be >= 1");
  if (config.replications < 1) throw ConfigError("replications must be >= 1");
  if (config.n_draws < 1) throw ConfigError("n_draws must be >= 1");
  if (!(config.d >= 0.0)) throw ConfigError("d must be >= 0");
}

Rng make_stream(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

std::vector<RoundRecord> run_experiment(const ExperimentConfig &config,
                                        const EnvironmentSpec &spec) {
  validate_config(config);
  validate_environment(spec);
  if (environment_arms(spec) != config.arms) {
    throw ConfigError("environment has " + std::to_string(environment_arms(spec)) +
                      " arms but K = " + std::to_string(config.arms));
  }
  const auto *schedule = std::get_if<RegimeSchedule>(&spec);
  if (schedule && config.rounds > static_cast<std::int64_t>(schedule->per_round.size())) {
    throw ConfigError("rounds exceeds the regime schedule length");
  }

  Rng env_rng = make_stream(config.seed, Stream::environment);
  Rng alloc_rng = make_stream(config.seed, Stream::allocation);
  Rng reward_rng = make_stream(config.seed, Stream::reward);
  Rng policy_rng = make_stream(config.seed, Stream::policy);

  Policy policy(config.policy, config.arms, config.n_draws);
  std::vector<RoundRecord> records;
  records.reserve(static_cast<std::size_t>(config.rounds));
  for (std::int64_t t = 1; t <= config.rounds; ++t) {
    try {
      RoundRecord rec;
      rec.round = t;
      rec.proportions = policy.proportions(policy_rng);
      const std::int64_t total =
          schedule ? schedule->per_round[static_cast<std::size_t>(t - 1)].trials
                   : config.trials_per_round;
      rec.allocated = allocate_trials(rec.proportions, total, alloc_rng,
                                      config.allocation);
      rec.true_p = env_step(spec, t, env_rng);
      rec.successes = draw_rewards(rec.allocated, rec.true_p, reward_rng);
      const double best = rec.true_p.maxCoeff();
      for (std::size_t i = 0; i < rec.allocated.size(); ++i) {
        const double n = static_cast<double>(rec.allocated[i]);
        const double p = rec.true_p(static_cast<Eigen::Index>(i));
        rec.regret += n * (best - p);
        rec.expected_clicks += n * p;
      }
      policy.update(RoundData(rec.allocated, rec.successes));
      records.push_back(std::move(rec));
    } catch (const std::exception &e) {
      throw Error("policy " + to_string(config.policy) + ", round " +
                  std::to_string(t) + ": " + e.what());
    }
  }
  return records;
}

double final_cumulative_regret(const std::vector<RoundRecord> &records) {
  double total = 0.0;
  for (const auto &r : records) total += r.regret;
  return total;
}

double total_expected_clicks(const std::vector<RoundRecord> &records) {
  double total = 0.0;
  for (const auto &r : records) total += r.expected_clicks;
  return total;
}

ReplicationTable run_replications(const ExperimentConfig &config,
                                  const EnvironmentSpec &spec, int jobs) {
  validate_config(config);
  const auto reps = static_cast<std::size_t>(config.replications);
  ReplicationTable table;
  table.policy = config.policy;
  table.runs.resize(reps);
  std::vector<std::exception_ptr> errors(reps);

  auto run_one = [&](std::size_t r) {
    try {
      ExperimentConfig local = config;
      local.seed = config.seed + r;
      table.runs[r] = run_experiment(local, spec);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };

  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, reps);
  if (workers == 1) {
    for (std::size_t r = 0; r < reps; ++r) run_one(r);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < reps; r += workers) run_one(r);
      });
    }
    for (auto &t : pool) t.join();
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  const auto rounds = table.runs.front().size();
  for (std::size_t t = 0; t < rounds; ++t) {
    double sum = 0.0, sum_sq = 0.0, clicks = 0.0;
    for (const auto &run : table.runs) {
      double cum = 0.0;
      for (std::size_t s = 0; s <= t; ++s) cum += run[s].regret;
      sum += cum;
      sum_sq += cum * cum;
      clicks += run[t].expected_clicks;
    }
    const double n = static_cast<double>(reps);
    SummaryRow row;
    row.round = static_cast<std::int64_t>(t + 1);
    row.mean_cum_regret = sum / n;
    if (reps > 1) {
      const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
      row.stderr_cum_regret = std::sqrt(var / n);
    }
    row.mean_expected_clicks = clicks / n;
    table.summary.push_back(row);
  }
  return table;
}

ContinuousRun run_continuous_scenario(const ContinuousScenario &scenario) {
  if (scenario.rounds.empty()) throw InvalidRound("scenario has no rounds");
  Rng alloc_rng = make_stream(scenario.seed, Stream::allocation);
  Rng reward_rng = make_stream(scenario.seed, Stream::reward);
  Rng policy_rng = make_stream(scenario.seed, Stream::policy);

  ContinuousRun run;
  std::int64_t t = 0;
  for (const auto &round : scenario.rounds) {
    ++t;
    ContinuousRoundRecord rec;
    rec.round = t;
    rec.decision = check_continuity(round.active, run.registry);
    rec.overlap = overlap(round.active, run.registry);
    if (rec.decision == ContinuityDecision::reinitialize &&
        scenario.fallback == DiscontinuityFallback::reinitialize) {
      run.registry = ArmRegistry{};
    }
    Eigen::VectorXd p(static_cast<Eigen::Index>(round.active.size()));
    for (std::size_t i = 0; i < round.active.size(); ++i) {
      const auto it = round.true_p.find(round.active[i]);
      if (it == round.true_p.end()) {
        throw InvalidRound("round " + std::to_string(t) + ": no probability for arm '" +
                           round.active[i] + "'");
      }
      p(static_cast<Eigen::Index>(i)) = it->second;
      rec.true_p.push_back(it->second);
    }
    check_probabilities(p, "scenario round " + std::to_string(t));

    rec.plan = plan_round(run.registry, round.active, scenario.n_draws, policy_rng);
    rec.allocated = allocate_trials(rec.plan.proportions, round.trials, alloc_rng,
                                    scenario.allocation);
    rec.successes = draw_rewards(rec.allocated, p, reward_rng);
    run.registry = absorb_round(run.registry, round.active,
                                RoundData(rec.allocated, rec.successes),
                                scenario.mode, scenario.fallback);
    run.rounds.push_back(std::move(rec));
  }
  return run;
}

}  // namespace orts
