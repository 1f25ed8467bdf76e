#include "orts/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

namespace orts {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown_keys(const json &obj, const std::set<std::string> &allowed,
                         const std::string &where) {
  for (const auto &item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(where + ": unknown field '" + item.key() + "'");
    }
  }
}

template <typename T>
T field(const json &obj, const std::string &key, const std::string &where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ConfigError(where + ": field '" + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json &obj, const std::string &key, T fallback,
           const std::string &where) {
  if (!obj.contains(key)) return fallback;
  return field<T>(obj, key, where);
}

Eigen::VectorXd vector_field(const json &obj, const std::string &key,
                             const std::string &where) {
  const auto values = field<std::vector<double>>(obj, key, where);
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

json to_json_vector(const Eigen::VectorXd &v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

AllocationMode parse_allocation(const std::string &name) {
  if (name == "multinomial") return AllocationMode::multinomial;
  if (name == "largest_remainder") return AllocationMode::largest_remainder;
  throw ConfigError("unknown allocation mode '" + name +
                    "' (expected multinomial or largest_remainder)");
}

std::string to_string(AllocationMode mode) {
  return mode == AllocationMode::multinomial ? "multinomial" : "largest_remainder";
}

std::vector<PolicyKind> parse_policy_list(const std::string &name) {
  if (name == "all") {
    return {PolicyKind::beta_ts, PolicyKind::full_ts, PolicyKind::or_ts};
  }
  return {parse_policy_kind(name)};
}

std::string policy_list_name(const std::vector<PolicyKind> &policies) {
  if (policies.size() == 1) return to_string(policies.front());
  return "all";
}

Eigen::VectorXd default_probabilities(Eigen::Index k) {
  Eigen::VectorXd p = Eigen::VectorXd::Constant(k, 0.30);
  p(0) = 0.31;
  return p;
}

json normalize_environment(const json &env, Eigen::Index k) {
  const std::string where = "environment";
  if (env.is_null()) {
    return {{"type", "drift"}, {"p", to_json_vector(default_probabilities(k))}};
  }
  if (!env.is_object()) throw ConfigError(where + ": must be an object");
  const auto type = field<std::string>(env, "type", where);
  if (type == "drift") {
    reject_unknown_keys(env, {"type", "p"}, where);
    return {{"type", "drift"}, {"p", to_json_vector(vector_field(env, "p", where))}};
  }
  if (type == "regime_schedule") {
    reject_unknown_keys(env, {"type", "per_round"}, where);
    json rounds = json::array();
    for (const auto &r : field<json>(env, "per_round", where)) {
      reject_unknown_keys(r, {"p", "trials"}, where + ".per_round");
      rounds.push_back({{"p", to_json_vector(vector_field(r, "p", where + ".per_round"))},
                        {"trials", field<std::int64_t>(r, "trials", where + ".per_round")}});
    }
    return {{"type", "regime_schedule"}, {"per_round", rounds}};
  }
  if (type == "two_regime") {
    reject_unknown_keys(env,
                        {"type", "base_ctr", "regime_shift", "first_block_days",
                         "second_block_days", "trials_first", "trials_second",
                         "daily_offsets"},
                        where);
    const TwoRegimeOptions defaults;
    return {{"type", "two_regime"},
            {"base_ctr", to_json_vector(vector_field(env, "base_ctr", where))},
            {"regime_shift", field_or(env, "regime_shift", defaults.regime_shift, where)},
            {"first_block_days",
             field_or(env, "first_block_days", defaults.first_block_days, where)},
            {"second_block_days",
             field_or(env, "second_block_days", defaults.second_block_days, where)},
            {"trials_first", field_or(env, "trials_first", defaults.trials_first, where)},
            {"trials_second",
             field_or(env, "trials_second", defaults.trials_second, where)},
            {"daily_offsets",
             field_or(env, "daily_offsets", std::vector<double>{}, where)}};
  }
  throw ConfigError(where + ": unknown type '" + type +
                    "' (expected drift, regime_schedule or two_regime)");
}

void write_file(const fs::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

json read_json_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

SimulateRequest parse_simulate_config(const json &input) {
  const json &doc = input.contains("config") ? input.at("config") : input;
  const std::string where = "config";
  if (!doc.is_object()) throw ConfigError("config: must be a JSON object");
  reject_unknown_keys(doc,
                      {"K", "rounds", "trials", "replications", "policy", "seed",
                       "n_draws", "d", "jobs", "allocation", "environment"},
                      where);
  SimulateRequest req;
  auto &c = req.config;
  const json env_in = doc.contains("environment") ? doc.at("environment") : json();
  Eigen::Index k_default = 10;
  if (env_in.is_object() && env_in.contains("p") && env_in.at("p").is_array())
    k_default = static_cast<Eigen::Index>(env_in.at("p").size());
  if (env_in.is_object() && env_in.contains("base_ctr") && env_in.at("base_ctr").is_array())
    k_default = static_cast<Eigen::Index>(env_in.at("base_ctr").size());
  c.arms = field_or<Eigen::Index>(doc, "K", k_default, where);
  c.rounds = field_or<std::int64_t>(doc, "rounds", c.rounds, where);
  c.trials_per_round = field_or<std::int64_t>(doc, "trials", c.trials_per_round, where);
  c.replications = field_or<std::int64_t>(doc, "replications", c.replications, where);
  req.policies =
      parse_policy_list(field_or<std::string>(doc, "policy", "all", where));
  c.policy = req.policies.front();
  c.seed = field_or<std::uint64_t>(doc, "seed", c.seed, where);
  c.n_draws = field_or<int>(doc, "n_draws", c.n_draws, where);
  c.d = field_or<double>(doc, "d", c.d, where);
  c.allocation = parse_allocation(
      field_or<std::string>(doc, "allocation", "multinomial", where));
  req.jobs = field_or<int>(doc, "jobs", 1, where);
  if (req.jobs < 1) throw ConfigError("config: field 'jobs' must be >= 1");
  validate_config(c);
  req.environment = normalize_environment(env_in, c.arms);
  return req;
}

json to_json(const SimulateRequest &req) {
  const auto &c = req.config;
  return {{"K", c.arms},
          {"rounds", c.rounds},
          {"trials", c.trials_per_round},
          {"replications", c.replications},
          {"policy", policy_list_name(req.policies)},
          {"seed", c.seed},
          {"n_draws", c.n_draws},
          {"d", c.d},
          {"jobs", req.jobs},
          {"allocation", to_string(c.allocation)},
          {"environment", req.environment}};
}

EnvironmentSpec resolve_environment(const SimulateRequest &req) {
  const json &env = req.environment;
  const auto type = env.at("type").get<std::string>();
  EnvironmentSpec spec;
  try {
    if (type == "drift") {
      spec = make_drift_environment(vector_field(env, "p", "environment"), req.config.d);
    } else if (type == "regime_schedule") {
      RegimeSchedule schedule;
      for (const auto &r : env.at("per_round")) {
        schedule.per_round.push_back(
            {vector_field(r, "p", "environment.per_round"), r.at("trials").get<std::int64_t>()});
      }
      spec = schedule;
    } else {
      TwoRegimeOptions o;
      o.base_ctr = vector_field(env, "base_ctr", "environment");
      o.regime_shift = env.at("regime_shift").get<double>();
      o.first_block_days = env.at("first_block_days").get<int>();
      o.second_block_days = env.at("second_block_days").get<int>();
      o.trials_first = env.at("trials_first").get<std::int64_t>();
      o.trials_second = env.at("trials_second").get<std::int64_t>();
      o.daily_offsets = env.at("daily_offsets").get<std::vector<double>>();
      spec = make_two_regime_schedule(o);
    }
    validate_environment(spec);
  } catch (const InvalidEnvironment &e) {
    throw ConfigError(std::string("environment: ") + e.what());
  }
  if (environment_arms(spec) != req.config.arms) {
    throw ConfigError("environment: has " + std::to_string(environment_arms(spec)) +
                      " arms but field 'K' is " + std::to_string(req.config.arms));
  }
  if (const auto *s = std::get_if<RegimeSchedule>(&spec)) {
    if (req.config.rounds > static_cast<std::int64_t>(s->per_round.size())) {
      throw ConfigError("config: field 'rounds' (" + std::to_string(req.config.rounds) +
                        ") exceeds the schedule length (" +
                        std::to_string(s->per_round.size()) + ")");
    }
  }
  return spec;
}

ContinuousScenario parse_scenario(const json &input) {
  const json &doc = input.contains("scenario") ? input.at("scenario") : input;
  const std::string where = "scenario";
  if (!doc.is_object()) throw ConfigError("scenario: must be a JSON object");
  reject_unknown_keys(doc,
                      {"mode", "fallback", "seed", "n_draws", "allocation", "p",
                       "rounds"},
                      where);
  ContinuousScenario s;
  s.mode = parse_update_mode(field_or<std::string>(doc, "mode", "odds_ratio", where));
  s.fallback =
      parse_fallback(field_or<std::string>(doc, "fallback", "reinitialize", where));
  s.seed = field_or<std::uint64_t>(doc, "seed", 0, where);
  s.n_draws = field_or<int>(doc, "n_draws", kDefaultDraws, where);
  if (s.n_draws < 1) throw ConfigError("scenario: field 'n_draws' must be >= 1");
  s.allocation = parse_allocation(
      field_or<std::string>(doc, "allocation", "multinomial", where));
  const auto shared_p =
      field_or<std::map<std::string, double>>(doc, "p", {}, where);
  const auto rounds = field<json>(doc, "rounds", where);
  if (!rounds.is_array() || rounds.empty())
    throw ConfigError("scenario: field 'rounds' must be a non-empty array");
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const std::string rw = "scenario.rounds[" + std::to_string(i) + "]";
    reject_unknown_keys(rounds[i], {"active", "trials", "p"}, rw);
    ScenarioRound r;
    r.active = field<std::vector<std::string>>(rounds[i], "active", rw);
    if (r.active.empty()) throw ConfigError(rw + ": field 'active' is empty");
    std::set<std::string> unique(r.active.begin(), r.active.end());
    if (unique.size() != r.active.size())
      throw ConfigError(rw + ": field 'active' lists an arm twice");
    r.trials = field<std::int64_t>(rounds[i], "trials", rw);
    if (r.trials < 0) throw ConfigError(rw + ": field 'trials' must be >= 0");
    // Round entries override the shared map.
    r.true_p = field_or<std::map<std::string, double>>(rounds[i], "p", {}, rw);
    r.true_p.insert(shared_p.begin(), shared_p.end());
    for (const auto &id : r.active) {
      const auto it = r.true_p.find(id);
      if (it == r.true_p.end())
        throw ConfigError(rw + ": no probability for arm '" + id + "'");
      if (!(it->second >= 0.0 && it->second <= 1.0))
        throw ConfigError(rw + ": probability of arm '" + id + "' is outside [0, 1]");
    }
    s.rounds.push_back(std::move(r));
  }
  return s;
}

json to_json(const ContinuousScenario &s) {
  json rounds = json::array();
  for (const auto &r : s.rounds) {
    json p = json::object();
    for (const auto &id : r.active) p[id] = r.true_p.at(id);
    rounds.push_back({{"active", r.active}, {"trials", r.trials}, {"p", p}});
  }
  return {{"mode", to_string(s.mode)},
          {"fallback", to_string(s.fallback)},
          {"seed", s.seed},
          {"n_draws", s.n_draws},
          {"allocation", to_string(s.allocation)},
          {"rounds", rounds}};
}

void write_regret_csv(const fs::path &path,
                      const std::vector<ReplicationTable> &tables) {
  std::ostringstream out;
  out << "policy,replication,round,regret,cumulative_regret,expected_clicks\n";
  for (const auto &table : tables) {
    for (std::size_t r = 0; r < table.runs.size(); ++r) {
      double cum = 0.0;
      for (const auto &rec : table.runs[r]) {
        cum += rec.regret;
        out << to_string(table.policy) << ',' << r << ',' << rec.round << ','
            << format_number(rec.regret) << ',' << format_number(cum) << ','
            << format_number(rec.expected_clicks) << '\n';
      }
    }
  }
  write_file(path, out.str());
}

void write_summary_csv(const fs::path &path,
                       const std::vector<ReplicationTable> &tables) {
  std::ostringstream out;
  out << "policy,round,mean_cum_regret,stderr_cum_regret\n";
  for (const auto &table : tables) {
    for (const auto &row : table.summary) {
      out << to_string(table.policy) << ',' << row.round << ','
          << format_number(row.mean_cum_regret) << ','
          << format_number(row.stderr_cum_regret) << '\n';
    }
  }
  write_file(path, out.str());
}

void write_rounds_csv(const fs::path &path, const ContinuousRun &run) {
  std::ostringstream out;
  out << "round,arm_id,proportion,allocated,successes,true_p\n";
  for (const auto &rec : run.rounds) {
    for (std::size_t i = 0; i < rec.plan.active.size(); ++i) {
      out << rec.round << ',' << rec.plan.active[i] << ','
          << format_number(rec.plan.proportions(static_cast<Eigen::Index>(i))) << ','
          << rec.allocated[i] << ',' << rec.successes[i] << ','
          << format_number(rec.true_p[i]) << '\n';
    }
  }
  write_file(path, out.str());
}

void write_continuity_csv(const fs::path &path, const ContinuousRun &run) {
  std::ostringstream out;
  out << "round,decision,overlap\n";
  for (const auto &rec : run.rounds) {
    out << rec.round << ',' << to_string(rec.decision) << ',' << rec.overlap << '\n';
  }
  write_file(path, out.str());
}

namespace {

struct SimulateFlags {
  std::string config;
  std::optional<std::string> policy;
  std::optional<std::int64_t> rounds, trials, replications;
  std::optional<double> d;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_draws, jobs;
  std::string out = ".";
};

struct ContinuousFlags {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_draws;
  std::string out = ".";
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void write_manifest(const fs::path &path, const std::string &kind,
                    const json &config, const json &environment,
                    std::uint64_t seed, double duration) {
  json manifest = {{"command", kind},
                   {kind == "simulate" ? "config" : "scenario", config},
                   {"environment", environment},
                   {"seed", seed},
                   {"version", kVersion},
                   {"duration_seconds", duration}};
  write_file(path, manifest.dump(2) + "\n");
}

json describe_environment(const EnvironmentSpec &spec) {
  if (const auto *s = std::get_if<Stationary>(&spec)) {
    return {{"variant", "stationary"}, {"p", to_json_vector(s->p)}};
  }
  if (const auto *d = std::get_if<LogitDrift>(&spec)) {
    return {{"variant", "logit_drift"},
            {"base_beta", to_json_vector(d->base_beta)},
            {"sigma", d->sigma}};
  }
  json rounds = json::array();
  for (const auto &r : std::get<RegimeSchedule>(spec).per_round) {
    rounds.push_back({{"p", to_json_vector(r.p)}, {"trials", r.trials}});
  }
  return {{"variant", "regime_schedule"}, {"per_round", rounds}};
}

int simulate(const SimulateFlags &flags, std::ostream &out) {
  const auto start = std::chrono::steady_clock::now();
  SimulateRequest req;
  {
    json doc = read_json_file(flags.config);
    json &cfg = doc.contains("config") ? doc["config"] : doc;
    if (!cfg.is_object()) throw ConfigError("config: must be a JSON object");
    if (flags.policy) cfg["policy"] = *flags.policy;
    if (flags.rounds) cfg["rounds"] = *flags.rounds;
    if (flags.trials) cfg["trials"] = *flags.trials;
    if (flags.replications) cfg["replications"] = *flags.replications;
    if (flags.d) cfg["d"] = *flags.d;
    if (flags.seed) cfg["seed"] = *flags.seed;
    if (flags.n_draws) cfg["n_draws"] = *flags.n_draws;
    if (flags.jobs) cfg["jobs"] = *flags.jobs;
    req = parse_simulate_config(cfg);
  }
  const EnvironmentSpec spec = resolve_environment(req);

  std::vector<ReplicationTable> tables;
  for (const auto policy : req.policies) {
    ExperimentConfig config = req.config;
    config.policy = policy;
    tables.push_back(run_replications(config, spec, req.jobs));
  }

  const fs::path dir(flags.out);
  fs::create_directories(dir);
  write_regret_csv(dir / "regret.csv", tables);
  write_summary_csv(dir / "summary.csv", tables);
  write_manifest(dir / "manifest.json", "simulate", to_json(req),
                 describe_environment(spec), req.config.seed, seconds_since(start));
  for (const auto &t : tables) {
    out << to_string(t.policy) << ": mean cumulative regret after round "
        << t.summary.back().round << " = "
        << format_number(t.summary.back().mean_cum_regret) << "\n";
  }
  return 0;
}

int continuous(const ContinuousFlags &flags, std::ostream &out) {
  const auto start = std::chrono::steady_clock::now();
  json doc = read_json_file(flags.scenario);
  json &sc = doc.contains("scenario") ? doc["scenario"] : doc;
  if (!sc.is_object()) throw ConfigError("scenario: must be a JSON object");
  if (flags.seed) sc["seed"] = *flags.seed;
  if (flags.n_draws) sc["n_draws"] = *flags.n_draws;
  const ContinuousScenario scenario = parse_scenario(sc);
  const ContinuousRun run = run_continuous_scenario(scenario);

  const fs::path dir(flags.out);
  fs::create_directories(dir);
  write_rounds_csv(dir / "rounds.csv", run);
  write_continuity_csv(dir / "continuity.csv", run);
  write_manifest(dir / "manifest.json", "continuous", to_json(scenario), json(),
                 scenario.seed, seconds_since(start));
  for (const auto &rec : run.rounds) {
    out << "round " << rec.round << ": " << to_string(rec.decision) << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out,
            std::ostream &err) {
  CLI::App app{"Batch Thompson sampling simulations for binary rewards", "orts"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SimulateFlags sim;
  auto *simulate_cmd =
      app.add_subcommand("simulate", "Run policy comparisons over replications");
  simulate_cmd->add_option("--config", sim.config, "JSON config or manifest")
      ->required();
  simulate_cmd->add_option("--policy", sim.policy, "beta_ts|full_ts|or_ts|all");
  simulate_cmd->add_option("--rounds", sim.rounds);
  simulate_cmd->add_option("--trials", sim.trials, "Trials per round");
  simulate_cmd->add_option("--replications", sim.replications);
  simulate_cmd->add_option("--d", sim.d, "Drift level relative to the arm gap");
  simulate_cmd->add_option("--seed", sim.seed);
  simulate_cmd->add_option("--n-draws", sim.n_draws, "Monte Carlo draws per allocation");
  simulate_cmd->add_option("--jobs", sim.jobs, "Replications run in parallel");
  simulate_cmd->add_option("--out", sim.out, "Output directory");

  ContinuousFlags cont;
  auto *continuous_cmd =
      app.add_subcommand("continuous", "Run a continuous-experiment scenario");
  continuous_cmd->add_option("--scenario", cont.scenario, "JSON scenario or manifest")
      ->required();
  continuous_cmd->add_option("--seed", cont.seed);
  continuous_cmd->add_option("--n-draws", cont.n_draws);
  continuous_cmd->add_option("--out", cont.out, "Output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForVersion &) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::Success &) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "orts: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*simulate_cmd) return simulate(sim, out);
    return continuous(cont, out);
  } catch (const ConfigError &e) {
    err << "orts: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    err << "orts: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace orts
