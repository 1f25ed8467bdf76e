#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifdef __unix__
#include <sys/wait.h>
#endif

#include "orts/cli.hpp"

using namespace orts;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("orts_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path &p, const std::string &text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::vector<std::string> lines_of(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

int run(const std::vector<std::string> &args, std::string *err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

const char *kMinimal = R"({"K": 2, "rounds": 3, "trials": 100, "replications": 1,
  "policy": "beta_ts", "seed": 7})";

const char *kScenario = R"({
  "mode": "odds_ratio", "seed": 11, "n_draws": 2000,
  "p": {"A": 0.35, "B": 0.30, "C": 0.30, "D": 0.25, "E": 0.2},
  "rounds": [
    {"active": ["A", "B", "C"], "trials": 1000},
    {"active": ["B", "C", "D"], "trials": 1000},
    {"active": ["D", "E", "F"], "trials": 1000, "p": {"F": 0.4}}
  ]})";

}  // namespace

TEST_CASE("simulate writes one regret row per round") {
  TempDir tmp;
  spit(tmp.path / "cfg.json", kMinimal);
  REQUIRE(run({"simulate", "--config", (tmp.path / "cfg.json").string(), "--out",
               (tmp.path / "out").string()}) == 0);
  const auto regret = lines_of(slurp(tmp.path / "out" / "regret.csv"));
  REQUIRE(regret.size() == 4);
  CHECK(regret[0] == "policy,replication,round,regret,cumulative_regret,expected_clicks");
  CHECK(regret[1].rfind("beta_ts,0,1,", 0) == 0);
  const auto summary = lines_of(slurp(tmp.path / "out" / "summary.csv"));
  CHECK(summary[0] == "policy,round,mean_cum_regret,stderr_cum_regret");
  CHECK(summary.size() == 4);
  CHECK(fs::exists(tmp.path / "out" / "manifest.json"));
}

TEST_CASE("--policy all runs three policies") {
  TempDir tmp;
  spit(tmp.path / "cfg.json", kMinimal);
  REQUIRE(run({"simulate", "--config", (tmp.path / "cfg.json").string(), "--policy", "all",
               "--rounds", "4", "--n-draws", "500", "--out", (tmp.path / "out").string()}) == 0);
  const auto summary = lines_of(slurp(tmp.path / "out" / "summary.csv"));
  CHECK(summary.size() == 1 + 3 * 4);
  int beta = 0, full = 0, odds = 0;
  for (std::size_t i = 1; i < summary.size(); ++i) {
    beta += summary[i].rfind("beta_ts,", 0) == 0;
    full += summary[i].rfind("full_ts,", 0) == 0;
    odds += summary[i].rfind("or_ts,", 0) == 0;
  }
  CHECK(beta == 4);
  CHECK(full == 4);
  CHECK(odds == 4);
}

TEST_CASE("rerunning a manifest reproduces the CSVs byte for byte") {
  TempDir tmp;
  spit(tmp.path / "cfg.json", R"({"K": 4, "rounds": 5, "trials": 2000, "replications": 3,
    "policy": "all", "seed": 3, "n_draws": 1000, "d": 20})");
  const fs::path first = tmp.path / "first", second = tmp.path / "second";
  REQUIRE(run({"simulate", "--config", (tmp.path / "cfg.json").string(), "--out", first.string()}) == 0);
  REQUIRE(run({"simulate", "--config", (first / "manifest.json").string(), "--jobs", "2",
               "--out", second.string()}) == 0);
  CHECK(slurp(first / "regret.csv") == slurp(second / "regret.csv"));
  CHECK(slurp(first / "summary.csv") == slurp(second / "summary.csv"));

  const std::string manifest = slurp(first / "manifest.json");
  for (const char *key : {"\"config\"", "\"environment\"", "\"seed\"", "\"version\"",
                          "\"duration_seconds\""})
    CHECK(manifest.find(key) != std::string::npos);
}

TEST_CASE("CSV output is LF-terminated with plain decimals") {
  TempDir tmp;
  spit(tmp.path / "cfg.json", kMinimal);
  REQUIRE(run({"simulate", "--config", (tmp.path / "cfg.json").string(), "--trials", "123456",
               "--out", (tmp.path / "out").string()}) == 0);
  for (const char *name : {"regret.csv", "summary.csv"}) {
    const std::string text = slurp(tmp.path / "out" / name);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.back() == '\n');
    for (const auto &line : lines_of(text)) {
      std::size_t commas = 0;
      for (char ch : line) commas += ch == ',';
      CHECK(commas == (std::string(name) == "regret.csv" ? 5u : 3u));
    }
  }
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1234567.0) == "1234567");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333");
}

TEST_CASE("continuous scenario") {
  TempDir tmp;
  spit(tmp.path / "sc.json", kScenario);
  const fs::path out = tmp.path / "out";
  REQUIRE(run({"continuous", "--scenario", (tmp.path / "sc.json").string(), "--out", out.string()}) == 0);

  const auto continuity = lines_of(slurp(out / "continuity.csv"));
  REQUIRE(continuity.size() == 4);
  CHECK(continuity[0] == "round,decision,overlap");
  CHECK(continuity[1] == "1,reinitialize,0");
  CHECK(continuity[2] == "2,continue_bandit,2");
  CHECK(continuity[3] == "3,reinitialize,1");

  const auto rounds = lines_of(slurp(out / "rounds.csv"));
  CHECK(rounds[0] == "round,arm_id,proportion,allocated,successes,true_p");
  REQUIRE(rounds.size() == 1 + 9);
  CHECK(rounds[1].rfind("1,A,0.3333333333,", 0) == 0);
  CHECK(rounds[2].rfind("1,B,0.3333333333,", 0) == 0);
  CHECK(rounds[3].rfind("1,C,0.3333333333,", 0) == 0);

  const fs::path again = tmp.path / "again";
  REQUIRE(run({"continuous", "--scenario", (out / "manifest.json").string(), "--out", again.string()}) == 0);
  CHECK(slurp(out / "rounds.csv") == slurp(again / "rounds.csv"));
  CHECK(slurp(out / "continuity.csv") == slurp(again / "continuity.csv"));
}

TEST_CASE("configuration errors exit with 2") {
  TempDir tmp;
  const auto cfg = (tmp.path / "cfg.json").string();
  const auto out = (tmp.path / "out").string();
  std::string err;

  spit(cfg, R"({"K": 2, "rounds": 0})");
  CHECK(run({"simulate", "--config", cfg, "--out", out}, &err) == 2);
  CHECK(err.find("rounds") != std::string::npos);

  spit(cfg, R"({"K": 2, "rouns": 3})");
  CHECK(run({"simulate", "--config", cfg, "--out", out}, &err) == 2);
  CHECK(err.find("rouns") != std::string::npos);

  spit(cfg, R"({"K": 2,)");
  CHECK(run({"simulate", "--config", cfg, "--out", out}) == 2);

  spit(cfg, kMinimal);
  CHECK(run({"simulate", "--config", cfg, "--policy", "greedy", "--out", out}) == 2);
  CHECK(run({"simulate", "--config", (tmp.path / "missing.json").string(), "--out", out}) == 2);
  CHECK(run({"simulate"}) == 2);
  CHECK(run({"bogus"}) == 2);

  spit(cfg, R"({"p": {"A": 0.3}, "rounds": [{"active": [], "trials": 10}]})");
  CHECK(run({"continuous", "--scenario", cfg, "--out", out}) == 2);
}

TEST_CASE("executable exit codes") {
  TempDir tmp;
  const std::string exe = ORTS_CLI_PATH;
  const auto cfg = (tmp.path / "cfg.json").string();
  spit(cfg, kMinimal);
  const std::string quiet = " > " + (tmp.path / "log.txt").string() + " 2>&1";
  auto status = [](int raw) {
#ifdef WEXITSTATUS
    return WEXITSTATUS(raw);
#else
    return raw;
#endif
  };
  CHECK(status(std::system((exe + " --version" + quiet).c_str())) == 0);
  CHECK(status(std::system((exe + " simulate --config " + cfg + " --out " +
                            (tmp.path / "out").string() + quiet).c_str())) == 0);
  spit(cfg, "{\"K\": -1}");
  CHECK(status(std::system((exe + " simulate --config " + cfg + quiet).c_str())) == 2);
}
