#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "harmonic/experiment.hpp"

using namespace harmonic;
using experiment::json;

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

json example1_solve() {
  return json::parse(R"({"chain": {"type": "example1", "alpha": 2.0, "p": 0.7},
                         "task": "harmonic-solve", "params": {"K": 200}})");
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Validate, ValidExample1) { EXPECT_TRUE(experiment::validate(example1_solve()).empty()); }

TEST(Validate, ProbabilityOutOfRange) {
  json c = example1_solve();
  c["chain"]["p"] = 1.2;
  const auto bad = experiment::validate(c);
  ASSERT_FALSE(bad.empty());
  EXPECT_TRUE(mentions(bad, "chain.p: probability out of range"));
}

TEST(Validate, Example3PerturbationLeavesUnitInterval) {
  const json c = json::parse(R"({"chain": {"type": "example3", "p": 0.3, "gamma": 0.7, "c0": 0.7},
                                 "task": "stationary", "params": {"K": 100}})");
  EXPECT_TRUE(mentions(experiment::validate(c), "chain.c0"));
}

TEST(Validate, StructuralProblems) {
  EXPECT_FALSE(experiment::validate(json::object()).empty());
  EXPECT_FALSE(experiment::validate(json::array()).empty());
  json c = example1_solve();
  c["extra"] = 1;
  EXPECT_TRUE(mentions(experiment::validate(c), "extra: unknown key"));
  c = example1_solve();
  c["params"]["K"] = 5;
  EXPECT_TRUE(mentions(experiment::validate(c), "params.K"));
  c = example1_solve();
  c["task"] = "harmonic-mc";
  EXPECT_TRUE(mentions(experiment::validate(c), "params.seed"));
  c = example1_solve();
  c["task"] = "stationary";
  EXPECT_TRUE(mentions(experiment::validate(c), "not supported by task"));
  c = example1_solve();
  c["chain"]["type"] = "mystery";
  EXPECT_TRUE(mentions(experiment::validate(c), "unknown chain type"));
  c = example1_solve();
  c["params"]["K"] = "large";
  EXPECT_TRUE(mentions(experiment::validate(c), "params.K"));
}

TEST(Validate, HasNoSideEffects) {
  const json c = example1_solve();
  const json copy = c;
  experiment::validate(c);
  EXPECT_EQ(c, copy);
}

TEST(Execute, Example1SolveCsv) {
  const auto r = experiment::execute(example1_solve());
  EXPECT_EQ(r.exit_code, 0);
  const auto rows = parse_csv(r.csv);
  ASSERT_EQ(rows.size(), 22u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"i", "f_solve", "f_closed_form", "abs_err"}));
  double worst = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) worst = std::max(worst, std::stod(rows[k][3]));
  EXPECT_LE(worst, 1e-6);
  EXPECT_NEAR(std::stod(rows[1][1]), 8.0, 1e-6);
  EXPECT_EQ(r.manifest["task"], "harmonic-solve");
  EXPECT_EQ(r.manifest["exit_code"], 0);
  EXPECT_TRUE(r.manifest.contains("version"));
  EXPECT_TRUE(r.manifest.contains("tolerances"));
  EXPECT_TRUE(r.manifest["verdicts"]["doubling_agrees"].get<bool>());
  EXPECT_EQ(r.manifest["config"], example1_solve());
}

TEST(Execute, CriticalAndSupercriticalAreFlagged) {
  json c = example1_solve();
  c["chain"]["alpha"] = 7.0 / 3.0;
  EXPECT_EQ(experiment::execute(c).exit_code, 2);
  c["chain"]["alpha"] = 3.0;
  const auto r = experiment::execute(c);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_FALSE(r.manifest["verdicts"]["positive_solution"].get<bool>());
}

TEST(Execute, CramerSeries) {
  const json c = json::parse(R"({"task": "cramer-series", "params": {"M": 2, "m": [2, 3], "D": [[1]]}})");
  const auto r = experiment::execute(c);
  EXPECT_EQ(r.csv, "k,R_k\n1,-0.5\n2,0.0625\n");
  EXPECT_EQ(r.exit_code, 0);
}

TEST(Execute, InvalidConfigThrows) {
  json c = example1_solve();
  c["chain"]["p"] = 1.2;
  EXPECT_THROW(experiment::execute(c), experiment::ConfigError);
  EXPECT_THROW(experiment::execute(json::object()), experiment::ConfigError);
}

TEST(Execute, McIsReproducible) {
  const json c = json::parse(R"({"chain": {"type": "example1", "alpha": 2.0, "p": 0.7}, "task": "harmonic-mc",
                                 "params": {"n_paths": 3000, "seed": 9, "states": [0, 2]}})");
  const auto a = experiment::execute(c), b = experiment::execute(c);
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_EQ(parse_csv(a.csv)[0], (std::vector<std::string>{"i", "f_mc", "std_error", "f_reference", "z_score"}));
  EXPECT_EQ(a.manifest["seed"], 9);
}

TEST(Execute, LadderStationaryTailColumns) {
  const json ladder = json::parse(R"({"chain": {"type": "killed-walk", "pmf": {"-1": 0.7, "1": 0.3}}, "task": "ladder",
                                      "params": {"i_max": 10}})");
  const auto l = experiment::execute(ladder);
  EXPECT_EQ(l.exit_code, 0);
  const auto rows = parse_csv(l.csv);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"i", "doney", "tilted_min", "ratio", "lower_bound", "upper_bound"}));
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_NEAR(std::stod(rows[k][3]), 4.0 / 7.0, 1e-10);

  const json stat = json::parse(R"({"chain": {"type": "lindley", "pmf": {"-1": 0.7, "1": 0.3}}, "task": "stationary",
                                    "params": {"K": 50}})");
  const auto s = experiment::execute(stat);
  EXPECT_EQ(parse_csv(s.csv)[0], (std::vector<std::string>{"i", "pi", "pi_closed_form", "rel_err"}));
  EXPECT_EQ(parse_csv(s.csv).size(), 52u);

  const json tail = json::parse(R"({"chain": {"type": "lindley", "pmf": {"-1": 0.7, "1": 0.3}}, "task": "tail",
                                    "params": {"K": 400, "tol": 1e-8}})");
  const auto t = experiment::execute(tail);
  EXPECT_EQ(t.exit_code, 0);
  EXPECT_EQ(parse_csv(t.csv)[0], (std::vector<std::string>{"i", "log_pi", "log_compensator", "c"}));
  EXPECT_NEAR(t.manifest["results"]["c"].get<double>(), 4.0 / 7.0, 1e-9);
}

TEST(Execute, UnverifiedTailHypothesesExitTwo) {
  const json c = json::parse(R"({"chain": {"type": "example3", "p": 0.3, "gamma": 0.7, "c0": 0.05}, "task": "tail",
                                 "params": {"K": 1000}})");
  const auto r = experiment::execute(c);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_FALSE(r.manifest["verdicts"]["hypotheses_verified"].get<bool>());
}

TEST(Execute, ConditionsTable) {
  const json c = json::parse(R"({"chain": {"type": "example1", "alpha": 2.0, "p": 0.7}, "task": "conditions"})");
  const auto r = experiment::execute(c);
  EXPECT_EQ(r.exit_code, 0);
  const auto rows = parse_csv(r.csv);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"quantity", "value"}));
  EXPECT_EQ(rows[1][0], "sum_abs_delta");
  EXPECT_NEAR(std::stod(rows[1][1]), std::log(2.0), 1e-14);
}

TEST(FormatNumber, SeventeenDigitsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 8.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(experiment::format_number(v)), v);
  EXPECT_EQ(experiment::format_number(0.0625), "0.0625");
  EXPECT_EQ(experiment::format_number(std::nan("")), "nan");
}
