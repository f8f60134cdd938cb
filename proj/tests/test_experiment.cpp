#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eqvar/error.hpp"
#include "eqvar/experiment.hpp"
#include "eqvar/population.hpp"

using namespace eqvar;

namespace {

SemSpec chain2() {
  const std::vector<Edge> e{{0, 1}};
  return SemSpec::uniform_weights(Dag::from_edges(2, e), 1.0, 1.0);
}

ExperimentConfig small_config() {
  ExperimentConfig c(chain2(), {50, 200});
  c.seeds = 6;
  c.master_seed = 11;
  c.families = {ErrorFamily::Gaussian, ErrorFamily::Uniform};
  return c;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("GPolicy") {
  CHECK(GPolicy::parse("n").at(250) == 250.0);
  CHECK(GPolicy::parse("4").at(250) == 4.0);
  CHECK_THROWS_AS(GPolicy::parse("-1"), Error);
  CHECK_THROWS_AS(GPolicy::parse("abc"), Error);
}

TEST_CASE("ExperimentConfig validation") {
  ExperimentConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.n_grid = {};
  CHECK_THROWS_AS(c.validate(), Error);
  c.n_grid = {100, 100};
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.seeds = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.cap = 1;
  try {
    c.validate();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResourceCap);
  }
}

TEST_CASE("experiment config from JSON") {
  Json j = {{"spec", sem_to_json(chain2())},
            {"n_grid", {100, 1000}},
            {"seeds", 3},
            {"families", {"gaussian", "laplace"}},
            {"g", 5.0},
            {"prior", "edge:0.5"},
            {"workers", 2}};
  const ExperimentConfig c = experiment_config_from_json(j);
  CHECK(c.seeds == 3);
  CHECK(c.families.size() == 2);
  CHECK(c.g.at(100) == 5.0);
  CHECK(c.prior.q() == 0.5);
  CHECK(c.workers == 2);
  j.erase("n_grid");
  CHECK_THROWS_AS(experiment_config_from_json(j), Error);
}

TEST_CASE("a one-node spec puts all posterior mass on the truth") {
  ExperimentConfig c(SemSpec::uniform_weights(Dag(1), 1.0, 1.0), {10});
  c.seeds = 3;
  const ConsistencyReport r = run_consistency_experiment(c);
  REQUIRE(r.runs.size() == 3);
  for (const RunRow& row : r.runs) {
    CHECK(row.posterior_true == 1.0);
    CHECK(row.map_correct);
    CHECK(row.rank_true == 1);
  }
  CHECK_FALSE(r.delta_star.has_value());
  CHECK_FALSE(r.aggregates[0].log_bound_term.has_value());
}

TEST_CASE("experiments are deterministic and independent of the worker count") {
  ExperimentConfig one = small_config();
  ExperimentConfig four = small_config();
  four.workers = 4;
  const ConsistencyReport a = run_consistency_experiment(one);
  const ConsistencyReport b = run_consistency_experiment(one);
  const ConsistencyReport c = run_consistency_experiment(four);
  CHECK(a.complete());
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
  CHECK(runs_to_csv(a.runs) == runs_to_csv(c.runs));
  // The worker count is part of the recorded config; everything else matches.
  Json ja = report_to_json(a);
  Json jc = report_to_json(c);
  ja.erase("config");
  jc.erase("config");
  CHECK(ja.dump() == jc.dump());
  CHECK(report_to_json(a, "2026-01-01T00:00:00Z").contains("generated_at"));
  CHECK_FALSE(report_to_json(a).contains("generated_at"));
}

TEST_CASE("cell seeds do not depend on the rest of the grid") {
  ExperimentConfig wide = small_config();
  ExperimentConfig narrow = small_config();
  narrow.n_grid = {200};
  narrow.families = {ErrorFamily::Uniform};
  const ConsistencyReport a = run_consistency_experiment(wide);
  const ConsistencyReport b = run_consistency_experiment(narrow);
  std::vector<RunRow> subset;
  for (const RunRow& row : a.runs)
    if (row.n == 200 && row.family == ErrorFamily::Uniform) subset.push_back(row);
  CHECK(runs_to_csv(subset) == runs_to_csv(b.runs));
}

TEST_CASE("aggregates are recomputable from the per-run CSV") {
  const ConsistencyReport r = run_consistency_experiment(small_config());
  const std::vector<RunRow> back = runs_from_csv(runs_to_csv(r.runs));
  REQUIRE(back.size() == r.runs.size());
  const auto again = aggregate_runs(back, r.config.spec.gamma_star(), r.config.spec.p(), r.delta_star);
  REQUIRE(again.size() == r.aggregates.size());
  CHECK(r.aggregates.size() == 4);
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].family == r.aggregates[i].family);
    CHECK(again[i].n == r.aggregates[i].n);
    CHECK(again[i].runs == 6);
    CHECK(again[i].mean_posterior_true == r.aggregates[i].mean_posterior_true);
    CHECK(again[i].median_posterior_true == r.aggregates[i].median_posterior_true);
    CHECK(again[i].map_rate == r.aggregates[i].map_rate);
  }
  CHECK(runs_to_csv(r.runs).rfind("family,n,seed,posterior_true,map_correct,rank_true\n", 0) == 0);
  CHECK_THROWS_AS(runs_from_csv("family,n\n"), Error);
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(std::isnan(median({})));
}

TEST_CASE("bound term decreases in n once the exponential dominates") {
  const double ds = *delta_star(chain2());
  std::vector<RunRow> rows;
  for (int n : {100, 1000, 10000, 100000}) rows.push_back({ErrorFamily::Gaussian, n, 0, 0, 0.5, true, 1});
  const auto agg = aggregate_runs(rows, chain2().gamma_star(), 2, ds);
  for (std::size_t i = 1; i < agg.size(); ++i) CHECK(*agg[i].log_bound_term < *agg[i - 1].log_bound_term);
  CHECK(*agg[0].log_bound_term == doctest::Approx(-100.0 * ds + 0.5 * std::log(101.0)));
}

TEST_CASE("posterior of the truth grows with n on a small sweep") {
  ExperimentConfig c(chain2(), {20, 200, 2000});
  c.seeds = 20;
  c.workers = 2;
  const ConsistencyReport r = run_consistency_experiment(c);
  REQUIRE(r.aggregates.size() == 3);
  CHECK(r.aggregates[0].median_posterior_true <= r.aggregates[1].median_posterior_true);
  CHECK(r.aggregates[1].median_posterior_true <= r.aggregates[2].median_posterior_true);
  CHECK(r.aggregates[2].map_rate >= 0.9);
}

TEST_CASE("experiment outputs on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "eqvar_test_experiment";
  std::filesystem::remove_all(dir);
  const ConsistencyReport r = run_consistency_experiment(small_config());
  write_experiment_outputs(r, dir);
  const Json manifest = read_json(dir / "manifest.json");
  CHECK(manifest.at("complete") == true);
  CHECK(manifest.at("completed").size() == r.runs.size());
  CHECK(slurp(dir / "runs.csv") == runs_to_csv(r.runs));
  CHECK(read_json(dir / "report.json") == report_to_json(r));
  std::filesystem::remove_all(dir);
}
