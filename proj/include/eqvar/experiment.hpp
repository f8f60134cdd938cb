#pragma once

// Posterior-consistency experiments: for each (error family, n, seed) cell,
// simulate from a fixed SEM, compute the exact posterior over all DAGs and
// record the posterior mass and rank of the true graph.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eqvar/io.hpp"
#include "eqvar/scoring.hpp"
#include "eqvar/sem.hpp"

namespace eqvar {

struct GPolicy {
  /// g = n when absent.
  std::optional<double> fixed;

  double at(int n) const { return fixed ? *fixed : static_cast<double>(n); }
  std::string describe() const;
  /// "n" or a positive number.
  static GPolicy parse(const std::string& text);
};

struct ExperimentConfig {
  ExperimentConfig(SemSpec spec_, std::vector<int> n_grid_)
      : spec(std::move(spec_)), n_grid(std::move(n_grid_)) {}

  SemSpec spec;
  std::vector<int> n_grid;
  int seeds = 100;
  std::uint64_t master_seed = 0;
  std::vector<ErrorFamily> families = {ErrorFamily::Gaussian};
  GPolicy g;
  DagPrior prior = DagPrior::uniform();
  bool center = false;
  int workers = 1;
  int cap = kDefaultEnumerationCap;

  /// Throws InvalidInput unless n_grid is non-empty and strictly increasing
  /// and seeds >= 1.
  void validate() const;
};

ExperimentConfig experiment_config_from_json(const Json& j);

/// Seed of one cell; independent of the grid's other cells.
std::uint64_t cell_seed(std::uint64_t master_seed, ErrorFamily family, int n, int seed_index);

struct RunRow {
  ErrorFamily family = ErrorFamily::Gaussian;
  int n = 0;
  int seed_index = 0;
  std::uint64_t seed = 0;
  double posterior_true = 0.0;
  bool map_correct = false;
  int rank_true = 0;
};

struct AggregateRow {
  ErrorFamily family = ErrorFamily::Gaussian;
  int n = 0;
  int runs = 0;
  double mean_posterior_true = 0.0;
  double median_posterior_true = 0.0;
  double map_rate = 0.0;
  /// log of exp(-(n p / 2) delta*) (1 + n)^{|true| / 2} at the population
  /// delta*; absent when delta* is undefined.
  std::optional<double> log_bound_term;
};

struct CellFailure {
  ErrorFamily family = ErrorFamily::Gaussian;
  int n = 0;
  int seed_index = 0;
  std::string message;
};

struct ConsistencyReport {
  ExperimentConfig config;
  std::optional<double> delta_star;
  std::vector<RunRow> runs;             // ordered by (family, n, seed_index)
  std::vector<AggregateRow> aggregates; // ordered by (family, n)
  std::vector<CellFailure> failures;

  bool complete() const { return failures.empty(); }
};

/// Aggregates per (family, n) in first-appearance order of the rows.
std::vector<AggregateRow> aggregate_runs(const std::vector<RunRow>& runs, const Dag& gamma_star, int p,
                                         std::optional<double> delta_star);

double median(std::vector<double> values);

/// Cells run on `config.workers` threads; the merge is ordered, so the report
/// does not depend on the worker count. Failing cells are recorded, not thrown.
ConsistencyReport run_consistency_experiment(const ExperimentConfig& config);

/// timestamp: optional "generated_at" value, omitted when empty.
Json report_to_json(const ConsistencyReport& report, const std::string& timestamp = {});
std::string runs_to_csv(const std::vector<RunRow>& runs);
/// Inverse of runs_to_csv.
std::vector<RunRow> runs_from_csv(const std::string& text);

/// Writes report.json, runs.csv and manifest.json (completed and failed
/// cells) into `dir`.
void write_experiment_outputs(const ConsistencyReport& report, const std::filesystem::path& dir,
                              const std::string& timestamp = {});

}  // namespace eqvar
