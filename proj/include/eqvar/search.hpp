#pragma once

// Structure search over DAGs.
//
// The marginal-likelihood score is not decomposable across nodes, so its
// optimum is found by exhaustive enumeration only. The BIC-type score is a
// sum of per-node terms and admits exact dynamic programming over node
// subsets: best parent set per (node, candidate set), best sink per subset,
// then back-tracking.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "eqvar/graph.hpp"
#include "eqvar/scoring.hpp"

namespace eqvar {

struct Criterion {
  enum class Kind { LogMarginal, Bic };
  Kind kind = Kind::Bic;
  double g = 0.0;  // LogMarginal only

  static Criterion bic() { return {Kind::Bic, 0.0}; }
  static Criterion log_marginal(double g) { return {Kind::LogMarginal, g}; }

  /// Natural value: log marginal (maximize) or BIC (minimize).
  double value(const NodeScoreTable& table, const Dag& dag) const;
  /// Larger is better.
  double utility(double value) const { return kind == Kind::Bic ? -value : value; }
  std::string name() const { return kind == Kind::Bic ? "bic" : "log_marginal"; }
};

enum class SearchMethod { Exhaustive, Dp, Greedy };
std::string to_string(SearchMethod method);

struct SearchStats {
  std::size_t candidates_scored = 0;
  double wall_seconds = 0.0;
  int restarts = 0;
  /// Greedy only: restarts whose local optimum matched the reference score.
  std::optional<int> restarts_reaching_reference;
};

struct SearchResult {
  std::vector<Dag> best_dags;  // canonical order
  double best_score = 0.0;     // in the criterion's natural units
  Criterion criterion;
  SearchMethod method = SearchMethod::Exhaustive;
  SearchStats stats;
  /// Greedy only: utility after every accepted move, restarts concatenated.
  std::vector<double> trajectory;
};

/// Tolerance used to decide that two scores tie.
double score_tie_tolerance(double score);

SearchResult exhaustive_best(const NodeScoreTable& table, const Criterion& criterion,
                             int cap = kDefaultEnumerationCap);

inline constexpr std::size_t kDefaultDpMemoryBudget = std::size_t{1} << 30;
/// Optimal DAGs reported by the DP back-tracking are capped at this count.
inline constexpr std::size_t kMaxReportedOptima = 256;

/// Rough peak memory of exact_dp_bic including a fully populated table.
std::size_t dp_memory_estimate(int p, int max_parents);
/// Parent cap used when none is given: p - 1 up to p = 8, else min(p - 1, 5).
int default_max_parents(int p);

/// Exact minimizer of the BIC-type score among DAGs whose in-degree is at
/// most max_parents (max_parents < 0 means p - 1). The table must contain
/// every parent set within that cap. Throws ResourceCap when the memory
/// estimate exceeds `memory_budget`.
SearchResult exact_dp_bic(const NodeScoreTable& table, int max_parents = -1,
                          std::size_t memory_budget = kDefaultDpMemoryBudget);

struct GreedyOptions {
  int restarts = 10;
  std::uint64_t seed = 0;
  /// Edge probability of the random starting DAGs.
  double start_edge_prob = 0.3;
  /// Start of the first restart; random when absent.
  std::optional<Dag> initial;
  /// Known optimum (e.g. from exhaustive search or DP) to count hits against.
  std::optional<double> reference_score;
  int max_parents = -1;
};

/// First-improvement hill climbing over single-edge additions, deletions
/// and reversals in a fixed move order. Missing table entries are filled
/// on demand from `data`.
SearchResult greedy_hill_climb(const Dataset& data, NodeScoreTable& table, const Criterion& criterion,
                               const GreedyOptions& options);

}  // namespace eqvar
