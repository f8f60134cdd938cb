#pragma once

// Empirical least-squares scores and the g-prior marginal likelihood of a DAG
// under the Gaussian equal-variance working model with a Jeffreys prior on
// the common variance:
//
//   log m(D | dag) = -(n p / 2) log(V_n + g R_n) + ((n p - |dag|) / 2) log(1 + g)
//
// up to a dag-independent constant, which is fixed to zero. Differences are
// exact log Bayes factors. The sum over nodes sits inside the logarithm, so
// this score does not decompose node-wise; the BIC-type score
// n R_n + |dag| log n does.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "eqvar/graph.hpp"
#include "eqvar/sem.hpp"

namespace eqvar {

/// Relative size of the smallest QR diagonal below which regressors are
/// treated as collinear.
inline constexpr double kCollinearityTolerance = 1e-10;

/// Residual sum of squares of X_j regressed on X_pa (no intercept), divided
/// by n. Uses a Householder QR of [X_pa | X_j]; the last diagonal of R is the
/// residual norm. Throws InsufficientSample when n <= |pa| and CollinearData
/// when the regressor block is rank deficient.
double node_rss(const Dataset& data, int j, NodeMask pa);

/// n^{-1} sum_j X_j^T X_j.
double v_n(const Dataset& data);

/// Cached (node, parent set) -> R_{j,n}.
class NodeScoreTable {
 public:
  NodeScoreTable(int n, int p, double v_n) : n_(n), p_(p), v_n_(v_n) {}

  /// Every parent set of size <= max_parents for every node (max_parents < 0
  /// means p - 1).
  static NodeScoreTable build(const Dataset& data, int max_parents = -1);

  int n() const { return n_; }
  int p() const { return p_; }
  double v_n() const { return v_n_; }
  std::size_t size() const { return scores_.size(); }

  bool contains(int j, NodeMask pa) const { return scores_.contains(key(j, pa)); }
  /// Throws IncompleteTable when the entry is missing.
  double at(int j, NodeMask pa) const;
  void insert(int j, NodeMask pa, double rss) { scores_[key(j, pa)] = rss; }
  /// Computes and stores the entry if missing.
  double ensure(const Dataset& data, int j, NodeMask pa);

  /// R_n for the DAG.
  double total(const Dag& dag) const;

 private:
  static std::uint64_t key(int j, NodeMask pa) { return (static_cast<std::uint64_t>(j) << 32) | pa; }

  int n_;
  int p_;
  double v_n_;
  std::unordered_map<std::uint64_t, double> scores_;
};

struct DagScore {
  double log_marginal = 0.0;
  double bic = 0.0;
  double r_n_total = 0.0;
  int edge_count = 0;
  double g = 0.0;
  int n = 0;
  int p = 0;
};

double log_marginal(const NodeScoreTable& table, const Dag& dag, double g);
/// Same quantity from the pre-simplification form: dense solves with
/// (g P_j + I_n) per node and log det(g P_j + I_n) from the eigenvalues of
/// the projector. Quadratic in n; meant as a cross-check on small data.
double log_marginal_direct(const Dataset& data, const Dag& dag, double g);
/// log det(g P + I) from the spectrum of a symmetric matrix P.
double log_det_scaled_projector(const Eigen::MatrixXd& projector, double g);

/// n R_n + |dag| log n. Lower is better.
double bic_score(const NodeScoreTable& table, const Dag& dag);
/// Contribution of one node to the BIC-type score.
double bic_node_score(const NodeScoreTable& table, int j, NodeMask pa);

DagScore score_dag(const NodeScoreTable& table, const Dag& dag, double g);

/// log m(a) - log m(b). Throws IncompatibleScore on mismatched n, p, or g.
double log_bayes_factor(const DagScore& a, const DagScore& b);

class DagPrior {
 public:
  static DagPrior uniform() { return DagPrior(0.0); }
  /// Each edge present with weight q, absent with 1 - q; 0 < q < 1.
  static DagPrior edge(double q);
  /// "uniform" or "edge:<q>".
  static DagPrior parse(const std::string& text);

  bool is_uniform() const { return q_ == 0.0; }
  double q() const { return q_; }
  /// Unnormalized log weight.
  double log_weight(const Dag& dag) const;
  std::string describe() const;

 private:
  explicit DagPrior(double q) : q_(q) {}
  double q_;
};

struct PosteriorEntry {
  Dag dag;
  DagScore score;
  double log_prior = 0.0;  // normalized over all DAGs
  double log_posterior = 0.0;
  double posterior = 0.0;
};

struct PosteriorResult {
  int n = 0;
  int p = 0;
  double g = 0.0;
  std::string prior;
  bool centered = false;
  std::vector<PosteriorEntry> entries;  // canonical order
  std::vector<Dag> map_dags;            // canonical order

  /// Throws InvalidInput if the DAG is not in the result.
  const PosteriorEntry& entry(const Dag& dag) const;
  /// 1-based rank by descending posterior, ties broken canonically.
  int rank_of(const Dag& dag) const;
  /// Indices into entries, best first.
  std::vector<std::size_t> ranking() const;
};

/// Exact posterior over every DAG on p nodes. The node score table is built
/// once (p 2^{p-1} regressions).
PosteriorResult posterior_over_dags(const Dataset& data, const DagPrior& prior, double g,
                                    int cap = kDefaultEnumerationCap);

/// Numerically stable log sum exp.
double log_sum_exp(const std::vector<double>& values);

}  // namespace eqvar
