#pragma once

// Exact population-level least-squares scores computed from a covariance
// matrix, and a brute-force verifier for the identifiability law: over all
// DAGs the total best-linear-predictor residual variance is minimized
// exactly by the supergraphs of the true graph, where it equals p * sigma2.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "eqvar/graph.hpp"
#include "eqvar/sem.hpp"

namespace eqvar {

/// Relative tolerance separating ties from strict gaps in population scores.
inline constexpr double kPopulationTieTolerance = 1e-9;
/// Condition number above which a parent block counts as singular.
inline constexpr double kMaxParentConditionNumber = 1e12;

struct PopulationScore {
  std::vector<double> per_node;
  double total = 0.0;
};

/// Sigma_jj - Sigma_{j,pa} Sigma_{pa,pa}^{-1} Sigma_{pa,j}. Throws
/// DegenerateCovariance when Sigma_{pa,pa} is numerically singular.
double population_node_score(const Eigen::MatrixXd& sigma, int j, NodeMask pa);

PopulationScore population_graph_score(const Eigen::MatrixXd& sigma, const Dag& dag);

/// Squared diagonal of the Cholesky factor of the covariance permuted into
/// `order`; entry k belongs to node order.at(k). Each value is checked
/// against the regression of that node on its predecessors (relative
/// 1e-10); a mismatch throws Internal.
std::vector<double> cholesky_diagonal_check(const Eigen::MatrixXd& sigma, const CausalOrder& order);

struct Theorem1Report {
  double min_total = 0.0;
  double expected_min = 0.0;  // p * sigma2
  std::vector<Dag> argmin_set;
  std::vector<Dag> supergraph_set;
  /// Largest relative deviation of prod_k W_kk^2 from det(Sigma) over all
  /// p! orders.
  double det_identity_max_rel_error = 0.0;
  /// Largest relative deviation of a per-node score from sigma2 among the
  /// supergraphs of the true graph.
  double supergraph_node_max_rel_error = 0.0;
  std::optional<double> delta_star;
  bool verdict = false;
};

/// Brute force over every DAG on p nodes. Throws ResourceCap above `cap`.
Theorem1Report verify_theorem1(const SemSpec& spec, int cap = kDefaultEnumerationCap);

/// min over DAGs not containing the true graph of log r - log(p sigma2).
/// Empty when every DAG is a supergraph (true graph empty). Throws Internal
/// if the minimum is not strictly positive.
std::optional<double> delta_star(const SemSpec& spec, int cap = kDefaultEnumerationCap);

}  // namespace eqvar
