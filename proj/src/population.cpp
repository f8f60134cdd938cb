#include "eqvar/population.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "eqvar/error.hpp"

namespace eqvar {

namespace {

Eigen::VectorXi to_indices(NodeMask m) {
  const auto nodes = mask_to_nodes(m);
  Eigen::VectorXi idx(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t t = 0; t < nodes.size(); ++t) idx(static_cast<Eigen::Index>(t)) = nodes[t];
  return idx;
}

double rel_error(double value, double reference) {
  return std::abs(value - reference) / std::max(std::abs(reference), std::numeric_limits<double>::min());
}

// Population node scores keyed by (j, parent mask); each pair is solved once.
class NodeScoreCache {
 public:
  explicit NodeScoreCache(const Eigen::MatrixXd& sigma) : sigma_(sigma) {}

  double operator()(int j, NodeMask pa) {
    const auto key = (static_cast<std::uint64_t>(j) << 32) | pa;
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, population_node_score(sigma_, j, pa)).first;
    return it->second;
  }

  PopulationScore graph(const Dag& dag) {
    PopulationScore s;
    for (int j = 0; j < dag.p(); ++j) {
      s.per_node.push_back((*this)(j, dag.parent_mask(j)));
      s.total += s.per_node.back();
    }
    return s;
  }

 private:
  const Eigen::MatrixXd& sigma_;
  std::map<std::uint64_t, double> cache_;
};

}  // namespace

double population_node_score(const Eigen::MatrixXd& sigma, int j, NodeMask pa) {
  const int p = static_cast<int>(sigma.rows());
  if (sigma.cols() != p) throw Error(ErrorKind::InvalidInput, "covariance must be square");
  if (j < 0 || j >= p) throw Error(ErrorKind::InvalidInput, "node index out of range");
  if (mask_contains(pa, j)) throw Error(ErrorKind::InvalidInput, "a node cannot be its own parent");
  if (p < 32 && (pa >> p) != 0) throw Error(ErrorKind::InvalidInput, "parent index out of range");
  if (pa == 0) return sigma(j, j);

  const Eigen::VectorXi idx = to_indices(pa);
  const Eigen::MatrixXd block = sigma(idx, idx);
  const Eigen::VectorXd cross = sigma(idx, j);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0) || hi / lo > kMaxParentConditionNumber)
    throw Error(ErrorKind::DegenerateCovariance,
                "parent covariance block of node " + std::to_string(j) + " is numerically singular");

  const Eigen::LLT<Eigen::MatrixXd> llt(block);
  return sigma(j, j) - cross.dot(llt.solve(cross));
}

PopulationScore population_graph_score(const Eigen::MatrixXd& sigma, const Dag& dag) {
  if (sigma.rows() != dag.p()) throw Error(ErrorKind::InvalidInput, "covariance size does not match the DAG");
  PopulationScore s;
  for (int j = 0; j < dag.p(); ++j) {
    s.per_node.push_back(population_node_score(sigma, j, dag.parent_mask(j)));
    s.total += s.per_node.back();
  }
  return s;
}

std::vector<double> cholesky_diagonal_check(const Eigen::MatrixXd& sigma, const CausalOrder& order) {
  const int p = order.p();
  if (sigma.rows() != p || sigma.cols() != p)
    throw Error(ErrorKind::InvalidInput, "covariance size does not match the order");
  // P X lists the variables in causal order, so cov(P X) = P Sigma P^T.
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(p);
  for (int k = 0; k < p; ++k) perm.indices()(order.at(k)) = k;
  const Eigen::MatrixXd permuted = perm * sigma * perm.transpose();

  const Eigen::LLT<Eigen::MatrixXd> llt(permuted);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::DegenerateCovariance, "covariance is not positive definite");
  const Eigen::MatrixXd w = llt.matrixL();

  std::vector<double> diag(static_cast<std::size_t>(p));
  for (int k = 0; k < p; ++k) {
    diag[static_cast<std::size_t>(k)] = w(k, k) * w(k, k);
    const int node = order.at(k);
    const double regression = population_node_score(sigma, node, nd_under_order(order, node));
    if (rel_error(diag[static_cast<std::size_t>(k)], regression) > 1e-10)
      throw Error(ErrorKind::Internal, "Cholesky diagonal disagrees with the predecessor regression at node " +
                                           std::to_string(node));
  }
  return diag;
}

Theorem1Report verify_theorem1(const SemSpec& spec, int cap) {
  const int p = spec.p();
  const Eigen::MatrixXd sigma = implied_covariance(spec);
  NodeScoreCache score(sigma);

  Theorem1Report report;
  report.expected_min = p * spec.sigma2();
  report.min_total = std::numeric_limits<double>::infinity();
  const double tie = kPopulationTieTolerance * report.expected_min;

  std::vector<std::pair<Dag, double>> totals;
  enumerate_dags(
      p,
      [&](const Dag& dag) {
        const PopulationScore s = score.graph(dag);
        totals.emplace_back(dag, s.total);
        report.min_total = std::min(report.min_total, s.total);
        if (is_supergraph(dag, spec.gamma_star())) {
          report.supergraph_set.push_back(dag);
          for (double r : s.per_node)
            report.supergraph_node_max_rel_error =
                std::max(report.supergraph_node_max_rel_error, rel_error(r, spec.sigma2()));
        }
      },
      cap);
  for (const auto& [dag, total] : totals)
    if (std::abs(total - report.min_total) <= tie) report.argmin_set.push_back(dag);

  const double det = sigma.determinant();
  for (const CausalOrder& order : all_orders(p)) {
    double product = 1.0;
    for (double w2 : cholesky_diagonal_check(sigma, order)) product *= w2;
    report.det_identity_max_rel_error = std::max(report.det_identity_max_rel_error, rel_error(product, det));
  }

  report.delta_star = delta_star(spec, cap);
  report.verdict = report.argmin_set == report.supergraph_set &&
                   rel_error(report.min_total, report.expected_min) <= kPopulationTieTolerance;
  return report;
}

std::optional<double> delta_star(const SemSpec& spec, int cap) {
  const Eigen::MatrixXd sigma = implied_covariance(spec);
  NodeScoreCache score(sigma);
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  enumerate_dags(
      spec.p(),
      [&](const Dag& dag) {
        if (is_supergraph(dag, spec.gamma_star())) return;
        any = true;
        best = std::min(best, score.graph(dag).total);
      },
      cap);
  if (!any) return std::nullopt;
  const double delta = std::log(best) - std::log(spec.p() * spec.sigma2());
  if (!(delta > 0))
    throw Error(ErrorKind::Internal, "non-supergraph attains the optimal population score");
  return delta;
}

}  // namespace eqvar
