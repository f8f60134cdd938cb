#include "eqvar/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "eqvar/error.hpp"

namespace eqvar {

namespace {

void check_parents(int p, int j, NodeMask pa) {
  if (j < 0 || j >= p) throw Error(ErrorKind::InvalidInput, "node index out of range");
  if (mask_contains(pa, j)) throw Error(ErrorKind::InvalidInput, "a node cannot be its own parent");
  if (p < 32 && (pa >> p) != 0) throw Error(ErrorKind::InvalidInput, "parent index out of range");
}

Eigen::MatrixXd regressors(const Dataset& data, NodeMask pa) {
  const auto nodes = mask_to_nodes(pa);
  Eigen::MatrixXd d(data.n(), static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t t = 0; t < nodes.size(); ++t) d.col(static_cast<Eigen::Index>(t)) = data.column(nodes[t]);
  return d;
}

std::string column_label(const Dataset& data, int j) {
  if (!data.column_names().empty()) return "'" + data.column_names()[static_cast<std::size_t>(j)] + "'";
  return std::to_string(j);
}

}  // namespace

double node_rss(const Dataset& data, int j, NodeMask pa) {
  check_parents(data.p(), j, pa);
  const int n = data.n();
  const int k = mask_size(pa);
  if (k == 0) return data.column(j).squaredNorm() / n;
  if (n <= k)
    throw Error(ErrorKind::InsufficientSample, "regressing node " + std::to_string(j) + " on " +
                                                   std::to_string(k) + " parents needs more than " +
                                                   std::to_string(k) + " observations");

  Eigen::MatrixXd augmented(n, k + 1);
  augmented.leftCols(k) = regressors(data, pa);
  augmented.col(k) = data.column(j);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(augmented);
  const Eigen::MatrixXd& packed = qr.matrixQR();

  double largest = 0.0;
  for (int t = 0; t < k; ++t) largest = std::max(largest, std::abs(packed(t, t)));
  const auto nodes = mask_to_nodes(pa);
  for (int t = 0; t < k; ++t) {
    if (std::abs(packed(t, t)) <= kCollinearityTolerance * largest || largest == 0.0) {
      std::string cols;
      for (int u = 0; u <= t; ++u) cols += (u ? ", " : "") + column_label(data, nodes[static_cast<std::size_t>(u)]);
      throw Error(ErrorKind::CollinearData, "regressors of node " + column_label(data, j) +
                                                " are collinear; column " +
                                                column_label(data, nodes[static_cast<std::size_t>(t)]) +
                                                " is in the span of columns {" + cols + "}");
    }
  }
  const double r = packed(k, k);
  return r * r / n;
}

double v_n(const Dataset& data) { return data.values().squaredNorm() / data.n(); }

NodeScoreTable NodeScoreTable::build(const Dataset& data, int max_parents) {
  const int p = data.p();
  if (p > 30) throw Error(ErrorKind::ResourceCap, "node score table supports at most 30 nodes");
  if (max_parents < 0 || max_parents > p - 1) max_parents = p - 1;
  NodeScoreTable table(data.n(), p, eqvar::v_n(data));
  const NodeMask all = (NodeMask{1} << p) - 1;
  for (int j = 0; j < p; ++j) {
    const NodeMask others = all & ~(NodeMask{1} << j);
    // Walk subsets of `others`.
    for (NodeMask pa = others;; pa = (pa - 1) & others) {
      if (mask_size(pa) <= max_parents) table.insert(j, pa, node_rss(data, j, pa));
      if (pa == 0) break;
    }
  }
  return table;
}

double NodeScoreTable::at(int j, NodeMask pa) const {
  const auto it = scores_.find(key(j, pa));
  if (it == scores_.end())
    throw Error(ErrorKind::IncompleteTable, "no score for node " + std::to_string(j) + " with parent mask " +
                                                std::to_string(pa));
  return it->second;
}

double NodeScoreTable::ensure(const Dataset& data, int j, NodeMask pa) {
  const auto it = scores_.find(key(j, pa));
  if (it != scores_.end()) return it->second;
  const double rss = node_rss(data, j, pa);
  insert(j, pa, rss);
  return rss;
}

double NodeScoreTable::total(const Dag& dag) const {
  if (dag.p() != p_) throw Error(ErrorKind::InvalidInput, "DAG size does not match the score table");
  double r = 0.0;
  for (int j = 0; j < p_; ++j) r += at(j, dag.parent_mask(j));
  return r;
}

double log_marginal(const NodeScoreTable& table, const Dag& dag, double g) {
  if (!(g > 0)) throw Error(ErrorKind::InvalidInput, "g must be positive");
  const double r = table.total(dag);
  const double base = table.v_n() + g * r;
  if (!(base > 0)) throw Error(ErrorKind::DegenerateCovariance, "V_n + g R_n is not positive");
  const double np = static_cast<double>(table.n()) * table.p();
  return -0.5 * np * std::log(base) + 0.5 * (np - dag.edge_count()) * std::log1p(g);
}

double log_det_scaled_projector(const Eigen::MatrixXd& projector, double g) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(projector, Eigen::EigenvaluesOnly);
  double total = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) total += std::log1p(g * eig.eigenvalues()(i));
  return total;
}

double log_marginal_direct(const Dataset& data, const Dag& dag, double g) {
  if (!(g > 0)) throw Error(ErrorKind::InvalidInput, "g must be positive");
  if (dag.p() != data.p()) throw Error(ErrorKind::InvalidInput, "DAG size does not match the dataset");
  const int n = data.n();
  const int p = data.p();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);

  double quadratic = 0.0;
  double log_det = 0.0;
  for (int j = 0; j < p; ++j) {
    const NodeMask pa = dag.parent_mask(j);
    const int k = mask_size(pa);
    Eigen::MatrixXd projector = Eigen::MatrixXd::Zero(n, n);
    if (k > 0) {
      if (n <= k) throw Error(ErrorKind::InsufficientSample, "too few observations for the parent set");
      const Eigen::MatrixXd d = regressors(data, pa);
      const Eigen::MatrixXd gram = d.transpose() * d;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
      const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
      if (ldlt.info() != Eigen::Success || pivots.minCoeff() <= 1e-20 * pivots.maxCoeff())
        throw Error(ErrorKind::CollinearData, "regressors of node " + std::to_string(j) + " are collinear");
      projector = d * ldlt.solve(d.transpose());
      projector = 0.5 * (projector + projector.transpose());
    }
    const Eigen::MatrixXd m = g * projector + identity;
    const Eigen::VectorXd x = data.column(j);
    quadratic += x.dot(m.ldlt().solve(x));
    log_det += log_det_scaled_projector(projector, g);
  }
  const double np = static_cast<double>(n) * p;
  // The raw evidence carries an extra n^{-np/2}; add it back so the value is
  // on the same constant convention as log_marginal.
  return -0.5 * np * std::log(quadratic) - 0.5 * log_det + 0.5 * np * std::log(static_cast<double>(n));
}

double bic_node_score(const NodeScoreTable& table, int j, NodeMask pa) {
  return table.n() * table.at(j, pa) + mask_size(pa) * std::log(static_cast<double>(table.n()));
}

double bic_score(const NodeScoreTable& table, const Dag& dag) {
  if (dag.p() != table.p()) throw Error(ErrorKind::InvalidInput, "DAG size does not match the score table");
  double total = 0.0;
  for (int j = 0; j < dag.p(); ++j) total += bic_node_score(table, j, dag.parent_mask(j));
  return total;
}

DagScore score_dag(const NodeScoreTable& table, const Dag& dag, double g) {
  DagScore s;
  s.r_n_total = table.total(dag);
  s.log_marginal = log_marginal(table, dag, g);
  s.bic = bic_score(table, dag);
  s.edge_count = dag.edge_count();
  s.g = g;
  s.n = table.n();
  s.p = table.p();
  return s;
}

double log_bayes_factor(const DagScore& a, const DagScore& b) {
  if (a.n != b.n || a.p != b.p || a.g != b.g)
    throw Error(ErrorKind::IncompatibleScore, "Bayes factor needs scores with equal n, p and g");
  return a.log_marginal - b.log_marginal;
}

DagPrior DagPrior::edge(double q) {
  if (!(q > 0 && q < 1)) throw Error(ErrorKind::InvalidInput, "edge prior probability must lie in (0, 1)");
  return DagPrior(q);
}

DagPrior DagPrior::parse(const std::string& text) {
  if (text == "uniform") return uniform();
  if (text.rfind("edge:", 0) == 0) {
    std::size_t used = 0;
    double q = 0;
    try {
      q = std::stod(text.substr(5), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - 5)
      throw Error(ErrorKind::InvalidInput, "cannot parse prior '" + text + "'");
    return edge(q);
  }
  throw Error(ErrorKind::InvalidInput, "unknown prior '" + text + "' (expected uniform or edge:q)");
}

double DagPrior::log_weight(const Dag& dag) const {
  if (is_uniform()) return 0.0;
  const int pairs = dag.p() * (dag.p() - 1) / 2;
  const int e = dag.edge_count();
  return e * std::log(q_) + (pairs - e) * std::log1p(-q_);
}

std::string DagPrior::describe() const {
  if (is_uniform()) return "uniform";
  char buf[64];
  std::snprintf(buf, sizeof buf, "edge:%.17g", q_);
  return buf;
}

double log_sum_exp(const std::vector<double>& values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

const PosteriorEntry& PosteriorResult::entry(const Dag& dag) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), dag,
                                   [](const PosteriorEntry& e, const Dag& d) { return canonical_less(e.dag, d); });
  if (it == entries.end() || !(it->dag == dag)) throw Error(ErrorKind::InvalidInput, "DAG not in posterior");
  return *it;
}

std::vector<std::size_t> PosteriorResult::ranking() const {
  std::vector<std::size_t> idx(entries.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // entries are canonical, so a stable sort breaks ties canonically
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return entries[a].log_posterior > entries[b].log_posterior; });
  return idx;
}

int PosteriorResult::rank_of(const Dag& dag) const {
  const auto order = ranking();
  for (std::size_t r = 0; r < order.size(); ++r)
    if (entries[order[r]].dag == dag) return static_cast<int>(r) + 1;
  throw Error(ErrorKind::InvalidInput, "DAG not in posterior");
}

PosteriorResult posterior_over_dags(const Dataset& data, const DagPrior& prior, double g, int cap) {
  if (data.p() > cap)
    throw Error(ErrorKind::ResourceCap, "posterior over all DAGs on " + std::to_string(data.p()) +
                                            " nodes exceeds the enumeration cap of " + std::to_string(cap));
  const NodeScoreTable table = NodeScoreTable::build(data);

  PosteriorResult result;
  result.n = data.n();
  result.p = data.p();
  result.g = g;
  result.prior = prior.describe();
  result.centered = data.centered();

  std::vector<double> log_priors;
  enumerate_dags(
      data.p(),
      [&](const Dag& dag) {
        PosteriorEntry e{dag, score_dag(table, dag, g), 0.0, 0.0, 0.0};
        log_priors.push_back(prior.log_weight(dag));
        result.entries.push_back(std::move(e));
      },
      cap);
  const double prior_norm = log_sum_exp(log_priors);
  std::vector<double> joint;
  joint.reserve(result.entries.size());
  for (std::size_t i = 0; i < result.entries.size(); ++i) {
    result.entries[i].log_prior = log_priors[i] - prior_norm;
    joint.push_back(result.entries[i].score.log_marginal + result.entries[i].log_prior);
  }
  const double evidence = log_sum_exp(joint);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.entries.size(); ++i) {
    auto& e = result.entries[i];
    e.log_posterior = joint[i] - evidence;
    e.posterior = std::exp(e.log_posterior);
    best = std::max(best, e.log_posterior);
  }
  for (const auto& e : result.entries)
    if (e.log_posterior == best) result.map_dags.push_back(e.dag);
  return result;
}

}  // namespace eqvar
