#include "eqvar/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <unordered_map>

#include "eqvar/error.hpp"
#include "eqvar/rng.hpp"
#include "eqvar/sem.hpp"

namespace eqvar {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<Dag> sorted_unique(std::vector<Dag> dags) {
  std::sort(dags.begin(), dags.end(), canonical_less);
  dags.erase(std::unique(dags.begin(), dags.end()), dags.end());
  return dags;
}

// Drop bit j and shift the higher bits down: index into the 2^{p-1}
// subsets of V \ {j}.
inline std::uint32_t compress(NodeMask m, int j) {
  const NodeMask low = (NodeMask{1} << j) - 1;
  return (m & low) | ((m >> (j + 1)) << j);
}

inline NodeMask expand(std::uint32_t c, int j) {
  const NodeMask low = (NodeMask{1} << j) - 1;
  return (c & low) | ((c & ~low) << 1);
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

class SubsetDp {
 public:
  SubsetDp(const NodeScoreTable& table, int max_parents)
      : table_(table), p_(table.p()), cap_(max_parents), half_(std::size_t{1} << (p_ - 1)) {}

  void run() {
    best_parents_.assign(static_cast<std::size_t>(p_), std::vector<double>(half_));
    for (int j = 0; j < p_; ++j) {
      auto& bps = best_parents_[static_cast<std::size_t>(j)];
      for (std::uint32_t c = 0; c < half_; ++c) {
        double best = std::numeric_limits<double>::infinity();
        if (mask_size(c) <= cap_) {
          best = bic_node_score(table_, j, expand(c, j));
          ++scored_;
        }
        for (std::uint32_t rest = c; rest != 0; rest &= rest - 1) {
          const std::uint32_t smaller = c & ~(rest & -rest);
          best = std::min(best, bps[smaller]);
        }
        bps[c] = best;
      }
    }
    const std::size_t full = std::size_t{1} << p_;
    best_sink_.assign(full, std::numeric_limits<double>::infinity());
    best_sink_[0] = 0.0;
    for (std::size_t s = 1; s < full; ++s) {
      const auto set = static_cast<NodeMask>(s);
      double best = std::numeric_limits<double>::infinity();
      for (NodeMask rest = set; rest != 0; rest &= rest - 1) {
        const int j = __builtin_ctz(rest);
        const NodeMask without = set & ~(NodeMask{1} << j);
        best = std::min(best, best_sink_[without] + parent_bound(j, without));
      }
      best_sink_[s] = best;
    }
  }

  double optimum() const { return best_sink_.back(); }
  std::size_t scored() const { return scored_; }

  std::vector<Dag> optimal_dags() {
    tol_ = score_tie_tolerance(optimum());
    std::vector<Dag> out;
    for (const auto& parents : families(static_cast<NodeMask>(best_sink_.size() - 1)))
      out.push_back(Dag::from_parent_masks(parents));
    return sorted_unique(std::move(out));
  }

 private:
  using Family = std::vector<NodeMask>;

  double parent_bound(int j, NodeMask candidates) const {
    return best_parents_[static_cast<std::size_t>(j)][compress(candidates, j)];
  }

  // All parent sets of j inside `candidates` attaining the bound.
  const std::vector<NodeMask>& optimal_parent_sets(int j, NodeMask candidates) {
    const auto key = (static_cast<std::uint64_t>(j) << 32) | candidates;
    if (auto it = parent_memo_.find(key); it != parent_memo_.end()) return it->second;
    const double bound = parent_bound(j, candidates);
    std::set<NodeMask> found;
    if (mask_size(candidates) <= cap_ && bic_node_score(table_, j, candidates) <= bound + tol_)
      found.insert(candidates);
    for (NodeMask rest = candidates; rest != 0; rest &= rest - 1) {
      const NodeMask smaller = candidates & ~(rest & -rest);
      if (parent_bound(j, smaller) <= bound + tol_)
        for (NodeMask m : optimal_parent_sets(j, smaller)) found.insert(m);
    }
    return parent_memo_[key] = std::vector<NodeMask>(found.begin(), found.end());
  }

  // All optimal parent assignments for the nodes in `set`.
  const std::vector<Family>& families(NodeMask set) {
    if (auto it = family_memo_.find(set); it != family_memo_.end()) return it->second;
    std::set<Family> found;
    if (set == 0) {
      found.insert(Family(static_cast<std::size_t>(p_), 0));
    } else {
      for (NodeMask rest = set; rest != 0; rest &= rest - 1) {
        const int j = __builtin_ctz(rest);
        const NodeMask without = set & ~(NodeMask{1} << j);
        if (best_sink_[without] + parent_bound(j, without) > best_sink_[set] + tol_) continue;
        const auto parent_sets = optimal_parent_sets(j, without);
        for (const Family& base : families(without)) {
          for (NodeMask pa : parent_sets) {
            if (found.size() >= kMaxReportedOptima) break;
            Family f = base;
            f[static_cast<std::size_t>(j)] = pa;
            found.insert(std::move(f));
          }
        }
      }
    }
    return family_memo_[set] = std::vector<Family>(found.begin(), found.end());
  }

  const NodeScoreTable& table_;
  int p_;
  int cap_;
  std::size_t half_;
  std::size_t scored_ = 0;
  double tol_ = 0.0;
  std::vector<std::vector<double>> best_parents_;
  std::vector<double> best_sink_;
  std::unordered_map<std::uint64_t, std::vector<NodeMask>> parent_memo_;
  std::unordered_map<NodeMask, std::vector<Family>> family_memo_;
};

}  // namespace

double Criterion::value(const NodeScoreTable& table, const Dag& dag) const {
  return kind == Kind::Bic ? bic_score(table, dag) : eqvar::log_marginal(table, dag, g);
}

std::string to_string(SearchMethod method) {
  switch (method) {
    case SearchMethod::Exhaustive: return "exhaustive";
    case SearchMethod::Dp: return "dp";
    case SearchMethod::Greedy: return "greedy";
  }
  return "unknown";
}

double score_tie_tolerance(double score) { return 1e-10 * std::max(1.0, std::abs(score)); }

SearchResult exhaustive_best(const NodeScoreTable& table, const Criterion& criterion, int cap) {
  const auto start = Clock::now();
  SearchResult result;
  result.criterion = criterion;
  result.method = SearchMethod::Exhaustive;

  std::vector<std::pair<Dag, double>> scored;
  double best_utility = -std::numeric_limits<double>::infinity();
  enumerate_dags(
      table.p(),
      [&](const Dag& dag) {
        const double v = criterion.value(table, dag);
        best_utility = std::max(best_utility, criterion.utility(v));
        scored.emplace_back(dag, v);
      },
      cap);
  const double tol = score_tie_tolerance(best_utility);
  for (const auto& [dag, v] : scored)
    if (criterion.utility(v) >= best_utility - tol) result.best_dags.push_back(dag);
  result.best_score = criterion.value(table, result.best_dags.front());
  result.stats.candidates_scored = scored.size();
  result.stats.wall_seconds = seconds_since(start);
  return result;
}

int default_max_parents(int p) { return p <= 8 ? p - 1 : std::min(p - 1, 5); }

std::size_t dp_memory_estimate(int p, int max_parents) {
  if (max_parents < 0 || max_parents > p - 1) max_parents = p - 1;
  double table_entries = 0.0;
  for (int k = 0; k <= max_parents; ++k) table_entries += binomial(p - 1, k);
  table_entries *= p;
  const double bytes = table_entries * 48.0                  // hashed table entries
                       + p * std::ldexp(1.0, p - 1) * 8.0    // best parent bound per (node, set)
                       + std::ldexp(1.0, p) * 8.0;           // best sink chain per set
  return bytes >= static_cast<double>(std::numeric_limits<std::size_t>::max())
             ? std::numeric_limits<std::size_t>::max()
             : static_cast<std::size_t>(bytes);
}

SearchResult exact_dp_bic(const NodeScoreTable& table, int max_parents, std::size_t memory_budget) {
  const int p = table.p();
  if (max_parents < 0 || max_parents > p - 1) max_parents = p - 1;
  const std::size_t needed = dp_memory_estimate(p, max_parents);
  if (p > 30 || needed > memory_budget)
    throw Error(ErrorKind::ResourceCap,
                "exact DP on " + std::to_string(p) + " nodes needs about " + std::to_string(needed >> 20) +
                    " MiB, over the budget of " + std::to_string(memory_budget >> 20) +
                    " MiB; lower the parent cap, raise the budget, or use greedy search");

  const auto start = Clock::now();
  SubsetDp dp(table, max_parents);
  dp.run();

  SearchResult result;
  result.criterion = Criterion::bic();
  result.method = SearchMethod::Dp;
  result.best_dags = dp.optimal_dags();
  result.best_score = bic_score(table, result.best_dags.front());
  result.stats.candidates_scored = dp.scored();
  result.stats.wall_seconds = seconds_since(start);
  return result;
}

SearchResult greedy_hill_climb(const Dataset& data, NodeScoreTable& table, const Criterion& criterion,
                               const GreedyOptions& options) {
  const int p = data.p();
  if (table.p() != p || table.n() != data.n())
    throw Error(ErrorKind::InvalidInput, "score table does not belong to the dataset");
  if (options.restarts < 1) throw Error(ErrorKind::InvalidInput, "need at least one restart");
  const int cap = options.max_parents < 0 ? p - 1 : options.max_parents;
  const auto start = Clock::now();

  SearchResult result;
  result.criterion = criterion;
  result.method = SearchMethod::Greedy;
  result.stats.restarts = options.restarts;
  if (options.reference_score) result.stats.restarts_reaching_reference = 0;

  auto evaluate = [&](const Dag& dag) {
    for (int j = 0; j < p; ++j) table.ensure(data, j, dag.parent_mask(j));
    ++result.stats.candidates_scored;
    return criterion.utility(criterion.value(table, dag));
  };

  double best_utility = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<Dag, double>> optima;

  for (int r = 0; r < options.restarts; ++r) {
    Dag current = (r == 0 && options.initial)
                      ? *options.initial
                      : random_dag(p, options.start_edge_prob, derive_key(options.seed, {static_cast<std::uint64_t>(r)}));
    if (current.p() != p) throw Error(ErrorKind::InvalidInput, "initial DAG has the wrong size");
    double utility = evaluate(current);
    result.trajectory.push_back(utility);

    bool improved = true;
    while (improved) {
      improved = false;
      for (int from = 0; from < p && !improved; ++from) {
        for (int to = 0; to < p && !improved; ++to) {
          if (from == to) continue;
          // Candidate moves on the pair (from, to), in fixed order.
          for (int move = 0; move < 2 && !improved; ++move) {
            Dag next = current;
            if (current.has_edge(from, to)) {
              remove_edge(next, from, to);
              if (move == 1 && (mask_size(next.parent_mask(from)) >= cap || !try_add_edge(next, to, from)))
                continue;
            } else {
              if (move == 1 || mask_size(next.parent_mask(to)) >= cap || !try_add_edge(next, from, to)) continue;
            }
            if (!topological_order(next).consistent_with(next))
              throw Error(ErrorKind::Internal, "greedy move produced a cyclic graph");
            const double u = evaluate(next);
            if (u > utility + score_tie_tolerance(utility)) {
              current = std::move(next);
              utility = u;
              result.trajectory.push_back(utility);
              improved = true;
            }
          }
        }
      }
    }

    if (options.reference_score &&
        std::abs(criterion.utility(*options.reference_score) - utility) <= score_tie_tolerance(utility))
      ++*result.stats.restarts_reaching_reference;
    best_utility = std::max(best_utility, utility);
    optima.emplace_back(current, utility);
  }

  std::vector<Dag> best;
  for (const auto& [dag, u] : optima)
    if (u >= best_utility - score_tie_tolerance(best_utility)) best.push_back(dag);
  result.best_dags = sorted_unique(std::move(best));
  result.best_score = criterion.value(table, result.best_dags.front());
  result.stats.wall_seconds = seconds_since(start);
  return result;
}

}  // namespace eqvar
