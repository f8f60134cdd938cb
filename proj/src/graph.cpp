#include "eqvar/graph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "eqvar/error.hpp"

namespace eqvar {

std::vector<int> mask_to_nodes(NodeMask m) {
  std::vector<int> nodes;
  nodes.reserve(static_cast<std::size_t>(mask_size(m)));
  while (m != 0) {
    nodes.push_back(__builtin_ctz(m));
    m &= m - 1;
  }
  return nodes;
}

NodeMask nodes_to_mask(std::span<const int> nodes) {
  NodeMask m = 0;
  for (int j : nodes) {
    if (j < 0 || j >= kMaxNodes)
      throw Error(ErrorKind::InvalidInput, "node index out of range: " + std::to_string(j));
    m |= NodeMask{1} << j;
  }
  return m;
}

namespace {

NodeMask full_mask(int p) {
  return p >= 32 ? ~NodeMask{0} : (NodeMask{1} << p) - 1;
}

// Everything reachable from `start` in one or more steps.
NodeMask reach_from(std::span<const NodeMask> children, NodeMask start) {
  NodeMask reach = 0;
  NodeMask frontier = start;
  while (frontier != 0) {
    reach |= frontier;
    NodeMask next = 0;
    for (NodeMask f = frontier; f != 0; f &= f - 1)
      next |= children[static_cast<std::size_t>(__builtin_ctz(f))];
    frontier = next & ~reach;
  }
  return reach;
}

bool acyclic_children(std::span<const NodeMask> children) {
  const int p = static_cast<int>(children.size());
  NodeMask removed = 0;
  std::vector<int> indegree(static_cast<std::size_t>(p), 0);
  for (int i = 0; i < p; ++i)
    for (int k : mask_to_nodes(children[static_cast<std::size_t>(i)])) ++indegree[static_cast<std::size_t>(k)];
  for (int round = 0; round < p; ++round) {
    int source = -1;
    for (int i = 0; i < p && source < 0; ++i)
      if (!mask_contains(removed, i) && indegree[static_cast<std::size_t>(i)] == 0) source = i;
    if (source < 0) return false;
    removed |= NodeMask{1} << source;
    for (int k : mask_to_nodes(children[static_cast<std::size_t>(source)])) --indegree[static_cast<std::size_t>(k)];
  }
  return true;
}

std::vector<NodeMask> children_of(const std::vector<NodeMask>& parents) {
  std::vector<NodeMask> children(parents.size(), 0);
  for (std::size_t j = 0; j < parents.size(); ++j)
    for (int k : mask_to_nodes(parents[j])) children[static_cast<std::size_t>(k)] |= NodeMask{1} << j;
  return children;
}

}  // namespace

bool is_acyclic(const Adjacency& adjacency) {
  const int p = static_cast<int>(adjacency.size());
  if (p > kMaxNodes) throw Error(ErrorKind::InvalidInput, "too many nodes");
  std::vector<NodeMask> children(static_cast<std::size_t>(p), 0);
  for (int i = 0; i < p; ++i) {
    const auto& row = adjacency[static_cast<std::size_t>(i)];
    if (static_cast<int>(row.size()) != p) throw Error(ErrorKind::InvalidInput, "adjacency matrix is not square");
    if (row[static_cast<std::size_t>(i)])
      throw Error(ErrorKind::InvalidInput, "self-loop at node " + std::to_string(i));
    for (int k = 0; k < p; ++k)
      if (row[static_cast<std::size_t>(k)]) children[static_cast<std::size_t>(i)] |= NodeMask{1} << k;
  }
  return acyclic_children(children);
}

Dag::Dag(int p) {
  if (p < 1 || p > kMaxNodes)
    throw Error(ErrorKind::InvalidInput, "node count must be in [1, 32], got " + std::to_string(p));
  parents_.assign(static_cast<std::size_t>(p), 0);
}

Dag Dag::from_parent_masks(std::vector<NodeMask> parents) {
  const int p = static_cast<int>(parents.size());
  if (p < 1 || p > kMaxNodes)
    throw Error(ErrorKind::InvalidInput, "node count must be in [1, 32], got " + std::to_string(p));
  for (int j = 0; j < p; ++j) {
    const NodeMask m = parents[static_cast<std::size_t>(j)];
    if (mask_contains(m, j)) throw Error(ErrorKind::InvalidInput, "self-loop at node " + std::to_string(j));
    if ((m & ~full_mask(p)) != 0)
      throw Error(ErrorKind::InvalidInput, "parent index out of range at node " + std::to_string(j));
  }
  if (!acyclic_children(children_of(parents))) throw Error(ErrorKind::InvalidInput, "graph contains a cycle");
  return Dag(std::move(parents));
}

Dag Dag::from_edges(int p, std::span<const Edge> edges) {
  if (p < 1 || p > kMaxNodes)
    throw Error(ErrorKind::InvalidInput, "node count must be in [1, 32], got " + std::to_string(p));
  std::vector<NodeMask> parents(static_cast<std::size_t>(p), 0);
  for (const Edge& e : edges) {
    if (e.from < 0 || e.from >= p || e.to < 0 || e.to >= p)
      throw Error(ErrorKind::InvalidInput,
                  "edge " + std::to_string(e.from) + "->" + std::to_string(e.to) + " out of range");
    parents[static_cast<std::size_t>(e.to)] |= NodeMask{1} << e.from;
  }
  return from_parent_masks(std::move(parents));
}

int Dag::edge_count() const {
  int total = 0;
  for (NodeMask m : parents_) total += mask_size(m);
  return total;
}

std::vector<Edge> Dag::edges() const {
  std::vector<Edge> out;
  for (int i = 0; i < p(); ++i)
    for (int k : mask_to_nodes(child_mask(i))) out.push_back({i, k});
  return out;
}

NodeMask Dag::child_mask(int i) const {
  NodeMask m = 0;
  for (int j = 0; j < p(); ++j)
    if (has_edge(i, j)) m |= NodeMask{1} << j;
  return m;
}

std::uint64_t Dag::canonical_code() const {
  if (p() > 8) throw Error(ErrorKind::InvalidInput, "canonical code requires p <= 8");
  std::uint64_t code = 0;
  for (int i = 0; i < p(); ++i) code |= std::uint64_t{child_mask(i)} << (i * p());
  return code;
}

bool canonical_less(const Dag& a, const Dag& b) {
  if (a.p() != b.p()) return a.p() < b.p();
  for (int i = a.p() - 1; i >= 0; --i) {
    const NodeMask ra = a.child_mask(i);
    const NodeMask rb = b.child_mask(i);
    if (ra != rb) return ra < rb;
  }
  return false;
}

CausalOrder::CausalOrder(std::vector<int> order) : order_(std::move(order)) {
  const int p = static_cast<int>(order_.size());
  position_.assign(order_.size(), -1);
  for (int k = 0; k < p; ++k) {
    const int j = order_[static_cast<std::size_t>(k)];
    if (j < 0 || j >= p || position_[static_cast<std::size_t>(j)] != -1)
      throw Error(ErrorKind::InvalidInput, "causal order is not a permutation");
    position_[static_cast<std::size_t>(j)] = k;
  }
}

CausalOrder CausalOrder::identity(int p) {
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  return CausalOrder(std::move(order));
}

bool CausalOrder::consistent_with(const Dag& dag) const {
  if (dag.p() != p()) return false;
  for (int j = 0; j < p(); ++j)
    for (int k : dag.parents(j))
      if (position_of(k) >= position_of(j)) return false;
  return true;
}

CausalOrder topological_order(const Dag& dag) {
  const int p = dag.p();
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(p));
  NodeMask placed = 0;
  while (static_cast<int>(order.size()) < p) {
    int next = -1;
    for (int j = 0; j < p; ++j) {
      if (!mask_contains(placed, j) && (dag.parent_mask(j) & ~placed) == 0) {
        next = j;
        break;
      }
    }
    if (next < 0) throw Error(ErrorKind::Internal, "cycle detected in a Dag");
    placed |= NodeMask{1} << next;
    order.push_back(next);
  }
  return CausalOrder(std::move(order));
}

bool is_supergraph(const Dag& super, const Dag& sub) {
  if (super.p() != sub.p()) throw Error(ErrorKind::InvalidInput, "node counts differ");
  for (int j = 0; j < sub.p(); ++j)
    if ((sub.parent_mask(j) & ~super.parent_mask(j)) != 0) return false;
  return true;
}

NodeMask nd_under_order(const CausalOrder& order, int j) {
  if (j < 0 || j >= order.p()) throw Error(ErrorKind::InvalidInput, "node index out of range");
  NodeMask m = 0;
  for (int k = 0; k < order.position_of(j); ++k) m |= NodeMask{1} << order.at(k);
  return m;
}

Dag complete_dag_from_order(const CausalOrder& order) {
  std::vector<NodeMask> parents(static_cast<std::size_t>(order.p()));
  for (int j = 0; j < order.p(); ++j) parents[static_cast<std::size_t>(j)] = nd_under_order(order, j);
  return Dag::from_parent_masks(std::move(parents));
}

void enumerate_dags(int p, const std::function<void(const Dag&)>& visit, int cap) {
  if (p < 1) throw Error(ErrorKind::InvalidInput, "node count must be positive");
  if (p > cap)
    throw Error(ErrorKind::ResourceCap, "enumeration of DAGs on " + std::to_string(p) +
                                            " nodes exceeds the cap of " + std::to_string(cap));
  // Rows are fixed from the most significant (node p-1) down to node 0, each
  // in ascending order, which yields ascending row-major codes. A cycle is
  // rejected as soon as its smallest node's row is fixed.
  std::vector<NodeMask> children(static_cast<std::size_t>(p), 0);
  const NodeMask rows = full_mask(p);
  std::function<void(int)> fill = [&](int i) {
    if (i < 0) {
      std::vector<NodeMask> parents(static_cast<std::size_t>(p), 0);
      for (int a = 0; a < p; ++a)
        for (int b : mask_to_nodes(children[static_cast<std::size_t>(a)]))
          parents[static_cast<std::size_t>(b)] |= NodeMask{1} << a;
      visit(Dag(std::move(parents)));
      return;
    }
    const NodeMask self = NodeMask{1} << i;
    for (NodeMask row = 0;; ++row) {
      if ((row & self) == 0) {
        children[static_cast<std::size_t>(i)] = row;
        if (!mask_contains(reach_from(children, row), i)) fill(i - 1);
      }
      if (row == rows) break;
    }
    children[static_cast<std::size_t>(i)] = 0;
  };
  fill(p - 1);
}

std::vector<Dag> all_dags(int p, int cap) {
  std::vector<Dag> out;
  enumerate_dags(p, [&](const Dag& d) { out.push_back(d); }, cap);
  return out;
}

std::vector<CausalOrder> all_orders(int p) {
  std::vector<int> perm(static_cast<std::size_t>(p));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<CausalOrder> out;
  do {
    out.emplace_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

bool reachable(const Dag& dag, int from, int to) {
  std::vector<NodeMask> children(static_cast<std::size_t>(dag.p()));
  for (int i = 0; i < dag.p(); ++i) children[static_cast<std::size_t>(i)] = dag.child_mask(i);
  return mask_contains(reach_from(children, children[static_cast<std::size_t>(from)]), to);
}

bool try_add_edge(Dag& dag, int from, int to) {
  if (from == to || dag.has_edge(from, to)) return false;
  if (reachable(dag, to, from)) return false;
  dag.parents_[static_cast<std::size_t>(to)] |= NodeMask{1} << from;
  return true;
}

void remove_edge(Dag& dag, int from, int to) {
  dag.parents_[static_cast<std::size_t>(to)] &= ~(NodeMask{1} << from);
}

}  // namespace eqvar
