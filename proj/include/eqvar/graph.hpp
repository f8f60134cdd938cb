#pragma once

// DAG representation over at most 32 nodes. Node sets are bitmasks; node j
// corresponds to bit j and to column j of a dataset.

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace eqvar {

using NodeMask = std::uint32_t;

inline constexpr int kMaxNodes = 32;
inline constexpr int kDefaultEnumerationCap = 6;

inline int mask_size(NodeMask m) { return __builtin_popcount(m); }
inline bool mask_contains(NodeMask m, int j) { return (m >> j) & 1U; }
std::vector<int> mask_to_nodes(NodeMask m);
NodeMask nodes_to_mask(std::span<const int> nodes);

struct Edge {
  int from;
  int to;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Dense boolean adjacency, adjacency[from][to].
using Adjacency = std::vector<std::vector<bool>>;

bool is_acyclic(const Adjacency& adjacency);

class Dag {
 public:
  /// Empty graph on p nodes.
  explicit Dag(int p);

  /// Throws InvalidInput on self-loops, out-of-range masks, or cycles.
  static Dag from_parent_masks(std::vector<NodeMask> parents);
  static Dag from_edges(int p, std::span<const Edge> edges);

  int p() const { return static_cast<int>(parents_.size()); }
  NodeMask parent_mask(int j) const { return parents_[static_cast<std::size_t>(j)]; }
  std::vector<int> parents(int j) const { return mask_to_nodes(parent_mask(j)); }
  const std::vector<NodeMask>& parent_masks() const { return parents_; }
  bool has_edge(int from, int to) const { return mask_contains(parent_mask(to), from); }

  int edge_count() const;
  /// Lexicographically sorted.
  std::vector<Edge> edges() const;
  /// Children of node i, i.e. row i of the adjacency matrix.
  NodeMask child_mask(int i) const;

  /// Row-major adjacency bitmask (bit i*p+k set iff i->k); requires p <= 8.
  std::uint64_t canonical_code() const;

  friend bool operator==(const Dag&, const Dag&) = default;

 private:
  explicit Dag(std::vector<NodeMask> parents) : parents_(std::move(parents)) {}
  std::vector<NodeMask> parents_;

  friend bool try_add_edge(Dag& dag, int from, int to);
  friend void remove_edge(Dag& dag, int from, int to);
  friend void enumerate_dags(int p, const std::function<void(const Dag&)>& visit, int cap);
};

/// Canonical ordering: ascending value of the row-major adjacency bitmask.
/// Works for any p, not only those whose code fits in 64 bits.
bool canonical_less(const Dag& a, const Dag& b);

struct CanonicalLess {
  bool operator()(const Dag& a, const Dag& b) const { return canonical_less(a, b); }
};

class CausalOrder {
 public:
  /// Throws InvalidInput unless order is a permutation of 0..p-1.
  explicit CausalOrder(std::vector<int> order);
  static CausalOrder identity(int p);

  int p() const { return static_cast<int>(order_.size()); }
  const std::vector<int>& order() const { return order_; }
  const std::vector<int>& position() const { return position_; }
  int at(int k) const { return order_[static_cast<std::size_t>(k)]; }
  int position_of(int j) const { return position_[static_cast<std::size_t>(j)]; }

  bool consistent_with(const Dag& dag) const;

  friend bool operator==(const CausalOrder& a, const CausalOrder& b) { return a.order_ == b.order_; }

 private:
  std::vector<int> order_;
  std::vector<int> position_;
};

/// Kahn peeling; among available sources the smallest index goes first.
CausalOrder topological_order(const Dag& dag);

/// True iff every edge of `sub` is present in `super`.
bool is_supergraph(const Dag& super, const Dag& sub);

/// Nodes strictly preceding j in the order.
NodeMask nd_under_order(const CausalOrder& order, int j);

Dag complete_dag_from_order(const CausalOrder& order);

/// Visits every DAG on p nodes exactly once in canonical order. Throws
/// ResourceCap when p exceeds `cap`.
void enumerate_dags(int p, const std::function<void(const Dag&)>& visit,
                    int cap = kDefaultEnumerationCap);
std::vector<Dag> all_dags(int p, int cap = kDefaultEnumerationCap);

/// All p! orders in lexicographic order.
std::vector<CausalOrder> all_orders(int p);

/// Adds edge from->to; returns false (leaving dag untouched) if that would
/// create a cycle or a self-loop.
bool try_add_edge(Dag& dag, int from, int to);
void remove_edge(Dag& dag, int from, int to);
/// True iff `to` is reachable from `from` along directed edges.
bool reachable(const Dag& dag, int from, int to);

}  // namespace eqvar
