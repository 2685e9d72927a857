#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <vector>

#include "pcoord/error.hpp"

namespace pcoord {

/// Undirected graph over at most 64 vertices stored as adjacency bitsets.
/// Vertices carry an external id (a platoon id in practice).
class CompatibilityGraph {
 public:
  static constexpr int kMaxVertices = 64;

  CompatibilityGraph() = default;
  explicit CompatibilityGraph(std::vector<int> ids) : ids_(std::move(ids)), adj_(ids_.size(), 0) {
    if (ids_.size() > kMaxVertices) throw CapacityError("compatibility graph limited to 64 vertices");
  }

  int size() const { return static_cast<int>(ids_.size()); }
  int id(int vertex) const { return ids_.at(vertex); }
  const std::vector<int>& ids() const { return ids_; }

  void connect(int i, int j) {
    if (i == j) return;
    adj_.at(i) |= bit(j);
    adj_.at(j) |= bit(i);
  }

  bool adjacent(int i, int j) const { return (adj_.at(i) >> j) & 1u; }
  std::uint64_t neighbours(int i) const { return adj_.at(i); }

  bool is_clique(const std::vector<int>& vertices) const {
    for (std::size_t a = 0; a < vertices.size(); ++a)
      for (std::size_t b = a + 1; b < vertices.size(); ++b)
        if (!adjacent(vertices[a], vertices[b])) return false;
    return true;
  }

  static std::uint64_t bit(int i) { return std::uint64_t{1} << i; }

 private:
  std::vector<int> ids_;
  std::vector<std::uint64_t> adj_;
};

namespace detail {

// Bron-Kerbosch with Tomita pivoting over bitsets.
inline void bron_kerbosch(const CompatibilityGraph& g, std::uint64_t r, std::uint64_t p, std::uint64_t x,
                          std::vector<std::uint64_t>& out) {
  if (p == 0 && x == 0) {
    out.push_back(r);
    return;
  }
  std::uint64_t px = p | x;
  int pivot = -1;
  int best = -1;
  while (px) {
    const int u = std::countr_zero(px);
    px &= px - 1;
    const int deg = std::popcount(p & g.neighbours(u));
    if (deg > best) {
      best = deg;
      pivot = u;
    }
  }
  std::uint64_t candidates = p & ~g.neighbours(pivot);
  while (candidates) {
    const int v = std::countr_zero(candidates);
    candidates &= candidates - 1;
    const std::uint64_t nv = g.neighbours(v);
    bron_kerbosch(g, r | CompatibilityGraph::bit(v), p & nv, x & nv, out);
    p &= ~CompatibilityGraph::bit(v);
    x |= CompatibilityGraph::bit(v);
  }
}

}  // namespace detail

/// All maximal cliques, as sorted vertex-index lists in lexicographic order.
/// Isolated vertices come back as singletons.
inline std::vector<std::vector<int>> enumerate_maximal_cliques(const CompatibilityGraph& graph,
                                                               int vertex_cap = CompatibilityGraph::kMaxVertices) {
  if (graph.size() > vertex_cap) throw CapacityError("compatibility graph exceeds the configured vertex cap");
  std::vector<std::uint64_t> sets;
  if (graph.size() == 0) return {};
  const std::uint64_t all = graph.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << graph.size()) - 1;
  detail::bron_kerbosch(graph, 0, all, 0, sets);

  std::vector<std::vector<int>> cliques;
  cliques.reserve(sets.size());
  for (std::uint64_t s : sets) {
    std::vector<int> c;
    while (s) {
      c.push_back(std::countr_zero(s));
      s &= s - 1;
    }
    cliques.push_back(std::move(c));
  }
  std::sort(cliques.begin(), cliques.end());
  return cliques;
}

}  // namespace pcoord
