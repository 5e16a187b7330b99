#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "amod/netgraph.hpp"

namespace oracle {

using amod::EdgeIndex;
using amod::NodeIndex;
using amod::RoadNetwork;

// Minimum over all simple paths of the left-to-right sum of edge costs.
inline std::optional<double> min_simple_path_cost(const RoadNetwork& g, const std::vector<double>& cost,
                                                  NodeIndex from, NodeIndex to) {
  std::optional<double> best;
  std::vector<char> on(g.node_count(), 0);
  std::function<void(NodeIndex, double)> dfs = [&](NodeIndex v, double acc) {
    if (v == to) {
      if (!best || acc < *best) best = acc;
      return;
    }
    on[v] = 1;
    for (EdgeIndex e : g.out_edges(v)) {
      const NodeIndex w = g.edge(e).to;
      if (!on[w]) dfs(w, acc + cost[e]);
    }
    on[v] = 0;
  };
  dfs(from, 0.0);
  return best;
}

// Every simple path with its cost, for tie-break checks.
inline std::vector<std::pair<double, std::vector<NodeIndex>>> all_simple_paths(const RoadNetwork& g,
                                                                               const std::vector<double>& cost,
                                                                               NodeIndex from, NodeIndex to) {
  std::vector<std::pair<double, std::vector<NodeIndex>>> out;
  std::vector<NodeIndex> path = {from};
  std::vector<char> on(g.node_count(), 0);
  std::function<void(NodeIndex, double)> dfs = [&](NodeIndex v, double acc) {
    if (v == to) {
      out.push_back({acc, path});
      return;
    }
    on[v] = 1;
    for (EdgeIndex e : g.out_edges(v)) {
      const NodeIndex w = g.edge(e).to;
      if (on[w]) continue;
      path.push_back(w);
      dfs(w, acc + cost[e]);
      path.pop_back();
    }
    on[v] = 0;
  };
  dfs(from, 0.0);
  return out;
}

// Edmonds-Karp on a dense capacity matrix.
inline double max_flow(std::vector<std::vector<double>> cap, std::size_t s, std::size_t t) {
  const std::size_t n = cap.size();
  double total = 0.0;
  for (;;) {
    std::vector<std::size_t> parent(n, SIZE_MAX);
    parent[s] = s;
    std::deque<std::size_t> q = {s};
    while (!q.empty() && parent[t] == SIZE_MAX) {
      const std::size_t u = q.front();
      q.pop_front();
      for (std::size_t v = 0; v < n; ++v)
        if (parent[v] == SIZE_MAX && cap[u][v] > 1e-12) {
          parent[v] = u;
          q.push_back(v);
        }
    }
    if (parent[t] == SIZE_MAX) return total;
    double push = std::numeric_limits<double>::infinity();
    for (std::size_t v = t; v != s; v = parent[v]) push = std::min(push, cap[parent[v]][v]);
    for (std::size_t v = t; v != s; v = parent[v]) {
      cap[parent[v]][v] -= push;
      cap[v][parent[v]] += push;
    }
    total += push;
  }
}

// Capacity matrix of a network plus two extra slots for a super source and sink.
inline std::vector<std::vector<double>> capacity_matrix(const RoadNetwork& g, const std::vector<double>& caps,
                                                        std::size_t extra = 0) {
  const std::size_t n = g.node_count() + extra;
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (EdgeIndex e = 0; e < g.edge_count(); ++e) m[g.edge(e).from][g.edge(e).to] += caps[e];
  return m;
}

inline double bpr(double t, double f, double c) {
  const double r = f / c;
  return t * (1.0 + 0.15 * r * r * r * r);
}

}  // namespace oracle
