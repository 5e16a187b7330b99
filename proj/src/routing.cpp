#include "amod/routing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

#include "amod/error.hpp"

namespace amod {

namespace {

constexpr double kInfinityTime = std::numeric_limits<double>::infinity();

}  // namespace

double bpr_delay(double t_free, double flow, double capacity, const BprParams& params) {
  if (!(capacity > 0.0)) throw InputError("bpr_delay: capacity must be positive");
  if (flow < 0.0) throw InputError("bpr_delay: negative flow");
  if (flow == 0.0) return t_free;
  const double ratio = flow / capacity;
  return t_free * (1.0 + params.alpha * std::pow(ratio, params.beta));
}

std::vector<double> edge_delays(const RoadNetwork& network, const EdgeLoad& loads, const BprParams& params) {
  std::vector<double> delay(network.edge_count());
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    const Edge& edge = network.edge(e);
    const double f = loads.empty() ? 0.0 : loads[e];
    if (std::isinf(edge.capacity)) {
      delay[e] = edge.free_flow_time;
    } else {
      delay[e] = bpr_delay(edge.free_flow_time, f, edge.capacity, params);
    }
  }
  return delay;
}

namespace {

using QueueItem = std::pair<double, NodeIndex>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

std::vector<double> reverse_free_flow(const RoadNetwork& network, NodeIndex target) {
  std::vector<double> dist(network.node_count(), kInfinityTime);
  MinQueue queue;
  dist[target] = 0.0;
  queue.push({0.0, target});
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (EdgeIndex e : network.in_edges(v)) {
      const Edge& edge = network.edge(e);
      const double nd = edge.free_flow_time + d;
      if (nd < dist[edge.from]) {
        dist[edge.from] = nd;
        queue.push({nd, edge.from});
      }
    }
  }
  return dist;
}

// Fastest straight-line speed over all edges; infinity if some edge of
// positive length has zero time.
double max_edge_speed(const RoadNetwork& network) {
  double vmax = 0.0;
  for (const Edge& e : network.edges()) {
    const Point& a = *network.position(e.from);
    const Point& b = *network.position(e.to);
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0.0) continue;
    if (e.free_flow_time <= 0.0) return kInfinityTime;
    vmax = std::max(vmax, len / e.free_flow_time);
  }
  return vmax;
}

// Shaves a relative hair off the heuristic so rounding in its own sums can
// never make it overestimate.
constexpr double kHeuristicShave = 1.0 - 1e-12;

}  // namespace

const std::vector<double>& FreeFlowOracle::to_target(NodeIndex target) {
  auto it = cache_.find(target);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(target, reverse_free_flow(*network_, target)).first->second;
}

Route astar_route(const RoadNetwork& network, const EdgeLoad& loads, NodeIndex origin, NodeIndex dest,
                  const RouteOptions& options) {
  const std::size_t n = network.node_count();
  if (origin >= n || dest >= n) throw InputError("astar_route: unknown node");
  if (!loads.empty() && loads.size() != network.edge_count())
    throw InputError("astar_route: load vector size does not match edge count");

  Heuristic kind = options.heuristic;
  if (kind == Heuristic::Auto) {
    if (options.oracle) {
      kind = Heuristic::FreeFlow;
    } else if (network.has_coordinates()) {
      kind = Heuristic::Euclidean;
    } else {
      kind = Heuristic::Zero;
    }
  }
  std::function<double(NodeIndex)> h = [](NodeIndex) { return 0.0; };
  if (kind == Heuristic::FreeFlow) {
    if (!options.oracle) throw InputError("astar_route: free-flow heuristic needs an oracle");
    const std::vector<double>* table = &options.oracle->to_target(dest);
    if (std::isinf((*table)[origin])) throw NoRouteError("no route from " + network.node_id(origin) +
                                                         " to " + network.node_id(dest));
    h = [table](NodeIndex v) { return std::isinf((*table)[v]) ? kInfinityTime : (*table)[v] * kHeuristicShave; };
  } else if (kind == Heuristic::Euclidean) {
    if (!network.has_coordinates()) throw InputError("astar_route: straight-line heuristic needs coordinates");
    const double vmax = max_edge_speed(network);
    const Point goal = *network.position(dest);
    if (vmax > 0.0 && std::isfinite(vmax)) {
      h = [&network, goal, vmax](NodeIndex v) {
        const Point& p = *network.position(v);
        return std::hypot(p.x - goal.x, p.y - goal.y) / vmax * kHeuristicShave;
      };
    }
  }

  const std::vector<double> delay = edge_delays(network, loads, options.bpr);
  std::vector<double> g(n, kInfinityTime);
  MinQueue open;
  g[origin] = 0.0;
  open.push({h(origin), origin});
  double best = kInfinityTime;
  // Settle every node whose f does not exceed the optimum so that all
  // equal-cost alternatives have exact labels for the tie-break below.
  while (!open.empty()) {
    auto [f, v] = open.top();
    if (f > best) break;
    open.pop();
    if (f > g[v] + h(v)) continue;  // stale entry
    if (v == dest) {
      best = std::min(best, g[v]);
      continue;
    }
    for (EdgeIndex e : network.out_edges(v)) {
      const Edge& edge = network.edge(e);
      const double ng = g[v] + delay[e];
      if (ng < g[edge.to]) {
        g[edge.to] = ng;
        const double hv = h(edge.to);
        if (std::isinf(hv)) continue;
        open.push({ng + hv, edge.to});
      }
    }
  }
  if (std::isinf(g[dest])) {
    throw NoRouteError("no route from " + network.node_id(origin) + " to " + network.node_id(dest));
  }

  // Nodes lying on some optimal path: backward closure from dest over tight edges.
  std::vector<char> on_path(n, 0);
  std::vector<NodeIndex> stack = {dest};
  on_path[dest] = 1;
  while (!stack.empty()) {
    const NodeIndex v = stack.back();
    stack.pop_back();
    for (EdgeIndex e : network.in_edges(v)) {
      const NodeIndex u = network.edge(e).from;
      if (on_path[u] || std::isinf(g[u])) continue;
      if (g[u] + delay[e] == g[v]) {
        on_path[u] = 1;
        stack.push_back(u);
      }
    }
  }

  // Depth-first in increasing successor id yields the lexicographically
  // smallest simple tight path.
  Route route;
  std::vector<char> visited(n, 0);
  std::function<bool(NodeIndex)> extend = [&](NodeIndex v) -> bool {
    route.nodes.push_back(v);
    visited[v] = 1;
    if (v == dest) return true;
    std::vector<std::pair<NodeIndex, EdgeIndex>> next;
    for (EdgeIndex e : network.out_edges(v)) {
      const NodeIndex w = network.edge(e).to;
      if (on_path[w] && !visited[w] && g[v] + delay[e] == g[w]) next.push_back({w, e});
    }
    std::sort(next.begin(), next.end());
    for (auto [w, e] : next) {
      route.edges.push_back(e);
      if (extend(w)) return true;
      route.edges.pop_back();
    }
    route.nodes.pop_back();
    visited[v] = 0;
    return false;
  };
  if (!extend(origin)) throw NumericalError("astar_route: optimal path reconstruction failed");
  for (EdgeIndex e : route.edges) route.time += delay[e];
  return route;
}

}  // namespace amod
