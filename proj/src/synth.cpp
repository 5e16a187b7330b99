#include "amod/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "amod/error.hpp"

namespace amod {

namespace {

void add_capacity(RoadNetwork& net, NodeIndex u, NodeIndex v, double capacity, double time) {
  if (auto e = net.find_edge(u, v)) {
    net.set_capacity(*e, net.edge(*e).capacity + capacity);
  } else {
    net.add_edge(u, v, capacity, time);
  }
}

std::vector<NodeIndex> shuffled(Rng& rng, std::size_t n) {
  std::vector<NodeIndex> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

RoadNetwork circle_nodes(std::size_t n) {
  RoadNetwork net;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    net.add_node("v" + std::to_string(i), Point{1000.0 * std::cos(a), 1000.0 * std::sin(a)});
  }
  return net;
}

}  // namespace

RoadNetwork make_grid(const GridSpec& shape) {
  if (shape.width < 1 || shape.height < 1) throw InputError("grid dimensions must be positive");
  if (!(shape.capacity > 0.0) || !(shape.free_flow_speed > 0.0) || !(shape.spacing_m > 0.0))
    throw InputError("grid capacity, speed and spacing must be positive");
  RoadNetwork net;
  for (int y = 0; y < shape.height; ++y)
    for (int x = 0; x < shape.width; ++x)
      net.add_node(std::to_string(x) + "_" + std::to_string(y), Point{x * shape.spacing_m, y * shape.spacing_m});
  const double t = shape.spacing_m / shape.free_flow_speed;
  auto id = [&](int x, int y) { return static_cast<NodeIndex>(y * shape.width + x); };
  for (int y = 0; y < shape.height; ++y) {
    for (int x = 0; x < shape.width; ++x) {
      if (x + 1 < shape.width) {
        net.add_edge(id(x, y), id(x + 1, y), shape.capacity, t);
        net.add_edge(id(x + 1, y), id(x, y), shape.capacity, t);
      }
      if (y + 1 < shape.height) {
        net.add_edge(id(x, y), id(x, y + 1), shape.capacity, t);
        net.add_edge(id(x, y + 1), id(x, y), shape.capacity, t);
      }
    }
  }
  return net;
}

RoadNetwork random_symmetric_network(Rng& rng, std::size_t nodes, std::size_t extra_cycles, int max_capacity) {
  if (nodes < 2) throw InputError("need at least two nodes");
  RoadNetwork net = circle_nodes(nodes);
  auto add_cycle = [&](const std::vector<NodeIndex>& cyc) {
    const double c = static_cast<double>(rng.between(1, max_capacity));
    for (std::size_t i = 0; i < cyc.size(); ++i)
      add_capacity(net, cyc[i], cyc[(i + 1) % cyc.size()], c, static_cast<double>(rng.between(1, 10)));
  };
  add_cycle(shuffled(rng, nodes));
  for (std::size_t k = 0; k < extra_cycles; ++k) {
    auto order = shuffled(rng, nodes);
    order.resize(2 + rng.below(nodes - 1));
    add_cycle(order);
  }
  return net;
}

RoadNetwork random_network(Rng& rng, std::size_t nodes, double edge_probability, int max_capacity) {
  if (nodes < 2) throw InputError("need at least two nodes");
  RoadNetwork net = circle_nodes(nodes);
  auto cap = [&] { return static_cast<double>(rng.between(1, max_capacity)); };
  auto time = [&] { return static_cast<double>(rng.between(1, 10)); };
  const auto ring = shuffled(rng, nodes);
  for (std::size_t i = 0; i < nodes; ++i) net.add_edge(ring[i], ring[(i + 1) % nodes], cap(), time());
  for (NodeIndex u = 0; u < nodes; ++u)
    for (NodeIndex v = 0; v < nodes; ++v)
      if (u != v && !net.find_edge(u, v) && rng.uniform() < edge_probability) net.add_edge(u, v, cap(), time());
  return net;
}

CustomerInstance random_feasible_demand(const RoadNetwork& network, Rng& rng, std::size_t requests, int max_rate) {
  const std::size_t n = network.node_count();
  std::vector<double> residual(network.edge_count());
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) residual[e] = network.edge(e).capacity;
  CustomerInstance inst;
  std::vector<EdgeIndex> parent(n);
  for (std::size_t attempt = 0; inst.requests.size() < requests && attempt < 20 * requests; ++attempt) {
    const NodeIndex o = rng.below(n);
    NodeIndex d = rng.below(n - 1);
    if (d >= o) ++d;
    std::fill(parent.begin(), parent.end(), network.edge_count());
    std::vector<char> seen(n, 0);
    std::deque<NodeIndex> queue = {o};
    seen[o] = 1;
    while (!queue.empty() && !seen[d]) {
      const NodeIndex v = queue.front();
      queue.pop_front();
      for (EdgeIndex e : network.out_edges(v)) {
        const NodeIndex w = network.edge(e).to;
        if (seen[w] || residual[e] < 1.0) continue;
        seen[w] = 1;
        parent[w] = e;
        queue.push_back(w);
      }
    }
    if (!seen[d]) continue;
    double rate = static_cast<double>(rng.between(1, max_rate));
    for (NodeIndex v = d; v != o; v = network.edge(parent[v]).from) rate = std::min(rate, residual[parent[v]]);
    std::vector<double> flow(network.edge_count(), 0.0);
    for (NodeIndex v = d; v != o; v = network.edge(parent[v]).from) {
      residual[parent[v]] -= rate;
      flow[parent[v]] = rate;
    }
    inst.requests.push_back({o, d, rate});
    inst.flows.customer.push_back(std::move(flow));
  }
  inst.flows.rebalancing.assign(network.edge_count(), 0.0);
  return inst;
}

TripStream make_trips(const RoadNetwork& network, const TripSpec& plan) {
  const std::size_t n = network.node_count();
  if (n < 2) throw InputError("need at least two nodes for trips");
  Rng rng(plan.seed);
  std::vector<NodeIndex> southwest, northeast;
  if (plan.imbalance > 0.0) {
    if (!network.has_coordinates()) throw InputError("imbalanced trips need node coordinates");
    double minx = INFINITY, maxx = -INFINITY, miny = INFINITY, maxy = -INFINITY;
    for (NodeIndex v = 0; v < n; ++v) {
      const Point& p = *network.position(v);
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
    const double midx = 0.5 * (minx + maxx), midy = 0.5 * (miny + maxy);
    for (NodeIndex v = 0; v < n; ++v) {
      const Point& p = *network.position(v);
      if (p.x < midx && p.y < midy) southwest.push_back(v);
      if (p.x > midx && p.y > midy) northeast.push_back(v);
    }
    if (southwest.empty() || northeast.empty()) throw InputError("network too small for imbalanced trips");
  }
  TripStream trips;
  trips.reserve(plan.count);
  for (std::size_t i = 0; i < plan.count; ++i) {
    Trip t;
    t.arrival = std::floor(rng.uniform(0.0, plan.duration_s));
    if (plan.imbalance > 0.0 && rng.uniform() < plan.imbalance) {
      t.origin = southwest[rng.below(southwest.size())];
      t.dest = northeast[rng.below(northeast.size())];
    } else {
      t.origin = rng.below(n);
      t.dest = rng.below(n - 1);
      if (t.dest >= t.origin) ++t.dest;
    }
    trips.push_back(t);
  }
  std::stable_sort(trips.begin(), trips.end(), [](const Trip& a, const Trip& b) { return a.arrival < b.arrival; });
  return trips;
}

}  // namespace amod
