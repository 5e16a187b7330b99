#include "amod/rebalance.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>

#include "amod/crrp.hpp"
#include "amod/error.hpp"
#include "amod/lp.hpp"

namespace amod {

namespace {

struct NodeRoles {
  std::vector<char> origin, dest;
  std::vector<double> supply;  // rates leaving minus rates ending at the node
};

NodeRoles roles(std::size_t n, const RequestSet& requests) {
  NodeRoles r{std::vector<char>(n, 0), std::vector<char>(n, 0), std::vector<double>(n, 0.0)};
  for (const Request& q : requests) {
    r.origin[q.origin] = 1;
    r.dest[q.dest] = 1;
    r.supply[q.origin] += q.rate;
    r.supply[q.dest] -= q.rate;
  }
  return r;
}

// in_R + sum of rates ending at v - out_R - sum of rates leaving v.
std::vector<double> rebalancing_surplus(const RoadNetwork& network, const NodeRoles& r,
                                        std::span<const double> flow) {
  std::vector<double> b(network.node_count(), 0.0);
  for (NodeIndex v = 0; v < network.node_count(); ++v) b[v] = -r.supply[v];
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    b[network.edge(e).to] += flow[e];
    b[network.edge(e).from] -= flow[e];
  }
  return b;
}

DefectiveSets classify(const RoadNetwork& network, const RequestSet& requests, const FlowAssignment& customer,
                       std::span<const double> partial, double tol) {
  const std::size_t n = network.node_count();
  if (partial.size() != network.edge_count()) throw InputError("rebalancing flow has wrong edge count");
  const NodeRoles r = roles(n, requests);
  for (NodeIndex v = 0; v < n; ++v)
    if (r.origin[v] && r.dest[v])
      throw InputError("node " + network.node_id(v) + " is both an origin and a destination; split it first");
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    if (partial[e] < -tol) throw InputError("negative rebalancing flow");
    if (customer.customer_total(e) + partial[e] > network.edge(e).capacity + tol)
      throw InputError("rebalancing flow overruns capacity on edge " + std::to_string(e));
  }
  const std::vector<double> b = rebalancing_surplus(network, r, partial);
  DefectiveSets sets;
  for (NodeIndex v = 0; v < n; ++v) {
    if (r.origin[v]) {
      if (b[v] > tol) throw InputError("origin " + network.node_id(v) + " receives too much rebalancing flow");
      if (b[v] < -tol) sets.origins.push_back(v);
    } else if (r.dest[v]) {
      if (b[v] < -tol) throw InputError("destination " + network.node_id(v) + " sends too much rebalancing flow");
      if (b[v] > tol) sets.destinations.push_back(v);
    } else if (std::abs(b[v]) > tol) {
      throw InputError("rebalancing flow is not conserved at " + network.node_id(v));
    }
  }
  return sets;
}

}  // namespace

DefectiveSets find_defective(const RoadNetwork& network, const RequestSet& requests,
                             const FlowAssignment& customer_flows, std::span<const double> partial,
                             double tolerance) {
  return classify(network, requests, customer_flows, partial, tolerance);
}

RebalancingOutcome construct_rebalancing_flow(const RoadNetwork& network, const RequestSet& requests,
                                              const FlowAssignment& customer_flows, const AugmentObserver& observer) {
  require_valid(network, requests);
  {
    FlowAssignment check = customer_flows;
    check.rebalancing.assign(network.edge_count(), 0.0);
    const FeasibilityReport rep = verify_flows(network, requests, check, kSaturationTolerance);
    if (!rep.customer_ok()) throw InputError("customer flows are not feasible");
  }
  const ShadowTransform shadow = shadow_transform(network, requests);
  const RoadNetwork& g = shadow.network;
  FlowAssignment lifted = shadow.lift(customer_flows);
  const std::size_t n = g.node_count();
  const std::size_t m = g.edge_count();
  const NodeRoles r = roles(n, shadow.requests);
  constexpr double tol = kSaturationTolerance;

  std::vector<double> residual(m);
  for (EdgeIndex e = 0; e < m; ++e) residual[e] = g.edge(e).capacity - lifted.customer_total(e);
  std::vector<double> flow(m, 0.0);
  std::vector<double> b = rebalancing_surplus(g, r, flow);
  std::vector<char> settled(n, 0);  // was defective, no longer is

  auto defective_dest = [&](NodeIndex v) { return r.dest[v] && b[v] > tol; };
  auto defective_origin = [&](NodeIndex v) { return r.origin[v] && b[v] < -tol; };

  // Breadth-first search over unsaturated edges from one node; returns the
  // parent edge per node (m when unreached).
  std::vector<EdgeIndex> parent(n);
  auto search = [&](NodeIndex start, std::vector<char>& reached) -> std::optional<NodeIndex> {
    std::fill(parent.begin(), parent.end(), m);
    std::deque<NodeIndex> queue = {start};
    reached[start] = 1;
    std::vector<char> seen(n, 0);
    seen[start] = 1;
    while (!queue.empty()) {
      const NodeIndex v = queue.front();
      queue.pop_front();
      if (defective_origin(v)) return v;
      for (EdgeIndex e : g.out_edges(v)) {
        const NodeIndex w = g.edge(e).to;
        if (seen[w] || residual[e] <= tol) continue;
        seen[w] = 1;
        reached[w] = 1;
        parent[w] = e;
        queue.push_back(w);
      }
    }
    return std::nullopt;
  };

  std::size_t augmentations = 0;
  const std::size_t limit = 4 * (n + m) + 16;
  for (;;) {
    std::vector<NodeIndex> dests;
    for (NodeIndex v = 0; v < n; ++v)
      if (defective_dest(v)) dests.push_back(v);
    if (dests.empty()) {
      for (NodeIndex v = 0; v < n; ++v)
        if (defective_origin(v)) throw std::logic_error("defective origin without a defective destination");
      FeasibleRebalancing ok;
      ok.flow.assign(flow.begin(), flow.begin() + static_cast<std::ptrdiff_t>(shadow.original_edges));
      ok.augmentations = augmentations;
      return ok;
    }
    std::vector<char> reached(n, 0);
    std::optional<NodeIndex> target;
    NodeIndex source = dests.front();
    for (NodeIndex d : dests) {
      target = search(d, reached);
      if (target) {
        source = d;
        break;
      }
    }
    if (!target) {
      // No defective origin is reachable: the reached set is cut off by
      // saturated edges.
      Blocked blocked;
      blocked.augmentations = augmentations;
      FlowAssignment lifted_flows = lifted;
      lifted_flows.rebalancing = flow;
      blocked.partial.flow.assign(flow.begin(), flow.begin() + static_cast<std::ptrdiff_t>(shadow.original_edges));
      std::vector<bool> in_s(network.node_count(), false);
      for (NodeIndex v = 0; v < n; ++v) {
        if (!reached[v]) continue;
        const NodeIndex orig = v < shadow.original_nodes ? v : kNoNode;
        if (orig != kNoNode) in_s[orig] = true;
      }
      // A companion node stands in for its parent when only it was reached.
      for (NodeIndex v = 0; v < shadow.original_nodes; ++v)
        if (shadow.shadow_of[v] != kNoNode && reached[shadow.shadow_of[v]]) in_s[v] = true;
      for (NodeIndex v = 0; v < network.node_count(); ++v)
        if (in_s[v]) blocked.s_side.push_back(v);
      for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
        const Edge& edge = network.edge(e);
        if (in_s[edge.from] && !in_s[edge.to]) blocked.c_out += edge.capacity;
        if (!in_s[edge.from] && in_s[edge.to]) blocked.c_in += edge.capacity;
      }
      auto to_original = [&](NodeIndex v) {
        for (NodeIndex p = 0; p < shadow.original_nodes; ++p)
          if (shadow.shadow_of[p] == v) return p;
        return v;
      };
      for (NodeIndex v = 0; v < n; ++v) {
        if (defective_origin(v)) blocked.partial.defective.origins.push_back(to_original(v));
        if (defective_dest(v)) blocked.partial.defective.destinations.push_back(to_original(v));
      }
      return blocked;
    }

    // Augment along the path source -> target.
    double amount = std::min(b[source], -b[*target]);
    for (NodeIndex v = *target; v != source; v = g.edge(parent[v]).from) amount = std::min(amount, residual[parent[v]]);
    for (NodeIndex v = *target; v != source; v = g.edge(parent[v]).from) {
      const EdgeIndex e = parent[v];
      flow[e] += amount;
      residual[e] -= amount;
    }
    b[source] -= amount;
    b[*target] += amount;
    ++augmentations;
    if (augmentations > limit) throw NumericalError("rebalancing construction did not terminate");

    for (NodeIndex v = 0; v < n; ++v) {
      const bool defective = defective_dest(v) || defective_origin(v);
      if (settled[v] && defective) throw std::logic_error("node became defective again after being repaired");
      if (!defective && (r.origin[v] || r.dest[v]) && std::abs(b[v]) <= tol) settled[v] = 1;
    }
    if (observer) observer(g, shadow.requests, lifted, flow);
  }
}

std::vector<std::size_t> RebalanceInstance::origins() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i].excess > regions[i].desired) out.push_back(i);
  return out;
}

std::vector<std::size_t> RebalanceInstance::destinations() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i].excess < regions[i].desired) out.push_back(i);
  return out;
}

std::int64_t RebalanceInstance::total_imbalance() const {
  std::int64_t total = 0;
  for (const auto& r : regions) total += std::abs(r.excess - r.desired);
  return total;
}

double default_rebalance_slack_cost(const RebalanceInstance& instance, std::span<const double> edge_times) {
  double sum_t = 0.0;
  for (double t : edge_times) sum_t += t;
  return 1.0 + sum_t * static_cast<double>(instance.total_imbalance());
}

RealtimeRebalance solve_realtime_rebalance(const RebalanceInstance& instance, const RoadNetwork& network,
                                           std::span<const double> edge_times) {
  require_valid(network);
  std::vector<double> times;
  if (edge_times.empty()) {
    for (const Edge& e : network.edges()) times.push_back(e.free_flow_time);
  } else {
    if (edge_times.size() != network.edge_count()) throw InputError("edge time vector has wrong size");
    times.assign(edge_times.begin(), edge_times.end());
  }
  if (instance.residual_capacity.size() != network.edge_count())
    throw InputError("residual capacity vector has wrong size");
  for (auto c : instance.residual_capacity)
    if (c < 0) throw InputError("residual capacities must be nonnegative");
  for (const auto& r : instance.regions) {
    if (r.anchor >= network.node_count()) throw InputError("region anchor is not a network node");
    if (r.desired < 0) throw InputError("desired vehicle counts must be nonnegative");
  }

  double sum_t = 0.0;
  for (double t : times) sum_t += t;
  const double bound = sum_t * static_cast<double>(instance.total_imbalance());
  const double cost = instance.slack_cost.value_or(default_rebalance_slack_cost(instance, times));
  if (!(cost > bound))
    throw InputError("slack cost must exceed the sum of edge times times the total imbalance");

  const std::size_t regions = instance.regions.size();
  LinearProgram lp;
  for (EdgeIndex e = 0; e < network.edge_count(); ++e)
    lp.add_variable(times[e], 0.0, static_cast<double>(instance.residual_capacity[e]));
  std::vector<std::size_t> slack_var(regions, 0);
  std::vector<std::vector<LpTerm>> rows(network.node_count());
  std::vector<double> rhs(network.node_count(), 0.0);
  for (std::size_t i = 0; i < regions; ++i) {
    const RegionBalance& r = instance.regions[i];
    const std::int64_t diff = r.excess - r.desired;
    if (diff == 0) continue;
    slack_var[i] = lp.add_variable(cost, 0.0, static_cast<double>(std::abs(diff)));
    // out - in + ds - dt = supply
    rows[r.anchor].push_back({slack_var[i], diff > 0 ? 1.0 : -1.0});
    rhs[r.anchor] += static_cast<double>(diff);
  }
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    rows[network.edge(e).from].push_back({e, 1.0});
    rows[network.edge(e).to].push_back({e, -1.0});
  }
  for (NodeIndex v = 0; v < network.node_count(); ++v)
    lp.add_row(std::move(rows[v]), Relation::Equal, rhs[v]);

  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal)
    throw NumericalError(std::string("rebalancing program returned ") + to_string(sol.status));

  RealtimeRebalance out;
  out.slack_cost = cost;
  auto integral = [&](double x) {
    const double r = std::round(x);
    out.max_fractionality = std::max(out.max_fractionality, std::abs(x - r));
    return static_cast<std::int64_t>(r);
  };
  out.flow.resize(network.edge_count());
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) out.flow[e] = integral(sol.values[e]);
  out.origin_slack.assign(regions, 0);
  out.destination_slack.assign(regions, 0);
  for (std::size_t i = 0; i < regions; ++i) {
    const std::int64_t diff = instance.regions[i].excess - instance.regions[i].desired;
    if (diff > 0) out.origin_slack[i] = integral(sol.values[slack_var[i]]);
    if (diff < 0) out.destination_slack[i] = integral(sol.values[slack_var[i]]);
  }
  if (out.max_fractionality > 1e-7)
    throw std::logic_error("rebalancing program returned a fractional vertex");
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) out.objective += times[e] * static_cast<double>(out.flow[e]);
  for (std::size_t i = 0; i < regions; ++i)
    out.objective += cost * static_cast<double>(out.origin_slack[i] + out.destination_slack[i]);
  return out;
}

PathSet flow_decompose(const RoadNetwork& network, std::span<const std::int64_t> flow) {
  const std::size_t n = network.node_count();
  if (flow.size() != network.edge_count()) throw InputError("flow vector has wrong size");
  std::vector<std::int64_t> rest(flow.begin(), flow.end());
  std::vector<std::int64_t> balance(n, 0);  // out - in
  for (EdgeIndex e = 0; e < rest.size(); ++e) {
    if (rest[e] < 0) throw InputError("flow decomposition needs nonnegative flow");
    balance[network.edge(e).from] += rest[e];
    balance[network.edge(e).to] -= rest[e];
  }

  // Outgoing edges by ascending head id so walks are deterministic.
  std::vector<std::vector<EdgeIndex>> out(n);
  for (NodeIndex v = 0; v < n; ++v) {
    out[v].assign(network.out_edges(v).begin(), network.out_edges(v).end());
    std::sort(out[v].begin(), out[v].end(), [&](EdgeIndex a, EdgeIndex b) {
      return std::pair(network.edge(a).to, a) < std::pair(network.edge(b).to, b);
    });
  }
  auto next_edge = [&](NodeIndex v) -> std::optional<EdgeIndex> {
    for (EdgeIndex e : out[v])
      if (rest[e] > 0) return e;
    return std::nullopt;
  };

  PathSet result;
  std::vector<std::size_t> position(n, SIZE_MAX);
  // Walks from v; stops at a deficit node (path) or on revisiting a node (cycle).
  auto walk = [&](NodeIndex start, bool from_supply) {
    std::vector<NodeIndex> nodes = {start};
    std::vector<EdgeIndex> edges;
    position[start] = 0;
    NodeIndex v = start;
    for (;;) {
      if (from_supply && v != start && balance[v] < 0) break;
      const auto e = next_edge(v);
      if (!e) throw std::logic_error("flow decomposition walk got stuck");
      const NodeIndex w = network.edge(*e).to;
      edges.push_back(*e);
      if (position[w] != SIZE_MAX) {
        // Cycle: keep only the loop part.
        const std::size_t at = position[w];
        FlowPath cyc;
        cyc.nodes.assign(nodes.begin() + static_cast<std::ptrdiff_t>(at), nodes.end());
        cyc.nodes.push_back(w);
        std::vector<EdgeIndex> loop(edges.begin() + static_cast<std::ptrdiff_t>(at), edges.end());
        std::int64_t amount = INT64_MAX;
        for (EdgeIndex c : loop) amount = std::min(amount, rest[c]);
        for (EdgeIndex c : loop) rest[c] -= amount;
        cyc.count = amount;
        result.cycles.push_back(std::move(cyc));
        for (NodeIndex u : nodes) position[u] = SIZE_MAX;
        return;
      }
      position[w] = nodes.size();
      nodes.push_back(w);
      v = w;
    }
    std::int64_t amount = std::min(balance[start], -balance[v]);
    for (EdgeIndex c : edges) amount = std::min(amount, rest[c]);
    for (EdgeIndex c : edges) rest[c] -= amount;
    balance[start] -= amount;
    balance[v] += amount;
    for (NodeIndex u : nodes) position[u] = SIZE_MAX;
    result.paths.push_back({std::move(nodes), amount});
  };

  for (NodeIndex s = 0; s < n; ++s)
    while (balance[s] > 0) walk(s, true);
  for (EdgeIndex e = 0; e < rest.size(); ++e)
    while (rest[e] > 0) walk(network.edge(e).from, false);

  // Merge identical elements produced by separate walks.
  auto merge = [](std::vector<FlowPath>& list) {
    std::map<std::vector<NodeIndex>, std::size_t> index;
    std::vector<FlowPath> merged;
    for (auto& p : list) {
      auto [it, fresh] = index.emplace(p.nodes, merged.size());
      if (fresh) {
        merged.push_back(std::move(p));
      } else {
        merged[it->second].count += p.count;
      }
    }
    list = std::move(merged);
  };
  merge(result.paths);
  merge(result.cycles);
  return result;
}

PathSet flow_decompose(const RoadNetwork& network, std::span<const double> flow) {
  std::vector<std::int64_t> ints(flow.size());
  for (std::size_t e = 0; e < flow.size(); ++e) {
    if (flow[e] < -1e-9) throw InputError("flow decomposition needs nonnegative flow");
    const double r = std::round(flow[e]);
    if (std::abs(flow[e] - r) > 1e-9) throw InputError("flow decomposition needs integral flow");
    ints[e] = static_cast<std::int64_t>(r);
  }
  return flow_decompose(network, std::span<const std::int64_t>(ints));
}

std::vector<std::int64_t> recompose(const RoadNetwork& network, const PathSet& paths) {
  std::vector<std::int64_t> flow(network.edge_count(), 0);
  auto add = [&](const FlowPath& p) {
    for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) {
      const auto e = network.find_edge(p.nodes[i], p.nodes[i + 1]);
      if (!e) throw InputError("path uses a missing edge");
      flow[*e] += p.count;
    }
  };
  for (const auto& p : paths.paths) add(p);
  for (const auto& c : paths.cycles) add(c);
  return flow;
}

std::vector<std::int64_t> even_split(std::int64_t total, std::size_t n) {
  std::vector<std::int64_t> out(n, 0);
  if (n == 0 || total <= 0) return out;
  const auto count = static_cast<std::int64_t>(n);
  const std::int64_t base = total / count;
  const std::int64_t extra = total % count;
  for (std::size_t i = 0; i < n; ++i) out[i] = base + (static_cast<std::int64_t>(i) < extra ? 1 : 0);
  return out;
}

std::vector<RegionState> compute_region_state(std::span<const RegionSnapshot> regions,
                                              std::span<const InboundVehicle> inbound, double t_vicinity) {
  std::vector<RegionState> state(regions.size());
  for (std::size_t i = 0; i < regions.size(); ++i) state[i].vehicles = regions[i].idle_vehicles;
  for (const auto& v : inbound) {
    if (v.to_region >= regions.size()) throw InputError("inbound vehicle targets an unknown region");
    if (v.eta <= t_vicinity) ++state[v.to_region].inbound;
  }
  std::int64_t total_excess = 0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    state[i].owned = state[i].vehicles + state[i].inbound;
    state[i].excess = state[i].owned - regions[i].waiting_customers;
    total_excess += state[i].excess;
  }
  const auto desired = even_split(total_excess, regions.size());
  for (std::size_t i = 0; i < regions.size(); ++i) state[i].desired = desired[i];
  return state;
}

RebalanceInstance make_rebalance_instance(std::span<const RegionSnapshot> regions, std::span<const RegionState> state,
                                          std::vector<std::int64_t> residual_capacity) {
  RebalanceInstance inst;
  for (std::size_t i = 0; i < regions.size(); ++i)
    inst.regions.push_back({regions[i].anchor, state[i].excess, state[i].desired});
  inst.residual_capacity = std::move(residual_capacity);
  return inst;
}

}  // namespace amod
