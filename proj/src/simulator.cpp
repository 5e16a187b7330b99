#include "amod/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <sstream>

#include "amod/error.hpp"
#include "amod/lp.hpp"

namespace amod {

const char* to_string(Rebalancer rebalancer) {
  switch (rebalancer) {
    case Rebalancer::CongestionAware: return "congestion_aware";
    case Rebalancer::BaselineP2P: return "baseline_p2p";
    case Rebalancer::None: return "none";
  }
  return "?";
}

Rebalancer parse_rebalancer(const std::string& name) {
  if (name == "congestion_aware") return Rebalancer::CongestionAware;
  if (name == "baseline_p2p") return Rebalancer::BaselineP2P;
  if (name == "none") return Rebalancer::None;
  throw InputError("unknown rebalancer '" + name + "' (expected congestion_aware, baseline_p2p or none)");
}

std::vector<P2PDispatch> baseline_p2p_rebalance(std::span<const RegionSnapshot> regions,
                                                std::span<const RegionState> state, FreeFlowOracle& oracle) {
  if (regions.size() != state.size()) throw InputError("region snapshot and state sizes differ");
  std::vector<std::size_t> sources, sinks;
  std::int64_t supply = 0, demand = 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const std::int64_t d = state[i].excess - state[i].desired;
    if (d > 0) {
      sources.push_back(i);
      supply += d;
    } else if (d < 0) {
      sinks.push_back(i);
      demand -= d;
    }
  }
  if (sources.empty() || sinks.empty()) return {};

  struct Arc {
    std::size_t from, to, var;
  };
  std::vector<Arc> arcs;
  double max_time = 0.0;
  for (auto i : sources)
    for (auto j : sinks) {
      const double t = oracle.time(regions[i].anchor, regions[j].anchor);
      if (std::isfinite(t)) max_time = std::max(max_time, t);
    }
  // Every shipment earns a reward larger than any route cost, so the optimum
  // moves as many vehicles as the reachable pairs allow.
  const double reward = 1.0 + max_time * static_cast<double>(std::min(supply, demand));
  LinearProgram lp;
  for (auto i : sources)
    for (auto j : sinks) {
      const double t = oracle.time(regions[i].anchor, regions[j].anchor);
      if (!std::isfinite(t)) continue;
      arcs.push_back({i, j, lp.add_variable(t - reward)});
    }
  if (arcs.empty()) return {};
  for (auto i : sources) {
    std::vector<LpTerm> terms;
    for (const auto& a : arcs)
      if (a.from == i) terms.push_back({a.var, 1.0});
    if (!terms.empty())
      lp.add_row(std::move(terms), Relation::LessEqual, static_cast<double>(state[i].excess - state[i].desired));
  }
  for (auto j : sinks) {
    std::vector<LpTerm> terms;
    for (const auto& a : arcs)
      if (a.to == j) terms.push_back({a.var, 1.0});
    if (!terms.empty())
      lp.add_row(std::move(terms), Relation::LessEqual, static_cast<double>(state[j].desired - state[j].excess));
  }
  const auto sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal) throw NumericalError("baseline transportation problem failed: " + sol.detail);

  std::vector<P2PDispatch> out;
  for (const auto& a : arcs) {
    const double x = sol.values[a.var];
    const auto k = static_cast<std::int64_t>(std::llround(x));
    if (std::fabs(x - static_cast<double>(k)) > 1e-7)
      throw std::logic_error("transportation vertex is not integral");
    if (k > 0) out.push_back({a.from, a.to, k});
  }
  return out;
}

namespace {

enum class Status { Idle, ToPickup, WithCustomer, Rebalancing };

struct Vehicle {
  NodeIndex node = 0;  // current node, or tail of the current edge
  std::optional<EdgeIndex> edge;
  double progress = 0.0;  // fraction of the current edge already covered
  std::deque<EdgeIndex> route;
  Status status = Status::Idle;
  std::size_t customer = 0;
};

struct Customer {
  double arrival = 0.0;
  NodeIndex origin = 0;
  NodeIndex dest = 0;
  std::optional<double> pickup;
  std::optional<double> dropoff;
  bool assigned = false;
  bool serviceable = true;
};

void check_trips(const RoadNetwork& network, const TripStream& trips) {
  double last = 0.0;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const auto& t = trips[i];
    if (!std::isfinite(t.arrival) || t.arrival < 0.0)
      throw InputError("trip " + std::to_string(i) + ": arrival time must be finite and nonnegative");
    if (i > 0 && t.arrival < last) throw InputError("trip " + std::to_string(i) + ": trips are not sorted by arrival");
    if (t.origin >= network.node_count() || t.dest >= network.node_count())
      throw InputError("trip " + std::to_string(i) + ": unknown node");
    last = t.arrival;
  }
}

void check_config(const SimConfig& c) {
  if (!(c.time_step > 0.0) || !std::isfinite(c.time_step)) throw InputError("time step must be positive");
  if (!(c.rebalance_period > 0.0) || !std::isfinite(c.rebalance_period))
    throw InputError("rebalance period must be positive");
  const double ratio = c.rebalance_period / c.time_step;
  if (std::fabs(ratio - std::round(ratio)) > 1e-9) throw InputError("rebalance period must be a multiple of the time step");
  if (c.t_vicinity && !(*c.t_vicinity >= 0.0)) throw InputError("t_vicinity must be nonnegative");
  if (!(c.capacity_multiplier > 0.0)) throw InputError("capacity multiplier must be positive");
  if (c.free_flow_speed && !(*c.free_flow_speed > 0.0)) throw InputError("free-flow speed must be positive");
  if (c.duration && !(*c.duration >= 0.0 && std::isfinite(*c.duration))) throw InputError("duration must be finite");
  if (!(c.drain_time >= 0.0) || !std::isfinite(c.drain_time)) throw InputError("drain time must be finite");
}

RoadNetwork working_network(const RoadNetwork& network, const SimConfig& config) {
  RoadNetwork net;
  for (NodeIndex v = 0; v < network.node_count(); ++v) net.add_node(network.node_id(v), network.position(v));
  if (network.geo_origin()) net.set_geo_origin(*network.geo_origin());
  for (const auto& e : network.edges()) {
    double t = e.free_flow_time;
    const auto& a = network.position(e.from);
    const auto& b = network.position(e.to);
    if (config.free_flow_speed && a && b) t = std::hypot(b->x - a->x, b->y - a->y) / *config.free_flow_speed;
    const double cap = std::isinf(config.capacity_multiplier) ? kInfinity : e.capacity * config.capacity_multiplier;
    net.add_edge(e.from, e.to, cap, t);
  }
  return net;
}

class Simulation {
 public:
  Simulation(const RoadNetwork& network, const TripStream& trips, const SimConfig& config, const Regions& regions)
      : net_(working_network(network, config)),
        trips_(trips),
        config_(config),
        regions_(regions),
        oracle_(net_),
        counts_(net_.edge_count(), 0),
        loads_(net_.edge_count(), 0.0),
        delays_(net_.edge_count(), 0.0) {
    place_fleet();
    route_options_.oracle = &oracle_;
    route_options_.bpr = config_.bpr;
  }

  SimResult run();

 private:
  void place_fleet();
  void snapshot();
  void ingest(double clock);
  void assign(double clock);
  void rebalance();
  void rebalance_congestion_aware(const std::vector<RegionSnapshot>& snap, const std::vector<RegionState>& state);
  void rebalance_baseline(const std::vector<RegionSnapshot>& snap, const std::vector<RegionState>& state);
  void move(double clock);
  void arrive(std::size_t id, double when);
  void set_route(Vehicle& v, NodeIndex dest);
  void enter_next_edge(Vehicle& v);
  double remaining_time(const Vehicle& v) const;
  NodeIndex route_end(const Vehicle& v) const;
  std::vector<std::size_t> idle_in_region(std::size_t region, NodeIndex toward);
  void dispatch(std::size_t id, std::vector<EdgeIndex> edges);

  RoadNetwork net_;
  const TripStream& trips_;
  SimConfig config_;
  const Regions& regions_;
  FreeFlowOracle oracle_;
  RouteOptions route_options_;

  std::vector<Vehicle> fleet_;
  std::vector<Customer> customers_;
  std::deque<std::size_t> queue_;  // unassigned customers, FIFO
  std::size_t next_trip_ = 0;

  std::vector<std::size_t> counts_;  // live vehicles per edge
  EdgeLoad loads_;                   // snapshot flow per edge
  std::vector<double> delays_;       // snapshot delay per edge
  std::size_t congested_ = 0;

  std::size_t picked_up_ = 0;
  std::size_t completed_ = 0;
  std::size_t dispatched_ = 0;
};

void Simulation::place_fleet() {
  fleet_.resize(config_.fleet_size);
  if (config_.fleet_size == 0) return;
  if (config_.placement == Placement::Even) {
    const std::size_t k = regions_.size();
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      const auto& members = regions_.members[i % k];
      fleet_[i].node = members[(i / k) % members.size()];
    }
    return;
  }
  Rng rng(config_.seed);
  for (auto& v : fleet_) v.node = static_cast<NodeIndex>(rng.below(net_.node_count()));
}

void Simulation::snapshot() {
  congested_ = 0;
  for (EdgeIndex e = 0; e < net_.edge_count(); ++e) {
    const auto& edge = net_.edge(e);
    const double count = static_cast<double>(counts_[e]);
    loads_[e] = edge.free_flow_time > 0.0 ? count / edge.free_flow_time : 0.0;
    delays_[e] = edge.free_flow_time > 0.0 ? bpr_delay(edge.free_flow_time, loads_[e], edge.capacity, config_.bpr) : 0.0;
    if (loads_[e] > edge.capacity) ++congested_;
  }
}

void Simulation::ingest(double clock) {
  while (next_trip_ < trips_.size() && trips_[next_trip_].arrival <= clock) {
    const auto& t = trips_[next_trip_++];
    Customer c;
    c.arrival = t.arrival;
    c.origin = t.origin;
    c.dest = t.dest;
    c.serviceable = std::isfinite(oracle_.time(t.origin, t.dest));
    customers_.push_back(c);
    if (c.serviceable) queue_.push_back(customers_.size() - 1);
  }
}

void Simulation::set_route(Vehicle& v, NodeIndex dest) {
  v.route.clear();
  if (v.node == dest) return;
  const auto r = astar_route(net_, loads_, v.node, dest, route_options_);
  v.route.assign(r.edges.begin(), r.edges.end());
}

void Simulation::assign(double clock) {
  std::deque<std::size_t> still_waiting;
  while (!queue_.empty()) {
    const std::size_t cid = queue_.front();
    queue_.pop_front();
    auto& c = customers_[cid];
    const std::size_t region = regions_.region_of[c.origin];
    const auto& to_origin = oracle_.to_target(c.origin);
    std::optional<std::size_t> best;
    for (std::size_t id = 0; id < fleet_.size(); ++id) {
      const auto& v = fleet_[id];
      if (v.status != Status::Idle || regions_.region_of[v.node] != region) continue;
      if (!std::isfinite(to_origin[v.node])) continue;
      if (!best || to_origin[v.node] < to_origin[fleet_[*best].node]) best = id;
    }
    if (!best) {
      still_waiting.push_back(cid);
      continue;
    }
    auto& v = fleet_[*best];
    c.assigned = true;
    v.customer = cid;
    if (v.node == c.origin) {
      c.pickup = clock;
      ++picked_up_;
      v.status = Status::WithCustomer;
      set_route(v, c.dest);
      if (v.route.empty()) arrive(*best, clock);
    } else {
      v.status = Status::ToPickup;
      set_route(v, c.origin);
    }
  }
  queue_ = std::move(still_waiting);
}

void Simulation::arrive(std::size_t id, double when) {
  auto& v = fleet_[id];
  switch (v.status) {
    case Status::ToPickup: {
      auto& c = customers_[v.customer];
      c.pickup = when;
      ++picked_up_;
      v.status = Status::WithCustomer;
      set_route(v, c.dest);
      if (v.route.empty()) arrive(id, when);
      break;
    }
    case Status::WithCustomer:
      customers_[v.customer].dropoff = when;
      ++completed_;
      v.status = Status::Idle;
      break;
    case Status::Rebalancing:
      v.status = Status::Idle;
      break;
    case Status::Idle:
      break;
  }
}

void Simulation::enter_next_edge(Vehicle& v) {
  v.edge = v.route.front();
  v.route.pop_front();
  v.progress = 0.0;
  ++counts_[*v.edge];
}

void Simulation::move(double clock) {
  const double dt = config_.time_step;
  for (std::size_t id = 0; id < fleet_.size(); ++id) {
    auto& v = fleet_[id];
    double budget = dt;
    while (true) {
      if (!v.edge) {
        if (v.route.empty()) break;
        enter_next_edge(v);
      }
      const EdgeIndex e = *v.edge;
      const double left = (1.0 - v.progress) * delays_[e];
      if (left <= budget) {
        budget -= left;
        --counts_[e];
        v.edge.reset();
        v.progress = 0.0;
        v.node = net_.edge(e).to;
        if (v.route.empty()) arrive(id, clock + (dt - budget));
      } else {
        v.progress += budget / delays_[e];
        break;
      }
    }
  }
}

double Simulation::remaining_time(const Vehicle& v) const {
  double t = v.edge ? (1.0 - v.progress) * delays_[*v.edge] : 0.0;
  for (auto e : v.route) t += delays_[e];
  return t;
}

NodeIndex Simulation::route_end(const Vehicle& v) const {
  if (!v.route.empty()) return net_.edge(v.route.back()).to;
  if (v.edge) return net_.edge(*v.edge).to;
  return v.node;
}

std::vector<std::size_t> Simulation::idle_in_region(std::size_t region, NodeIndex toward) {
  const auto& dist = oracle_.to_target(toward);
  std::vector<std::size_t> ids;
  for (std::size_t id = 0; id < fleet_.size(); ++id) {
    const auto& v = fleet_[id];
    if (v.status == Status::Idle && regions_.region_of[v.node] == region && std::isfinite(dist[v.node]))
      ids.push_back(id);
  }
  std::stable_sort(ids.begin(), ids.end(),
                   [&](std::size_t a, std::size_t b) { return dist[fleet_[a].node] < dist[fleet_[b].node]; });
  return ids;
}

void Simulation::dispatch(std::size_t id, std::vector<EdgeIndex> edges) {
  auto& v = fleet_[id];
  v.route.assign(edges.begin(), edges.end());
  v.status = Status::Rebalancing;
  ++dispatched_;
  if (v.route.empty()) v.status = Status::Idle;
}

void Simulation::rebalance() {
  const std::size_t k = regions_.size();
  std::vector<RegionSnapshot> snap(k);
  for (std::size_t i = 0; i < k; ++i) snap[i].anchor = regions_.anchors[i];
  std::vector<InboundVehicle> inbound;
  for (const auto& v : fleet_) {
    if (v.status == Status::Idle) {
      ++snap[regions_.region_of[v.node]].idle_vehicles;
    } else if (v.status == Status::WithCustomer || v.status == Status::Rebalancing) {
      inbound.push_back({regions_.region_of[v.node], regions_.region_of[route_end(v)], remaining_time(v)});
    }
  }
  for (auto cid : queue_) ++snap[regions_.region_of[customers_[cid].origin]].waiting_customers;
  const auto state = compute_region_state(snap, inbound, config_.t_vicinity.value_or(config_.rebalance_period));
  if (config_.rebalancer == Rebalancer::CongestionAware)
    rebalance_congestion_aware(snap, state);
  else if (config_.rebalancer == Rebalancer::BaselineP2P)
    rebalance_baseline(snap, state);
}

void Simulation::rebalance_congestion_aware(const std::vector<RegionSnapshot>& snap,
                                            const std::vector<RegionState>& state) {
  // Residual capacity in vehicles: the occupancy an edge holds at the onset
  // of congestion (capacity times traversal time) minus the vehicles on it
  // now. Capped by the fleet so that uncapacitated and zero-time roads stay
  // finite.
  const auto fleet = static_cast<double>(fleet_.size());
  std::vector<std::int64_t> residual(net_.edge_count());
  for (EdgeIndex e = 0; e < net_.edge_count(); ++e) {
    const auto& edge = net_.edge(e);
    double spare = fleet;
    if (edge.free_flow_time > 0.0 && std::isfinite(edge.capacity))
      spare = std::max(0.0, edge.capacity * edge.free_flow_time - static_cast<double>(counts_[e]));
    residual[e] = static_cast<std::int64_t>(std::floor(std::min(spare, fleet) + 1e-9));
  }
  auto instance = make_rebalance_instance(snap, state, std::move(residual));
  instance.slack_cost = config_.slack_cost;
  if (instance.total_imbalance() == 0) return;
  const auto plan = solve_realtime_rebalance(instance, net_);
  const auto paths = flow_decompose(net_, std::span<const std::int64_t>(plan.flow));

  for (const auto& path : paths.paths) {
    const NodeIndex start = path.nodes.front();
    const std::size_t hops = path.nodes.size() - 1;
    std::vector<EdgeIndex> edges;
    std::vector<double> suffix(hops + 1, 0.0);  // free-flow time from each path node to the end
    for (std::size_t i = 0; i < hops; ++i) edges.push_back(*net_.find_edge(path.nodes[i], path.nodes[i + 1]));
    for (std::size_t i = hops; i-- > 0;) suffix[i] = suffix[i + 1] + net_.edge(edges[i]).free_flow_time;

    // A vehicle joins the planned path at the node that minimizes its total
    // free-flow time to the path's end, instead of detouring to the anchor.
    struct Join {
      std::size_t id;
      std::size_t at;
      double cost;
    };
    std::vector<Join> candidates;
    for (std::size_t r = 0; r < regions_.size(); ++r) {
      if (regions_.anchors[r] != start || state[r].excess <= state[r].desired) continue;
      for (auto id : idle_in_region(r, start)) {
        Join best{id, 0, kInfinity};
        for (std::size_t i = 0; i <= hops; ++i) {
          const double c = oracle_.time(fleet_[id].node, path.nodes[i]) + suffix[i];
          if (c < best.cost) best = {id, i, c};
        }
        candidates.push_back(best);
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Join& a, const Join& b) {
      return a.cost < b.cost || (a.cost == b.cost && a.id < b.id);
    });
    std::int64_t left = path.count;
    for (const auto& j : candidates) {
      if (left == 0) break;
      if (fleet_[j.id].status != Status::Idle) continue;
      const NodeIndex join = path.nodes[j.at];
      std::vector<EdgeIndex> route;
      if (fleet_[j.id].node != join) route = astar_route(net_, loads_, fleet_[j.id].node, join, route_options_).edges;
      route.insert(route.end(), edges.begin() + static_cast<std::ptrdiff_t>(j.at), edges.end());
      dispatch(j.id, std::move(route));
      --left;
    }
  }
}

void Simulation::rebalance_baseline(const std::vector<RegionSnapshot>& snap, const std::vector<RegionState>& state) {
  for (const auto& d : baseline_p2p_rebalance(snap, state, oracle_)) {
    const NodeIndex target = regions_.anchors[d.to_region];
    std::int64_t left = d.vehicles;
    for (auto id : idle_in_region(d.from_region, target)) {
      if (left == 0) break;
      dispatch(id, astar_route(net_, loads_, fleet_[id].node, target, route_options_).edges);
      --left;
    }
  }
}

SimResult Simulation::run() {
  double duration = config_.drain_time + (trips_.empty() ? 0.0 : trips_.back().arrival);
  if (config_.duration) duration = *config_.duration;
  const double dt = config_.time_step;
  const auto steps = static_cast<std::size_t>(std::ceil(duration / dt - 1e-9));
  const auto period = static_cast<std::size_t>(std::llround(config_.rebalance_period / dt));

  SimResult result;
  result.trace.reserve(steps);
  double rebalancing_sum = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double clock = static_cast<double>(k) * dt;
    snapshot();
    ingest(clock);
    assign(clock);
    if (config_.rebalancer != Rebalancer::None && k % period == 0) rebalance();
    move(clock);

    TraceRow row;
    row.clock = clock + dt;
    row.arrived = customers_.size();
    row.completed = completed_;
    row.in_progress = picked_up_ - completed_;
    row.waiting = customers_.size() - picked_up_;
    row.congested_edges = congested_;
    for (const auto& v : fleet_)
      if (v.status == Status::Rebalancing) ++row.rebalancing_vehicles;
    rebalancing_sum += static_cast<double>(row.rebalancing_vehicles);
    result.trace.push_back(row);
  }

  auto& m = result.metrics;
  m.steps = steps;
  m.end_time = static_cast<double>(steps) * dt;
  m.customers = customers_.size();
  m.trips_completed = completed_;
  m.rebalancing_dispatches = dispatched_;
  m.mean_rebalancing_vehicles = steps > 0 ? rebalancing_sum / static_cast<double>(steps) : 0.0;
  double wait_sum = 0.0, travel_sum = 0.0, service_sum = 0.0;
  std::size_t long_waits = 0;
  for (const auto& c : customers_) {
    if (!c.serviceable) ++m.unserviceable;
    const double wait = (c.pickup ? *c.pickup : m.end_time) - c.arrival;
    wait_sum += wait;
    if (wait > 300.0) ++long_waits;
    if (c.dropoff) {
      const double travel = *c.dropoff - *c.pickup;
      travel_sum += travel;
      service_sum += wait + travel;
    }
  }
  if (m.customers > 0) {
    m.mean_wait = wait_sum / static_cast<double>(m.customers);
    m.pct_wait_over_5min = 100.0 * static_cast<double>(long_waits) / static_cast<double>(m.customers);
  }
  if (m.trips_completed > 0) {
    m.mean_travel = travel_sum / static_cast<double>(m.trips_completed);
    m.mean_service = service_sum / static_cast<double>(m.trips_completed);
  }
  return result;
}

}  // namespace

SimResult run_simulation(const RoadNetwork& network, const TripStream& trips, const SimConfig& config,
                         const Regions* regions) {
  require_valid(network);
  check_config(config);
  check_trips(network, trips);
  Regions own;
  if (!regions) {
    own = network.has_coordinates() ? kmeans_regions(network, std::min(config.regions, network.node_count()), config.seed)
                                    : single_region(network);
    regions = &own;
  } else if (regions->region_of.size() != network.node_count() || regions->size() == 0) {
    throw InputError("regions do not match the network");
  }
  Simulation sim(network, trips, config, *regions);
  return sim.run();
}

std::vector<SimResult> compare(const RoadNetwork& network, const TripStream& trips, std::span<const SimConfig> configs,
                               const Regions* regions) {
  std::vector<SimResult> out;
  for (const auto& c : configs) out.push_back(run_simulation(network, trips, c, regions));
  return out;
}

std::string write_trace_csv(std::span<const TraceRow> trace) {
  std::ostringstream os;
  os << "clock,waiting,in_progress,congested_edges,rebalancing_vehicles\n";
  char buf[64];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%.12g", r.clock);
    os << buf << ',' << r.waiting << ',' << r.in_progress << ',' << r.congested_edges << ','
       << r.rebalancing_vehicles << '\n';
  }
  return os.str();
}

}  // namespace amod
