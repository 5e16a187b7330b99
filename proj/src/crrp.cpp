#include "amod/crrp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <set>

#include "amod/error.hpp"

namespace amod {

namespace {

// Balance right-hand sides: rates leaving v minus rates ending at v.
std::vector<double> net_demand(std::size_t nodes, const RequestSet& requests) {
  std::vector<double> out(nodes, 0.0);
  for (const Request& r : requests) {
    out[r.origin] += r.rate;
    out[r.dest] -= r.rate;
  }
  return out;
}

// Structural validation that tolerates zero capacities, which the asymmetry
// sweep produces when an edge is derated completely.
void require_valid_allowing_closed_edges(const RoadNetwork& network, const RequestSet& requests) {
  ValidationReport report = validate(network, requests);
  std::vector<std::string> kept;
  for (auto& v : report.violations)
    if (v.find("nonpositive capacity") == std::string::npos) kept.push_back(std::move(v));
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    const double c = network.edge(e).capacity;
    if (!(c >= 0.0) || std::isnan(c)) kept.push_back("edge " + std::to_string(e) + ": negative capacity");
  }
  if (!kept.empty()) {
    std::string msg = "invalid input:";
    for (const auto& v : kept) msg += "\n  " + v;
    throw InputError(msg);
  }
}

CrrpProblem build_problem(const RoadNetwork& network, const RequestSet& requests, const CrrpConfig& config) {
  if (!(config.rho >= 0.0)) throw InputError("crrp: rho must be nonnegative");
  CrrpProblem problem;
  problem.shadow = shadow_transform(network, requests);
  const RoadNetwork& g = problem.shadow.network;
  const RequestSet& req = problem.shadow.requests;
  const std::size_t m_count = req.size();
  const std::size_t e_count = g.edge_count();
  problem.layout = {m_count, e_count, config.relax_congestion};
  problem.slack_cost = config.slack_cost.value_or(default_slack_cost(network, requests));
  if (config.relax_congestion && !(problem.slack_cost > 0.0))
    throw InputError("crrp: slack cost must be positive");

  const bool fixed = config.variant == CrrpVariant::RebalanceFixedCustomers;
  const bool customer_only = config.variant == CrrpVariant::CustomerOnly;
  FlowAssignment fixed_flows;
  if (fixed) {
    if (config.fixed_customer_flows.size() != requests.size())
      throw InputError("crrp: fixed customer flows must cover every request");
    FlowAssignment given = FlowAssignment::zeros(requests.size(), network.edge_count());
    for (std::size_t m = 0; m < requests.size(); ++m) {
      if (config.fixed_customer_flows[m].size() != network.edge_count())
        throw InputError("crrp: fixed customer flow has wrong edge count");
      given.customer[m] = config.fixed_customer_flows[m];
    }
    fixed_flows = problem.shadow.lift(given);
  }

  LinearProgram& lp = problem.lp;
  for (std::size_t m = 0; m < m_count; ++m) {
    for (EdgeIndex e = 0; e < e_count; ++e) {
      const double t = g.edge(e).free_flow_time;
      if (fixed) {
        const double v = fixed_flows.customer[m][e];
        lp.add_variable(0.0, v, v);
      } else {
        lp.add_variable(t);
      }
    }
  }
  for (EdgeIndex e = 0; e < e_count; ++e) {
    const double t = g.edge(e).free_flow_time;
    const double weight = fixed ? 1.0 : config.rho;
    lp.add_variable(weight * t, 0.0, customer_only ? 0.0 : kInfinity);
  }
  if (config.relax_congestion)
    for (EdgeIndex e = 0; e < e_count; ++e) lp.add_variable(problem.slack_cost);

  const auto& layout = problem.layout;
  if (!fixed) {
    for (std::size_t m = 0; m < m_count; ++m) {
      for (NodeIndex v = 0; v < g.node_count(); ++v) {
        std::vector<LpTerm> terms;
        for (EdgeIndex e : g.in_edges(v)) terms.push_back({layout.customer(m, e), 1.0});
        for (EdgeIndex e : g.out_edges(v)) terms.push_back({layout.customer(m, e), -1.0});
        double rhs = 0.0;
        if (v == req[m].origin) rhs = -req[m].rate;
        if (v == req[m].dest) rhs = req[m].rate;
        lp.add_row(std::move(terms), Relation::Equal, rhs);
      }
    }
  }
  if (!customer_only) {
    const std::vector<double> supply = net_demand(g.node_count(), req);
    for (NodeIndex v = 0; v < g.node_count(); ++v) {
      std::vector<LpTerm> terms;
      for (EdgeIndex e : g.in_edges(v)) terms.push_back({layout.rebalancing(e), 1.0});
      for (EdgeIndex e : g.out_edges(v)) terms.push_back({layout.rebalancing(e), -1.0});
      lp.add_row(std::move(terms), Relation::Equal, supply[v]);
    }
  }
  for (EdgeIndex e = 0; e < e_count; ++e) {
    std::vector<LpTerm> terms;
    for (std::size_t m = 0; m < m_count; ++m) terms.push_back({layout.customer(m, e), 1.0});
    terms.push_back({layout.rebalancing(e), 1.0});
    if (config.relax_congestion) terms.push_back({layout.slack(e), -1.0});
    lp.add_row(std::move(terms), Relation::LessEqual, g.edge(e).capacity);
  }
  return problem;
}

// Dijkstra under nonnegative weights. Equal labels settle the lower node
// first, which keeps the chosen path deterministic.
std::vector<EdgeIndex> cheapest_path(const RoadNetwork& g, const std::vector<double>& weight, NodeIndex from,
                                     NodeIndex to, double* cost) {
  const std::size_t n = g.node_count();
  std::vector<double> dist(n, kInfinity);
  std::vector<EdgeIndex> via(n, g.edge_count());
  using Label = std::pair<double, NodeIndex>;
  std::priority_queue<Label, std::vector<Label>, std::greater<>> heap;
  dist[from] = 0.0;
  heap.push({0.0, from});
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    if (v == to) break;
    for (EdgeIndex e : g.out_edges(v)) {
      const NodeIndex w = g.edge(e).to;
      const double nd = d + weight[e];
      if (nd < dist[w]) {
        dist[w] = nd;
        via[w] = e;
        heap.push({nd, w});
      }
    }
  }
  std::vector<EdgeIndex> path;
  if (dist[to] == kInfinity) return path;
  for (NodeIndex v = to; v != from; v = g.edge(via[v]).from) path.push_back(via[v]);
  std::reverse(path.begin(), path.end());
  *cost = dist[to];
  return path;
}

// Relaxed CRRP over path flows. The master holds, per request, the paths
// priced so far; rebalancing stays edge based. A path enters when its
// free-flow time minus the capacity duals along it undercuts the request's
// dual. With no such path left the master optimum is the LP optimum.
CrrpSolution solve_by_paths(const RoadNetwork& network, const RequestSet& requests, const CrrpConfig& config) {
  if (!(config.rho >= 0.0)) throw InputError("crrp: rho must be nonnegative");
  const double slack_cost = config.slack_cost.value_or(default_slack_cost(network, requests));
  if (!(slack_cost > 0.0)) throw InputError("crrp: slack cost must be positive");
  const ShadowTransform shadow = shadow_transform(network, requests);
  const RoadNetwork& g = shadow.network;
  const RequestSet& req = shadow.requests;
  const std::size_t e_count = g.edge_count();
  const bool customer_only = config.variant == CrrpVariant::CustomerOnly;

  struct PathColumn {
    std::size_t request;
    std::vector<EdgeIndex> edges;
    double time;
  };
  std::vector<PathColumn> columns;
  std::set<std::pair<std::size_t, std::vector<EdgeIndex>>> seen;
  std::vector<double> weight(e_count);
  double max_time = 0.0;
  for (EdgeIndex e = 0; e < e_count; ++e) {
    weight[e] = g.edge(e).free_flow_time;
    max_time = std::max(max_time, weight[e]);
  }
  auto add_column = [&](std::size_t m, std::vector<EdgeIndex> edges) {
    if (!seen.insert({m, edges}).second) return false;
    double time = 0.0;
    for (EdgeIndex e : edges) time += g.edge(e).free_flow_time;
    columns.push_back({m, std::move(edges), time});
    return true;
  };
  for (std::size_t m = 0; m < req.size(); ++m) {
    double c = 0.0;
    auto path = cheapest_path(g, weight, req[m].origin, req[m].dest, &c);
    if (path.empty()) throw InputError("crrp: request " + std::to_string(m) + " has no path");
    add_column(m, std::move(path));
  }
  const std::vector<double> supply = net_demand(g.node_count(), req);
  const double tolerance = 1e-9 * (1.0 + max_time * static_cast<double>(g.node_count()));

  CrrpSolution sol;
  sol.slacks.assign(network.edge_count(), 0.0);
  for (std::size_t round = 0;; ++round) {
    LinearProgram lp;
    for (const auto& col : columns) lp.add_variable(col.time);
    const std::size_t reb0 = lp.variable_count();
    if (!customer_only)
      for (EdgeIndex e = 0; e < e_count; ++e) lp.add_variable(config.rho * g.edge(e).free_flow_time);
    const std::size_t slack0 = lp.variable_count();
    for (EdgeIndex e = 0; e < e_count; ++e) lp.add_variable(slack_cost);

    std::vector<std::vector<LpTerm>> by_request(req.size()), by_edge(e_count);
    for (std::size_t j = 0; j < columns.size(); ++j) {
      by_request[columns[j].request].push_back({j, 1.0});
      for (EdgeIndex e : columns[j].edges) by_edge[e].push_back({j, 1.0});
    }
    for (std::size_t m = 0; m < req.size(); ++m)
      lp.add_row(std::move(by_request[m]), Relation::Equal, req[m].rate);
    if (!customer_only) {
      for (NodeIndex v = 0; v < g.node_count(); ++v) {
        std::vector<LpTerm> terms;
        for (EdgeIndex e : g.in_edges(v)) terms.push_back({reb0 + e, 1.0});
        for (EdgeIndex e : g.out_edges(v)) terms.push_back({reb0 + e, -1.0});
        lp.add_row(std::move(terms), Relation::Equal, supply[v]);
      }
    }
    const std::size_t cap0 = lp.row_count();
    for (EdgeIndex e = 0; e < e_count; ++e) {
      auto terms = std::move(by_edge[e]);
      if (!customer_only) terms.push_back({reb0 + e, 1.0});
      terms.push_back({slack0 + e, -1.0});
      lp.add_row(std::move(terms), Relation::LessEqual, g.edge(e).capacity);
    }

    const LpSolution master = solve_lp(lp, config.lp);
    sol.pivots += master.pivots;
    sol.status = master.status;
    if (master.status != LpStatus::Optimal) return sol;

    for (EdgeIndex e = 0; e < e_count; ++e)
      weight[e] = std::max(0.0, g.edge(e).free_flow_time - master.duals[cap0 + e]);
    bool added = false;
    for (std::size_t m = 0; m < req.size(); ++m) {
      double reduced = 0.0;
      auto path = cheapest_path(g, weight, req[m].origin, req[m].dest, &reduced);
      reduced -= master.duals[m];
      if (reduced < -tolerance) added |= add_column(m, std::move(path));
    }
    if (added && round + 1 < 10 * (req.size() + e_count)) continue;
    if (added) {
      sol.status = LpStatus::NumericalFailure;
      return sol;
    }

    FlowAssignment lifted = FlowAssignment::zeros(req.size(), e_count);
    for (std::size_t j = 0; j < columns.size(); ++j)
      for (EdgeIndex e : columns[j].edges) lifted.customer[columns[j].request][e] += master.values[j];
    if (!customer_only)
      for (EdgeIndex e = 0; e < e_count; ++e) lifted.rebalancing[e] = master.values[reb0 + e];
    sol.flows = shadow.project(lifted);
    for (EdgeIndex e = 0; e < network.edge_count(); ++e) sol.slacks[e] = master.values[slack0 + e];
    sol.objective = master.objective;
    sol.v_min = v_min(network, sol.flows);
    return sol;
  }
}

CrrpSolution solve_problem(const RoadNetwork& network, const RequestSet& requests, const CrrpConfig& config,
                           bool allow_closed_edges) {
  const bool paths_apply = config.relax_congestion && config.variant != CrrpVariant::RebalanceFixedCustomers;
  if (config.method == CrrpMethod::PathGeneration && !paths_apply)
    throw InputError("crrp: path generation needs a relaxed joint or customer-only problem");
  if (paths_apply && config.method != CrrpMethod::EdgeLp) return solve_by_paths(network, requests, config);
  CrrpProblem problem = build_problem(network, requests, config);
  const LpSolution lp = solve_lp(problem.lp, config.lp);
  CrrpSolution sol;
  sol.status = lp.status;
  sol.pivots = lp.pivots;
  sol.slacks.assign(network.edge_count(), 0.0);
  if (lp.status == LpStatus::Infeasible && !config.relax_congestion && !allow_closed_edges &&
      config.variant != CrrpVariant::RebalanceFixedCustomers) {
    const CutSearch search = network.node_count() <= kMaxExhaustiveNodes ? CutSearch::exhaustive()
                                                                          : CutSearch::sampled(2000, 1);
    ConditionReport cuts = check_cut_conditions(network, requests, search);
    if (!cuts.passed) sol.witness = cuts.worst;
  }
  if (lp.status != LpStatus::Optimal) return sol;

  const auto& layout = problem.layout;
  FlowAssignment lifted = FlowAssignment::zeros(layout.requests, layout.edges);
  for (std::size_t m = 0; m < layout.requests; ++m)
    for (EdgeIndex e = 0; e < layout.edges; ++e) lifted.customer[m][e] = lp.values[layout.customer(m, e)];
  for (EdgeIndex e = 0; e < layout.edges; ++e) lifted.rebalancing[e] = lp.values[layout.rebalancing(e)];
  sol.flows = problem.shadow.project(lifted);
  if (config.relax_congestion)
    for (EdgeIndex e = 0; e < network.edge_count(); ++e) sol.slacks[e] = lp.values[layout.slack(e)];
  sol.objective = lp.objective;
  sol.v_min = v_min(network, sol.flows);
  return sol;
}

}  // namespace

ShadowTransform shadow_transform(const RoadNetwork& network, const RequestSet& requests) {
  ShadowTransform st;
  st.original_nodes = network.node_count();
  st.original_edges = network.edge_count();
  st.shadow_of.assign(network.node_count(), kNoNode);
  st.network = network;
  st.requests = requests;

  std::vector<char> is_origin(network.node_count(), 0), is_dest(network.node_count(), 0);
  for (const Request& r : requests) {
    is_origin[r.origin] = 1;
    is_dest[r.dest] = 1;
  }
  const double link_capacity = total_rate(requests) + 1.0;
  for (NodeIndex v = 0; v < network.node_count(); ++v) {
    if (!is_origin[v] || !is_dest[v]) continue;
    std::optional<Point> pos = network.position(v);
    std::string id = network.node_id(v) + "'";
    while (st.network.find_node(id)) id += "'";
    const NodeIndex s = st.network.add_node(id, pos);
    st.shadow_of[v] = s;
    st.network.add_edge(v, s, link_capacity, 0.0);
    st.network.add_edge(s, v, link_capacity, 0.0);
  }
  for (Request& r : st.requests)
    if (st.shadow_of[r.dest] != kNoNode) r.dest = st.shadow_of[r.dest];
  return st;
}

FlowAssignment ShadowTransform::project(const FlowAssignment& lifted) const {
  FlowAssignment out = FlowAssignment::zeros(lifted.customer.size(), original_edges);
  for (std::size_t m = 0; m < lifted.customer.size(); ++m)
    std::copy_n(lifted.customer[m].begin(), original_edges, out.customer[m].begin());
  std::copy_n(lifted.rebalancing.begin(), original_edges, out.rebalancing.begin());
  return out;
}

FlowAssignment ShadowTransform::lift(const FlowAssignment& flows) const {
  FlowAssignment out = FlowAssignment::zeros(flows.customer.size(), network.edge_count());
  for (std::size_t m = 0; m < flows.customer.size(); ++m) {
    std::copy(flows.customer[m].begin(), flows.customer[m].end(), out.customer[m].begin());
    const NodeIndex s = requests[m].dest;
    if (s >= original_nodes) {
      // The companion is reached by the single link from its parent.
      for (EdgeIndex e : network.in_edges(s)) out.customer[m][e] += requests[m].rate;
    }
  }
  if (!flows.rebalancing.empty())
    std::copy(flows.rebalancing.begin(), flows.rebalancing.end(), out.rebalancing.begin());
  return out;
}

const char* to_string(CrrpVariant variant) {
  switch (variant) {
    case CrrpVariant::Joint: return "joint";
    case CrrpVariant::CustomerOnly: return "customer_only";
    case CrrpVariant::RebalanceFixedCustomers: return "rebalance_fixed_customers";
  }
  return "unknown";
}

double default_slack_cost(const RoadNetwork& network, const RequestSet& requests) {
  return network.total_free_flow_time() * total_rate(requests) + 1.0;
}

CrrpProblem build_crrp(const RoadNetwork& network, const RequestSet& requests, const CrrpConfig& config) {
  require_valid(network, requests);
  return build_problem(network, requests, config);
}

CrrpSolution solve_crrp(const RoadNetwork& network, const RequestSet& requests, const CrrpConfig& config) {
  require_valid(network, requests);
  return solve_problem(network, requests, config, false);
}

double CrrpSolution::total_slack() const {
  double s = 0.0;
  for (double d : slacks) s += d;
  return s;
}

std::int64_t v_min(const RoadNetwork& network, const FlowAssignment& flows) {
  double work = 0.0;
  for (EdgeIndex e = 0; e < network.edge_count(); ++e)
    work += network.edge(e).free_flow_time * flows.total(e);
  return static_cast<std::int64_t>(std::ceil(work - 1e-9));
}

bool FeasibilityReport::customer_ok() const {
  return nonnegativity <= tolerance && origin_balance <= tolerance && destination_balance <= tolerance &&
         transit_balance <= tolerance && capacity <= tolerance;
}

bool FeasibilityReport::rebalancing_ok() const {
  return nonnegativity <= tolerance && rebalancing_balance <= tolerance && capacity <= tolerance;
}

bool FeasibilityReport::ok() const {
  return customer_ok() && rebalancing_ok() &&
         std::all_of(cuts.begin(), cuts.end(), [](const LemmaCheck& c) { return c.passed; });
}

FeasibilityReport verify_flows(const RoadNetwork& network, const RequestSet& requests, const FlowAssignment& flows,
                               double tolerance, std::span<const Cut> cuts) {
  FeasibilityReport rep;
  rep.tolerance = tolerance;
  const std::size_t n = network.node_count();
  const std::size_t edges = network.edge_count();
  if (flows.customer.size() != requests.size()) throw InputError("verify_flows: one customer flow per request expected");
  for (const auto& fm : flows.customer)
    if (fm.size() != edges) throw InputError("verify_flows: customer flow has wrong edge count");
  if (flows.rebalancing.size() != edges) throw InputError("verify_flows: rebalancing flow has wrong edge count");

  std::vector<double> balance(n);
  for (std::size_t m = 0; m < requests.size(); ++m) {
    std::fill(balance.begin(), balance.end(), 0.0);
    for (EdgeIndex e = 0; e < edges; ++e) {
      const double f = flows.customer[m][e];
      rep.nonnegativity = std::max(rep.nonnegativity, -f);
      balance[network.edge(e).to] += f;
      balance[network.edge(e).from] -= f;
    }
    const Request& r = requests[m];
    for (NodeIndex v = 0; v < n; ++v) {
      if (v == r.origin) {
        rep.origin_balance = std::max(rep.origin_balance, std::abs(balance[v] + r.rate));
      } else if (v == r.dest) {
        rep.destination_balance = std::max(rep.destination_balance, std::abs(balance[v] - r.rate));
      } else {
        rep.transit_balance = std::max(rep.transit_balance, std::abs(balance[v]));
      }
    }
  }

  const std::vector<double> supply = net_demand(n, requests);
  std::fill(balance.begin(), balance.end(), 0.0);
  for (EdgeIndex e = 0; e < edges; ++e) {
    const double f = flows.rebalancing[e];
    rep.nonnegativity = std::max(rep.nonnegativity, -f);
    balance[network.edge(e).to] += f;
    balance[network.edge(e).from] -= f;
    rep.capacity = std::max(rep.capacity, flows.total(e) - network.edge(e).capacity);
  }
  for (NodeIndex v = 0; v < n; ++v)
    rep.rebalancing_balance = std::max(rep.rebalancing_balance, std::abs(balance[v] - supply[v]));

  for (const Cut& cut : cuts) {
    const CutReport cr = cut_report(network, cut, requests, &flows);
    LemmaCheck check;
    check.s_side = cut.members();
    check.net_flow = *cr.f_out - *cr.f_in;
    for (const Request& r : requests) {
      if (cut.contains(r.origin)) check.net_demand += r.rate;
      if (cut.contains(r.dest)) check.net_demand -= r.rate;
    }
    check.passed = std::abs(check.net_flow - check.net_demand) <= tolerance * std::max(1.0, total_rate(requests));
    rep.cuts.push_back(std::move(check));
  }
  return rep;
}

bool BearingFilter::operator()(const RoadNetwork& network, EdgeIndex e) const {
  const Edge& edge = network.edge(e);
  const auto& a = network.position(edge.from);
  const auto& b = network.position(edge.to);
  if (!a || !b) throw InputError("bearing filter needs node coordinates");
  const double dx = b->x - a->x, dy = b->y - a->y;
  if (dx == 0.0 && dy == 0.0) return false;
  const double bearing = std::atan2(dx, dy) * 180.0 / std::numbers::pi;
  double diff = std::fmod(bearing - center_deg, 360.0);
  if (diff > 180.0) diff -= 360.0;
  if (diff < -180.0) diff += 360.0;
  return std::abs(diff) <= half_width_deg;
}

double SweepPoint::relative_gap() const {
  if (mean_time_without_rebalancing == 0.0) return 0.0;
  return (mean_time_with_rebalancing - mean_time_without_rebalancing) / mean_time_without_rebalancing;
}

double mean_customer_time(const RoadNetwork& network, const RequestSet& requests, const FlowAssignment& flows,
                          const BprParams& bpr) {
  const double rate = total_rate(requests);
  if (rate <= 0.0) return 0.0;
  double total = 0.0;
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    const double customers = flows.customer_total(e);
    if (customers <= 0.0) continue;
    const Edge& edge = network.edge(e);
    const double f = flows.total(e);
    const double delay = edge.capacity > 0.0 ? bpr_delay(edge.free_flow_time, f, edge.capacity, bpr)
                                             : std::numeric_limits<double>::infinity();
    total += delay * customers;
  }
  return total / rate;
}

SweepReport asymmetry_sweep(const RoadNetwork& network, const RequestSet& requests, std::span<const double> reductions,
                            const EdgeFilter& filter, const SweepConfig& config) {
  require_valid(network, requests);
  SweepReport report;
  std::vector<EdgeIndex> selected;
  for (EdgeIndex e = 0; e < network.edge_count(); ++e)
    if (filter(network, e)) selected.push_back(e);
  const double slack_cost = config.slack_cost.value_or(default_slack_cost(network, requests));
  for (double r : reductions) {
    if (!(r >= 0.0 && r <= 1.0)) throw InputError("asymmetry_sweep: reductions must lie in [0, 1]");
    RoadNetwork derated = network;
    for (EdgeIndex e : selected) derated.set_capacity(e, network.edge(e).capacity * (1.0 - r));
    require_valid_allowing_closed_edges(derated, requests);

    CrrpConfig with;
    with.rho = config.rho;
    with.relax_congestion = true;
    with.slack_cost = slack_cost;
    CrrpConfig without = with;
    without.variant = CrrpVariant::CustomerOnly;

    const CrrpSolution a = solve_problem(derated, requests, with, true);
    const CrrpSolution b = solve_problem(derated, requests, without, true);
    if (a.status != LpStatus::Optimal || b.status != LpStatus::Optimal)
      throw NumericalError(std::string("asymmetry_sweep: relaxed solve returned ") +
                           to_string(a.status != LpStatus::Optimal ? a.status : b.status));
    SweepPoint p;
    p.reduction = r;
    p.derated_edges = selected.size();
    p.mean_time_with_rebalancing = mean_customer_time(derated, requests, a.flows, config.bpr);
    p.mean_time_without_rebalancing = mean_customer_time(derated, requests, b.flows, config.bpr);
    p.slack_with_rebalancing = a.total_slack();
    p.slack_without_rebalancing = b.total_slack();
    p.objective_with = a.objective;
    p.objective_without = b.objective;
    report.points.push_back(p);
  }
  return report;
}

double min_peak_utilization(const RoadNetwork& network, const RequestSet& requests) {
  require_valid(network, requests);
  if (requests.empty()) return 0.0;
  const std::size_t e_count = network.edge_count();

  // Minimize u over path flows whose total free-flow time stays within
  // rounding of the uncongested optimum, with flow(e) <= u * c(e). Paths are
  // priced in as for the relaxed problem: the budget dual turns free-flow
  // time into part of the pricing weight.
  std::vector<double> weight(e_count);
  double max_time = 0.0;
  for (EdgeIndex e = 0; e < e_count; ++e) {
    weight[e] = network.edge(e).free_flow_time;
    max_time = std::max(max_time, weight[e]);
  }
  struct PathColumn {
    std::size_t request;
    std::vector<EdgeIndex> edges;
    double time;
  };
  std::vector<PathColumn> columns;
  std::set<std::pair<std::size_t, std::vector<EdgeIndex>>> seen;
  double optimum = 0.0;
  for (std::size_t m = 0; m < requests.size(); ++m) {
    double time = 0.0;
    auto path = cheapest_path(network, weight, requests[m].origin, requests[m].dest, &time);
    if (path.empty()) throw InputError("calibration: request " + std::to_string(m) + " has no path");
    optimum += requests[m].rate * time;
    seen.insert({m, path});
    columns.push_back({m, std::move(path), time});
  }
  const double budget = optimum * (1.0 + 1e-9) + 1e-12;
  const double tolerance = 1e-9 * (1.0 + max_time * static_cast<double>(network.node_count()));

  for (std::size_t round = 0; round < 10 * (requests.size() + e_count); ++round) {
    LinearProgram lp;
    for (std::size_t j = 0; j < columns.size(); ++j) lp.add_variable(0.0);
    const std::size_t peak = lp.add_variable(1.0);
    std::vector<std::vector<LpTerm>> by_request(requests.size()), by_edge(e_count);
    std::vector<LpTerm> cost_terms;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      by_request[columns[j].request].push_back({j, 1.0});
      for (EdgeIndex e : columns[j].edges) by_edge[e].push_back({j, 1.0});
      cost_terms.push_back({j, columns[j].time});
    }
    for (std::size_t m = 0; m < requests.size(); ++m)
      lp.add_row(std::move(by_request[m]), Relation::Equal, requests[m].rate);
    const std::size_t budget_row = lp.add_row(std::move(cost_terms), Relation::LessEqual, budget);
    const std::size_t cap0 = lp.row_count();
    for (EdgeIndex e = 0; e < e_count; ++e) {
      auto terms = std::move(by_edge[e]);
      terms.push_back({peak, -network.edge(e).capacity});
      lp.add_row(std::move(terms), Relation::LessEqual, 0.0);
    }
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal)
      throw NumericalError(std::string("peak utilization solve returned ") + to_string(sol.status));

    const double y_budget = sol.duals[budget_row];
    for (EdgeIndex e = 0; e < e_count; ++e)
      weight[e] = std::max(0.0, -y_budget * network.edge(e).free_flow_time - sol.duals[cap0 + e]);
    bool added = false;
    for (std::size_t m = 0; m < requests.size(); ++m) {
      double reduced = 0.0;
      auto path = cheapest_path(network, weight, requests[m].origin, requests[m].dest, &reduced);
      reduced -= sol.duals[m];
      if (reduced < -tolerance && seen.insert({m, path}).second) {
        double time = 0.0;
        for (EdgeIndex e : path) time += network.edge(e).free_flow_time;
        columns.push_back({m, std::move(path), time});
        added = true;
      }
    }
    if (!added) return sol.values[peak];
  }
  throw NumericalError("peak utilization: path pricing did not settle");
}

CalibrationResult calibrate_capacities(RoadNetwork& network, const RequestSet& requests, double target_utilization) {
  if (!(target_utilization > 0.0)) throw InputError("calibration target must be positive");
  CalibrationResult result;
  const double peak = min_peak_utilization(network, requests);
  if (peak <= 0.0) return result;  // no demand: nothing to calibrate
  // The peak scales with 1/capacity, so one rescale lands on the target.
  result.scale = peak / target_utilization;
  network.scale_capacities(result.scale);
  result.max_utilization = min_peak_utilization(network, requests);
  return result;
}

}  // namespace amod
