#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amod/lp.hpp"
#include "amod/netgraph.hpp"
#include "amod/routing.hpp"

namespace amod {

inline constexpr NodeIndex kNoNode = std::numeric_limits<NodeIndex>::max();

/// Splits every node that is both an origin and a destination into the node
/// itself (keeping the origins) and a companion that receives the
/// destinations. The pair is joined by zero-time edges in both directions
/// whose capacity exceeds the total demand, so they never bind.
///
/// Original nodes and edges keep their indices; companions and their links
/// are appended.
struct ShadowTransform {
  RoadNetwork network;
  RequestSet requests;
  std::size_t original_nodes = 0;
  std::size_t original_edges = 0;
  std::vector<NodeIndex> shadow_of;  // kNoNode when the node was not split

  bool applied() const { return network.node_count() != original_nodes; }

  // Maps flows on the transformed network back by dropping companion links.
  FlowAssignment project(const FlowAssignment& lifted) const;
  // Maps flows on the original network forward: demand that terminates at a
  // split node is carried over the link into its companion.
  FlowAssignment lift(const FlowAssignment& flows) const;
};

ShadowTransform shadow_transform(const RoadNetwork& network, const RequestSet& requests);

enum class CrrpVariant { Joint, CustomerOnly, RebalanceFixedCustomers };

const char* to_string(CrrpVariant variant);

// EdgeLp states one flow variable per request and edge. PathGeneration
// prices shortest paths into a master over path flows; it needs the slack
// of the relaxed problem to start from a feasible master, so it applies to
// relaxed Joint and CustomerOnly solves. Auto picks it whenever it applies.
enum class CrrpMethod { Auto, EdgeLp, PathGeneration };

struct CrrpConfig {
  double rho = 1.0;
  bool relax_congestion = false;
  std::optional<double> slack_cost;  // default: (sum of t) * (sum of rates) + 1
  CrrpVariant variant = CrrpVariant::Joint;
  // Required by RebalanceFixedCustomers: [request][edge] on the original network.
  std::vector<std::vector<double>> fixed_customer_flows;
  CrrpMethod method = CrrpMethod::Auto;
  LpTolerances lp{};
};

double default_slack_cost(const RoadNetwork& network, const RequestSet& requests);

// Column positions of the CRRP variables.
struct CrrpLayout {
  std::size_t requests = 0;
  std::size_t edges = 0;
  bool has_slack = false;

  std::size_t customer(std::size_t m, EdgeIndex e) const { return m * edges + e; }
  std::size_t rebalancing(EdgeIndex e) const { return requests * edges + e; }
  std::size_t slack(EdgeIndex e) const { return (requests + 1) * edges + e; }
  std::size_t variable_count() const { return (requests + 1 + (has_slack ? 1 : 0)) * edges; }
};

struct CrrpProblem {
  ShadowTransform shadow;  // the LP is stated on shadow.network
  CrrpLayout layout;
  LinearProgram lp;
  double slack_cost = 0.0;
};

CrrpProblem build_crrp(const RoadNetwork& network, const RequestSet& requests, const CrrpConfig& config);

struct CrrpSolution {
  LpStatus status = LpStatus::NumericalFailure;
  FlowAssignment flows;       // on the original network
  double objective = 0.0;     // LP objective, slack penalties included
  std::vector<double> slacks;  // per original edge; zeros when unrelaxed
  std::int64_t v_min = 0;
  std::optional<CutViolation> witness;  // a violated cut condition when infeasible
  std::size_t pivots = 0;

  double total_slack() const;
};

CrrpSolution solve_crrp(const RoadNetwork& network, const RequestSet& requests, const CrrpConfig& config);

// Fleet-size lower bound: ceil of the vehicle-time carried by the flows.
std::int64_t v_min(const RoadNetwork& network, const FlowAssignment& flows);

struct LemmaCheck {
  std::vector<NodeIndex> s_side;
  double net_flow = 0.0;       // F_out - F_in
  double net_demand = 0.0;     // rates originating in S minus rates ending in S
  bool passed = false;
};

struct FeasibilityReport {
  double tolerance = 0.0;
  double nonnegativity = 0.0;
  double origin_balance = 0.0;
  double destination_balance = 0.0;
  double transit_balance = 0.0;
  double rebalancing_balance = 0.0;
  double capacity = 0.0;
  std::vector<LemmaCheck> cuts;

  bool customer_ok() const;
  bool rebalancing_ok() const;
  bool ok() const;
};

FeasibilityReport verify_flows(const RoadNetwork& network, const RequestSet& requests,
                               const FlowAssignment& flows, double tolerance,
                               std::span<const Cut> cuts = {});

// Edge selector by direction of travel. Bearing is measured in degrees
// clockwise from +y (north); the window is [center - half_width, center + half_width].
struct BearingFilter {
  double center_deg = 0.0;
  double half_width_deg = 45.0;
  bool operator()(const RoadNetwork& network, EdgeIndex e) const;
};

using EdgeFilter = std::function<bool(const RoadNetwork&, EdgeIndex)>;

struct SweepPoint {
  double reduction = 0.0;
  // Mean customer travel time under BPR on total flow; infinite when a
  // zero-capacity edge carries flow.
  double mean_time_with_rebalancing = 0.0;
  double mean_time_without_rebalancing = 0.0;
  double slack_with_rebalancing = 0.0;
  double slack_without_rebalancing = 0.0;
  double objective_with = 0.0;
  double objective_without = 0.0;
  std::size_t derated_edges = 0;

  double relative_gap() const;
};

struct SweepReport {
  std::vector<SweepPoint> points;
};

struct SweepConfig {
  double rho = 1.0;
  std::optional<double> slack_cost;
  BprParams bpr{};
};

SweepReport asymmetry_sweep(const RoadNetwork& network, const RequestSet& requests,
                            std::span<const double> reductions, const EdgeFilter& filter,
                            const SweepConfig& config = {});

// Mean per-customer travel time of a solution when each edge delay follows
// BPR evaluated at the edge's total flow.
double mean_customer_time(const RoadNetwork& network, const RequestSet& requests,
                          const FlowAssignment& flows, const BprParams& bpr);

struct CalibrationResult {
  double scale = 1.0;            // factor applied to every capacity
  double max_utilization = 0.0;  // peak after rescaling
};

// Smallest peak edge utilization flow(e) / capacity(e) over all customer
// routings of minimum free-flow cost. Ties between shortest routings make
// the peak of any single optimum ambiguous; this one is not.
double min_peak_utilization(const RoadNetwork& network, const RequestSet& requests);

// Rescales capacities so that the customer-only optimum peaks at the target
// utilization. The network is modified in place.
CalibrationResult calibrate_capacities(RoadNetwork& network, const RequestSet& requests,
                                       double target_utilization = 0.95);

}  // namespace amod
