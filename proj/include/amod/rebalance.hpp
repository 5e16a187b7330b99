#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "amod/netgraph.hpp"

namespace amod {

inline constexpr double kSaturationTolerance = 1e-9;

struct DefectiveSets {
  std::vector<NodeIndex> origins;       // rebalancing inflow falls short
  std::vector<NodeIndex> destinations;  // vehicles accumulate
  bool empty() const { return origins.empty() && destinations.empty(); }
};

struct PartialRebalancingFlow {
  std::vector<double> flow;  // per edge
  DefectiveSets defective;
};

// Classifies origins and destinations against the rebalancing balance.
// Throws InputError if the rebalancing flow is not a partial rebalancing
// flow for these customer flows (wrong-direction imbalance, imbalance at a
// transit node, negative flow, or a capacity overrun). Nodes that are both
// origin and destination must be split beforehand.
DefectiveSets find_defective(const RoadNetwork& network, const RequestSet& requests,
                             const FlowAssignment& customer_flows, std::span<const double> partial,
                             double tolerance = kSaturationTolerance);

struct FeasibleRebalancing {
  std::vector<double> flow;  // per original edge
  std::size_t augmentations = 0;
};

struct Blocked {
  PartialRebalancingFlow partial;
  std::vector<NodeIndex> s_side;  // holds every defective destination, no defective origin
  double c_out = 0.0;
  double c_in = 0.0;
  std::size_t augmentations = 0;
  double imbalance() const { return c_in - c_out; }
};

using RebalancingOutcome = std::variant<FeasibleRebalancing, Blocked>;

// Called after every augmentation with the current partial flow and the
// network it lives on (which includes companion nodes when origins and
// destinations share a node).
using AugmentObserver = std::function<void(const RoadNetwork&, const RequestSet&, const FlowAssignment&,
                                           std::span<const double>)>;

// Builds a rebalancing flow by repeatedly pushing flow from a defective
// destination to a defective origin along a path with spare capacity.
// Throws InputError when the customer flows are not feasible.
RebalancingOutcome construct_rebalancing_flow(const RoadNetwork& network, const RequestSet& requests,
                                              const FlowAssignment& customer_flows,
                                              const AugmentObserver& observer = {});

// Per-region balance for the periodic rebalancing program.
struct RegionBalance {
  NodeIndex anchor = 0;
  std::int64_t excess = 0;   // may be negative
  std::int64_t desired = 0;  // >= 0
};

struct RebalanceInstance {
  std::vector<RegionBalance> regions;
  std::vector<std::int64_t> residual_capacity;  // per edge, >= 0
  std::optional<double> slack_cost;

  std::vector<std::size_t> origins() const;       // excess > desired
  std::vector<std::size_t> destinations() const;  // excess < desired
  std::int64_t total_imbalance() const;           // sum of |excess - desired|
};

struct RealtimeRebalance {
  std::vector<std::int64_t> flow;              // per edge
  std::vector<std::int64_t> origin_slack;      // per region, zero outside the origin set
  std::vector<std::int64_t> destination_slack;  // per region, zero outside the destination set
  double objective = 0.0;
  double slack_cost = 0.0;
  double max_fractionality = 0.0;  // distance of the LP vertex from integers before rounding
};

double default_rebalance_slack_cost(const RebalanceInstance& instance, std::span<const double> edge_times);

// Solves the integral rebalancing program through its LP relaxation.
// edge_times defaults to free-flow times. Throws std::logic_error if the
// vertex is not integral and NumericalError if the LP fails.
RealtimeRebalance solve_realtime_rebalance(const RebalanceInstance& instance, const RoadNetwork& network,
                                           std::span<const double> edge_times = {});

struct FlowPath {
  std::vector<NodeIndex> nodes;  // cycles repeat the first node at the end
  std::int64_t count = 0;
};

struct PathSet {
  std::vector<FlowPath> paths;
  std::vector<FlowPath> cycles;
  std::size_t size() const { return paths.size() + cycles.size(); }
};

// Splits a nonnegative integral edge flow into supply-to-demand paths and
// cycles. Throws InputError on negative input.
PathSet flow_decompose(const RoadNetwork& network, std::span<const std::int64_t> flow);
// Same, for real-valued input that must be integral within 1e-9.
PathSet flow_decompose(const RoadNetwork& network, std::span<const double> flow);

std::vector<std::int64_t> recompose(const RoadNetwork& network, const PathSet& paths);

struct RegionSnapshot {
  NodeIndex anchor = 0;
  std::int64_t idle_vehicles = 0;     // v_i
  std::int64_t waiting_customers = 0;  // c_i
};

struct InboundVehicle {
  std::size_t from_region = 0;
  std::size_t to_region = 0;
  double eta = 0.0;  // time until arrival
};

struct RegionState {
  std::int64_t vehicles = 0;  // v_i
  std::int64_t inbound = 0;   // sum over j of v_ji
  std::int64_t owned = 0;
  std::int64_t excess = 0;
  std::int64_t desired = 0;
};

// Even split of total over n regions by largest remainder, ties to the
// lowest index. Nonpositive totals give zero everywhere.
std::vector<std::int64_t> even_split(std::int64_t total, std::size_t n);

std::vector<RegionState> compute_region_state(std::span<const RegionSnapshot> regions,
                                              std::span<const InboundVehicle> inbound, double t_vicinity);

RebalanceInstance make_rebalance_instance(std::span<const RegionSnapshot> regions,
                                          std::span<const RegionState> state,
                                          std::vector<std::int64_t> residual_capacity);

}  // namespace amod
