#pragma once

#include <optional>
#include <string>
#include <vector>

#include "amod/canonical_json.hpp"
#include "amod/netgraph.hpp"
#include "amod/rebalance.hpp"
#include "amod/routing.hpp"

namespace amod {

std::string read_file(const std::string& path);  // throws InputError
void write_file(const std::string& path, const std::string& content);

Json parse_json(const std::string& text, const std::string& what);  // throws InputError

// Graph JSON:
//   {"nodes": [{"id": "a", "x": 0, "y": 0}, ...],
//    "edges": [{"from": "a", "to": "b", "capacity": 1, "free_flow_time": 2}, ...],
//    "origin": {"lat": 40.7, "lon": -74.0}}          (optional)
// Coordinates are optional per node. The result is not validated.
RoadNetwork graph_from_json(const Json& j);
Json graph_to_json(const RoadNetwork& network);
RoadNetwork load_graph(const std::string& path);
// Doubles are written in shortest round-trip form so load(save(g)) == g.
std::string save_graph(const RoadNetwork& network);

// {"requests": [{"origin": "a", "dest": "b", "rate": 1.5}, ...]} or a bare array.
RequestSet requests_from_json(const Json& j, const RoadNetwork& network);
Json requests_to_json(const RequestSet& requests, const RoadNetwork& network);

// {"loads": [{"from": "a", "to": "b", "flow": 0.4}, ...]}; unlisted edges carry 0.
EdgeLoad loads_from_json(const Json& j, const RoadNetwork& network);

// Per-edge values keyed by endpoints, for reports.
Json edge_values_to_json(const RoadNetwork& network, const std::vector<double>& values, const char* key,
                         bool skip_zero = true);

// Snapshot for one rebalancing round:
//   {"regions": [{"anchor": "a", "idle_vehicles": 3, "waiting_customers": 1}, ...],
//    "inbound": [{"from_region": 0, "to_region": 1, "eta": 40}, ...],        (optional)
//    "t_vicinity": 120,                                                      (optional)
//    "residual_capacity": [{"from": "a", "to": "b", "capacity": 2}, ...],    (optional)
//    "slack_cost": 1000}                                                     (optional)
// Edges missing from residual_capacity default to floor(capacity).
struct RebalanceSnapshot {
  std::vector<RegionSnapshot> regions;
  std::vector<InboundVehicle> inbound;
  double t_vicinity = 120.0;
  std::vector<std::int64_t> residual_capacity;
  std::optional<double> slack_cost;
};

RebalanceSnapshot snapshot_from_json(const Json& j, const RoadNetwork& network);

}  // namespace amod
