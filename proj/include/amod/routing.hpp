#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "amod/netgraph.hpp"

namespace amod {

struct BprParams {
  double alpha = 0.15;
  double beta = 4.0;
};

// t_free * (1 + alpha * (flow / capacity)^beta). Throws InputError when
// capacity <= 0 or flow < 0.
double bpr_delay(double t_free, double flow, double capacity, const BprParams& params = {});

// Total flow per edge (vehicles per unit time), indexed by EdgeIndex.
using EdgeLoad = std::vector<double>;

class NoRouteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reverse free-flow shortest times, computed once per target and cached.
class FreeFlowOracle {
 public:
  explicit FreeFlowOracle(const RoadNetwork& network) : network_(&network) {}

  // Free-flow time from every node to target (infinity when unreachable).
  const std::vector<double>& to_target(NodeIndex target);
  double time(NodeIndex from, NodeIndex to) { return to_target(to)[from]; }

  const RoadNetwork& network() const { return *network_; }

 private:
  const RoadNetwork* network_;
  std::unordered_map<NodeIndex, std::vector<double>> cache_;
};

enum class Heuristic {
  Auto,       // free-flow oracle when given, else straight line when coordinates exist, else zero
  FreeFlow,   // exact free-flow time to the destination
  Euclidean,  // straight-line distance over the fastest edge speed
  Zero,
};

struct RouteOptions {
  Heuristic heuristic = Heuristic::Auto;
  FreeFlowOracle* oracle = nullptr;  // required for FreeFlow; used by Auto when present
  BprParams bpr{};
};

struct Route {
  std::vector<NodeIndex> nodes;
  std::vector<EdgeIndex> edges;
  double time = 0.0;  // sum of edge delays at the frozen loads, in path order
};

// Minimum-delay path under BPR at the given loads (empty loads mean zero).
// Equal-cost paths resolve to the lexicographically smallest node sequence.
// Throws NoRouteError when dest is unreachable.
Route astar_route(const RoadNetwork& network, const EdgeLoad& loads, NodeIndex origin, NodeIndex dest,
                  const RouteOptions& options = {});

// Delay of every edge at the given loads.
std::vector<double> edge_delays(const RoadNetwork& network, const EdgeLoad& loads, const BprParams& params);

}  // namespace amod
