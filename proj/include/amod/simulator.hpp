#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amod/netgraph.hpp"
#include "amod/rebalance.hpp"
#include "amod/regions.hpp"
#include "amod/routing.hpp"
#include "amod/trips.hpp"

namespace amod {

enum class Rebalancer { CongestionAware, BaselineP2P, None };

const char* to_string(Rebalancer rebalancer);
Rebalancer parse_rebalancer(const std::string& name);  // congestion_aware | baseline_p2p | none

enum class Placement { Random, Even };

struct SimConfig {
  double time_step = 6.0;          // seconds
  double rebalance_period = 120.0;  // t_hor, a multiple of time_step
  std::optional<double> t_vicinity;  // defaults to rebalance_period
  std::size_t fleet_size = 50;
  // When set, every edge with coordinates at both ends gets free-flow time
  // length / speed.
  std::optional<double> free_flow_speed;
  BprParams bpr{};
  Rebalancer rebalancer = Rebalancer::CongestionAware;
  std::uint64_t seed = 1;
  std::optional<double> duration;  // defaults to last arrival + drain_time
  double drain_time = 1800.0;
  double capacity_multiplier = 1.0;  // exogenous traffic; may be infinite
  std::size_t regions = 8;           // k-means cluster count when regions are not supplied
  Placement placement = Placement::Random;
  std::optional<double> slack_cost;
};

struct SimMetrics {
  std::size_t customers = 0;
  std::size_t trips_completed = 0;
  double mean_wait = 0.0;     // all customers, censored at the end of the run
  double mean_travel = 0.0;   // completed trips
  double mean_service = 0.0;  // completed trips, wait + travel
  double pct_wait_over_5min = 0.0;
  double mean_rebalancing_vehicles = 0.0;  // per-step average
  std::size_t rebalancing_dispatches = 0;  // vehicles sent
  std::size_t unserviceable = 0;           // destination unreachable from origin
  std::size_t steps = 0;
  double end_time = 0.0;
};

struct TraceRow {
  double clock = 0.0;  // end of the step
  std::size_t waiting = 0;
  std::size_t in_progress = 0;
  std::size_t congested_edges = 0;
  std::size_t rebalancing_vehicles = 0;
  std::size_t arrived = 0;
  std::size_t completed = 0;
};

struct SimResult {
  SimMetrics metrics;
  std::vector<TraceRow> trace;
};

// Runs the fleet simulation. Regions are clustered from config.regions and
// config.seed when not supplied. Throws InputError on a malformed trip
// stream or configuration.
SimResult run_simulation(const RoadNetwork& network, const TripStream& trips, const SimConfig& config,
                         const Regions* regions = nullptr);

// Runs every configuration on the same network, trips and regions.
std::vector<SimResult> compare(const RoadNetwork& network, const TripStream& trips,
                               std::span<const SimConfig> configs, const Regions* regions = nullptr);

std::string write_trace_csv(std::span<const TraceRow> trace);

struct P2PDispatch {
  std::size_t from_region = 0;
  std::size_t to_region = 0;
  std::int64_t vehicles = 0;
};

// Point-to-point rebalancing plan: a transportation problem that moves
// surplus vehicles to deficit regions at minimum anchor-to-anchor free-flow
// time, blind to road capacity. When surplus and deficit totals differ, the
// smaller one is moved in full.
std::vector<P2PDispatch> baseline_p2p_rebalance(std::span<const RegionSnapshot> regions,
                                                std::span<const RegionState> state, FreeFlowOracle& oracle);

}  // namespace amod
