#include <doctest.h>

#include <cmath>
#include <set>

#include "amod/error.hpp"
#include "amod/lp.hpp"
#include "amod/regions.hpp"
#include "amod/simulator.hpp"
#include "amod/synth.hpp"

using namespace amod;

namespace {

RoadNetwork line(std::size_t n, double t, double cap) {
  RoadNetwork net;
  for (std::size_t i = 0; i < n; ++i) net.add_node("n" + std::to_string(i), Point{100.0 * static_cast<double>(i), 0.0});
  for (std::size_t i = 0; i + 1 < n; ++i) {
    net.add_edge(i, i + 1, cap, t);
    net.add_edge(i + 1, i, cap, t);
  }
  return net;
}

}  // namespace

TEST_CASE("k-means regions partition the grid") {
  const auto net = make_grid({});
  const auto r = kmeans_regions(net, 4, 3);
  REQUIRE(r.size() == 4);
  std::size_t total = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    total += r.members[i].size();
    CHECK(r.region_of[r.anchors[i]] == i);
    for (auto v : r.members[i]) CHECK(r.region_of[v] == i);
  }
  CHECK(total == net.node_count());
  // Same seed, same clustering.
  CHECK(kmeans_regions(net, 4, 3).region_of == r.region_of);
  CHECK_THROWS_AS(kmeans_regions(net, 0, 1), InputError);
  CHECK_THROWS_AS(kmeans_regions(net, 101, 1), InputError);
}

TEST_CASE("single trip with a vehicle at the origin") {
  const auto net = line(4, 10.0, 1.0);
  const auto regions = single_region(net);
  SimConfig cfg;
  cfg.fleet_size = 1;
  cfg.placement = Placement::Even;  // vehicle 0 at node 0
  cfg.rebalancer = Rebalancer::None;
  cfg.duration = 120.0;
  const TripStream trips{{0.0, 0, 3}};
  const auto res = run_simulation(net, trips, cfg, &regions);
  CHECK(res.metrics.customers == 1);
  CHECK(res.metrics.trips_completed == 1);
  CHECK(res.metrics.mean_wait == 0.0);
  // Speeds come from the start-of-step counts, so the vehicle slows itself
  // down at most to flow 1/10 against capacity 1 on each edge.
  const double per_edge = 10.0 * (1.0 + 0.15 * std::pow(0.1, 4.0));
  CHECK(res.metrics.mean_travel > 30.0);
  CHECK(res.metrics.mean_travel <= 3.0 * per_edge);
  CHECK(std::fabs(res.metrics.mean_travel - 30.0) <= cfg.time_step);
  CHECK(res.metrics.mean_service == res.metrics.mean_wait + res.metrics.mean_travel);
}

TEST_CASE("infinite capacity gives free-flow travel") {
  const auto net = line(4, 10.0, 1.0);
  const auto regions = single_region(net);
  SimConfig cfg;
  cfg.fleet_size = 1;
  cfg.placement = Placement::Even;
  cfg.rebalancer = Rebalancer::None;
  cfg.capacity_multiplier = kInfinity;
  cfg.duration = 200.0;
  const TripStream trips{{0.0, 3, 1}};
  const auto res = run_simulation(net, trips, cfg, &regions);
  REQUIRE(res.metrics.trips_completed == 1);
  CHECK(res.metrics.mean_wait == 30.0);
  CHECK(res.metrics.mean_travel == 20.0);
}

TEST_CASE("zero customers and a balanced fleet") {
  const auto net = make_grid({4, 4, 200.0, 1.0, 11.0});
  const auto regions = kmeans_regions(net, 4, 1);
  SimConfig cfg;
  cfg.fleet_size = 8;
  cfg.placement = Placement::Even;
  cfg.duration = 600.0;
  const auto res = run_simulation(net, {}, cfg, &regions);
  CHECK(res.metrics.customers == 0);
  CHECK(res.metrics.trips_completed == 0);
  CHECK(res.metrics.mean_wait == 0.0);
  CHECK(res.metrics.rebalancing_dispatches == 0);
  CHECK(res.trace.size() == 100);
}

TEST_CASE("accounting, determinism and rebalancer ordering under imbalance") {
  auto net = make_grid({6, 6, 200.0, 0.5, 11.0});
  const auto regions = kmeans_regions(net, 4, 7);
  const auto trips = make_trips(net, {300, 1800.0, 0.7, 5});
  SimConfig cfg;
  cfg.fleet_size = 12;
  cfg.seed = 5;
  std::vector<SimConfig> configs(4, cfg);
  configs[1].rebalancer = Rebalancer::None;
  configs[2].rebalancer = Rebalancer::BaselineP2P;
  const auto runs = compare(net, trips, configs, &regions);

  for (const auto& run : runs) {
    for (const auto& row : run.trace) CHECK(row.arrived == row.completed + row.in_progress + row.waiting);
    CHECK(run.metrics.customers == trips.size());
    CHECK(run.metrics.pct_wait_over_5min >= 0.0);
    CHECK(run.metrics.pct_wait_over_5min <= 100.0);
  }
  // Identical configurations produce identical traces and metrics.
  CHECK(runs[0].metrics.mean_wait == runs[3].metrics.mean_wait);
  CHECK(write_trace_csv(runs[0].trace) == write_trace_csv(runs[3].trace));
  CHECK(runs[0].metrics.trips_completed >= runs[1].metrics.trips_completed);
  CHECK(runs[1].metrics.rebalancing_dispatches == 0);
  CHECK(runs[0].metrics.rebalancing_dispatches > 0);
  CHECK(runs[2].metrics.rebalancing_dispatches > 0);
}

TEST_CASE("config and trip validation") {
  const auto net = line(3, 5.0, 1.0);
  SimConfig cfg;
  cfg.rebalance_period = 10.0;  // not a multiple of 6
  CHECK_THROWS_AS(run_simulation(net, {}, cfg), InputError);
  cfg = {};
  const TripStream unsorted{{5.0, 0, 1}, {1.0, 1, 2}};
  CHECK_THROWS_AS(run_simulation(net, unsorted, cfg), InputError);
  const TripStream bad_node{{0.0, 0, 9}};
  CHECK_THROWS_AS(run_simulation(net, bad_node, cfg), InputError);
  CHECK_THROWS_AS(parse_rebalancer("greedy"), InputError);
  CHECK(parse_rebalancer("baseline_p2p") == Rebalancer::BaselineP2P);
}

TEST_CASE("baseline point-to-point plans") {
  // Three anchors on a line: 0 -- 1 -- 2, ten seconds per hop.
  const auto net = line(3, 10.0, 1.0);
  FreeFlowOracle oracle(net);
  std::vector<RegionSnapshot> snap{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};

  SUBCASE("unique matching") {
    std::vector<RegionState> st(2);
    st[0].excess = 2;
    st[1].excess = -2;
    std::vector<RegionSnapshot> two{{0, 0, 0}, {2, 0, 0}};
    const auto plan = baseline_p2p_rebalance(two, st, oracle);
    REQUIRE(plan.size() == 1);
    CHECK(plan[0].from_region == 0);
    CHECK(plan[0].to_region == 1);
    CHECK(plan[0].vehicles == 2);
  }
  SUBCASE("balanced") {
    std::vector<RegionState> st(3);
    CHECK(baseline_p2p_rebalance(snap, st, oracle).empty());
  }
  SUBCASE("one surplus split over two deficits") {
    std::vector<RegionState> st(3);
    st[1].excess = 2;
    st[0].excess = -1;
    st[2].excess = -1;
    const auto plan = baseline_p2p_rebalance(snap, st, oracle);
    REQUIRE(plan.size() == 2);
    CHECK(plan[0].from_region == 1);
    CHECK(plan[0].to_region == 0);
    CHECK(plan[0].vehicles == 1);
    CHECK(plan[1].to_region == 2);
    CHECK(plan[1].vehicles == 1);
  }
  SUBCASE("two surpluses compete for the nearer deficit") {
    std::vector<RegionState> st(3);
    st[0].excess = 1;
    st[1].excess = 1;
    st[2].excess = -1;
    const auto plan = baseline_p2p_rebalance(snap, st, oracle);
    REQUIRE(plan.size() == 1);
    CHECK(plan[0].from_region == 1);  // 10 s beats 20 s
  }
}
