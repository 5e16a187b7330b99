#pragma once

#include <cstdint>
#include <optional>

#include "amod/netgraph.hpp"
#include "amod/random.hpp"
#include "amod/trips.hpp"

namespace amod {

struct GridSpec {
  int width = 10;
  int height = 10;
  double spacing_m = 200.0;
  double capacity = 1.0;          // vehicles per second in each direction
  double free_flow_speed = 11.0;  // m/s
};

// Bidirectional Manhattan grid. Node "x_y" sits at (x * spacing, y * spacing),
// so +y points north.
RoadNetwork make_grid(const GridSpec& shape);

// Capacity-symmetric network with integral capacities, built as a
// superposition of directed cycles (one Hamiltonian, the rest random).
// Nodes get coordinates on a circle; free-flow times are random integers.
RoadNetwork random_symmetric_network(Rng& rng, std::size_t nodes, std::size_t extra_cycles, int max_capacity);

// Random strongly connected network with independent integral capacities
// in each direction (generally not symmetric).
RoadNetwork random_network(Rng& rng, std::size_t nodes, double edge_probability, int max_capacity);

struct CustomerInstance {
  RequestSet requests;
  FlowAssignment flows;  // integral customer flows, zero rebalancing
};

// Routes random integral demands along fewest-hop paths with spare capacity,
// so the customer flows are feasible by construction.
CustomerInstance random_feasible_demand(const RoadNetwork& network, Rng& rng, std::size_t requests, int max_rate);

struct TripSpec {
  std::size_t count = 2000;
  double duration_s = 3600.0;
  // Fraction of trips whose origin is drawn from the hotspot and whose
  // destination is drawn from the opposite side.
  double imbalance = 0.0;
  std::uint64_t seed = 1;
};

// Synthetic trips with uniform arrival times. With imbalance > 0 on a
// network with coordinates, biased trips start in the southwest quarter
// and end in the northeast quarter.
TripStream make_trips(const RoadNetwork& network, const TripSpec& plan);

}  // namespace amod
