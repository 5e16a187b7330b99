#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "amod/netgraph.hpp"

namespace amod {

struct Trip {
  double arrival = 0.0;  // seconds
  NodeIndex origin = 0;
  NodeIndex dest = 0;
};

using TripStream = std::vector<Trip>;

enum class TripSchema { Simple, NycTaxi };

TripSchema parse_trip_schema(const std::string& name);  // "simple" | "nyc_taxi"

struct TripLoadOptions {
  TripSchema schema = TripSchema::Simple;
  double snap_radius_m = 250.0;
  std::size_t error_budget = 0;  // unparseable rows tolerated before failing
};

struct TripLoadReport {
  std::size_t rows = 0;
  std::size_t loaded = 0;
  std::size_t dropped_unsnappable = 0;
  std::size_t dropped_same_node = 0;
  std::size_t malformed = 0;
  std::vector<std::string> errors;  // first few malformed-row messages
};

// Parses a trips CSV. Rows are returned sorted by arrival time (stable).
// The simple schema carries arrival_time_s,origin_node,dest_node with node
// ids. The taxi schema snaps pickup and dropoff coordinates to the nearest
// node and anchors arrival times at the earliest pickup in the file.
TripStream load_trips_csv(std::string_view text, const RoadNetwork& network, const TripLoadOptions& options,
                          TripLoadReport* report = nullptr);

std::string write_trips_csv(const TripStream& trips, const RoadNetwork& network);

}  // namespace amod
