#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "amod/canonical_json.hpp"
#include "amod/netgraph.hpp"

namespace amod {

struct OsmNode {
  std::int64_t id = 0;
  double lat = 0.0;
  double lon = 0.0;
};

struct OsmWay {
  std::int64_t id = 0;
  std::vector<std::int64_t> refs;
  std::string highway;
  std::map<std::string, std::string> tags;  // lanes, maxspeed, oneway and their variants
};

struct OsmExtract {
  std::vector<OsmNode> nodes;  // every node in the file, sorted by id
  std::vector<OsmWay> ways;    // whitelisted ways only
  std::size_t ways_seen = 0;
  std::size_t ways_skipped = 0;

  const OsmNode* find(std::int64_t id) const;
};

std::set<std::string> default_highway_whitelist();

// Streams the XML through expat in fixed-size chunks. Throws InputError
// with the byte offset on malformed XML.
OsmExtract parse_osm(std::istream& in, const std::set<std::string>& whitelist = default_highway_whitelist());
OsmExtract parse_osm(std::string_view xml, const std::set<std::string>& whitelist = default_highway_whitelist());

struct RoadClassDefaults {
  double maxspeed_kmh = 50.0;
  int lanes = 1;  // total for two-way roads
};

struct OsmOptions {
  std::map<std::string, RoadClassDefaults> defaults;  // by highway class; missing classes use fallback
  RoadClassDefaults fallback{};
  // capacity = capacity_scale * maxspeed (km/h) * lanes in the direction of travel
  double capacity_scale = 1.0;
};

OsmOptions default_osm_options();

struct OsmReport {
  std::size_t ways_retained = 0;
  std::size_t ways_skipped = 0;
  std::size_t segments = 0;
  std::size_t defaulted_maxspeed = 0;
  std::size_t defaulted_lanes = 0;
  std::size_t missing_refs = 0;
  std::size_t merged_duplicates = 0;
  std::size_t dropped_degenerate = 0;  // zero-length or self-loop segments
  std::vector<std::string> warnings;   // first few, for the log

  Json to_json() const;
};

// Projects about the centroid of the used nodes (equirectangular), with
// free-flow time = length / maxspeed. Parallel segments between the same
// pair of nodes are merged (capacities add, the faster time wins). Throws
// InputError on an empty result.
RoadNetwork osm_to_network(const OsmExtract& extract, const OsmOptions& options = default_osm_options(),
                           OsmReport* report = nullptr);

// Parses a maxspeed tag ("50", "30 mph", "50 km/h") into km/h.
std::optional<double> parse_maxspeed(const std::string& tag);

// Equirectangular projection about an origin, in meters.
Point project(GeoOrigin origin, double lat, double lon);

}  // namespace amod
