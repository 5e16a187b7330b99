#pragma once

#include <cstdint>
#include <vector>

#include "amod/netgraph.hpp"

namespace amod {

struct Regions {
  std::vector<std::size_t> region_of;  // per node
  std::vector<NodeIndex> anchors;      // member nearest each centroid
  std::vector<std::vector<NodeIndex>> members;

  std::size_t size() const { return anchors.size(); }
};

// Seeded k-means over node coordinates. Clusters that end up empty are
// dropped, so the result may hold fewer than k regions.
Regions kmeans_regions(const RoadNetwork& network, std::size_t k, std::uint64_t seed, int max_iterations = 100);

// Every node in one region anchored at node 0 (useful without coordinates).
Regions single_region(const RoadNetwork& network);

}  // namespace amod
