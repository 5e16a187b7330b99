#include "amod/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "amod/error.hpp"
#include "amod/random.hpp"

namespace amod {

namespace {

double sq_dist(const Point& a, const Point& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace

Regions kmeans_regions(const RoadNetwork& network, std::size_t k, std::uint64_t seed, int max_iterations) {
  const std::size_t n = network.node_count();
  if (!network.has_coordinates()) throw InputError("region clustering needs node coordinates");
  if (k == 0 || k > n) throw InputError("region count must be between 1 and the node count");

  // Initial centroids: k distinct nodes drawn without replacement.
  Rng rng(seed);
  std::vector<NodeIndex> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
  std::vector<Point> centroid(k);
  for (std::size_t c = 0; c < k; ++c) centroid[c] = *network.position(order[c]);

  std::vector<std::size_t> assign(n, k);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (NodeIndex v = 0; v < n; ++v) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(*network.position(v), centroid[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[v] != best) {
        assign[v] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> sx(k, 0.0), sy(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (NodeIndex v = 0; v < n; ++v) {
      sx[assign[v]] += network.position(v)->x;
      sy[assign[v]] += network.position(v)->y;
      ++count[assign[v]];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (count[c] > 0) centroid[c] = {sx[c] / static_cast<double>(count[c]), sy[c] / static_cast<double>(count[c])};
  }

  Regions regions;
  regions.region_of.assign(n, 0);
  std::vector<std::size_t> renumber(k, k);
  for (std::size_t c = 0; c < k; ++c) {
    NodeIndex anchor = n;
    double best_d = std::numeric_limits<double>::infinity();
    std::vector<NodeIndex> members;
    for (NodeIndex v = 0; v < n; ++v) {
      if (assign[v] != c) continue;
      members.push_back(v);
      const double d = sq_dist(*network.position(v), centroid[c]);
      if (d < best_d) {
        best_d = d;
        anchor = v;
      }
    }
    if (members.empty()) continue;
    renumber[c] = regions.anchors.size();
    regions.anchors.push_back(anchor);
    regions.members.push_back(std::move(members));
  }
  for (NodeIndex v = 0; v < n; ++v) regions.region_of[v] = renumber[assign[v]];
  return regions;
}

Regions single_region(const RoadNetwork& network) {
  if (network.node_count() == 0) throw InputError("empty network");
  Regions r;
  r.region_of.assign(network.node_count(), 0);
  r.anchors = {0};
  r.members.emplace_back();
  for (NodeIndex v = 0; v < network.node_count(); ++v) r.members[0].push_back(v);
  return r;
}

}  // namespace amod
