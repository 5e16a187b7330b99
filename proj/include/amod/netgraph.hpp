#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "amod/random.hpp"

namespace amod {

using NodeIndex = std::size_t;
using EdgeIndex = std::size_t;

struct Point {
  double x = 0.0;  // meters
  double y = 0.0;  // meters
};

struct GeoOrigin {
  double lat = 0.0;
  double lon = 0.0;
};

struct Edge {
  NodeIndex from = 0;
  NodeIndex to = 0;
  double capacity = 0.0;        // vehicles per unit time
  double free_flow_time = 0.0;  // time units
};

/// Directed capacitated road graph.
///
/// Construction never rejects data: structural problems (duplicate edges,
/// nonpositive capacities, dangling endpoints) are surfaced by validate() so
/// that loaders can report every problem at once. Algorithms call
/// require_valid() on entry.
class RoadNetwork {
 public:
  NodeIndex add_node(std::string id, std::optional<Point> position = std::nullopt);
  EdgeIndex add_edge(NodeIndex from, NodeIndex to, double capacity, double free_flow_time);

  std::size_t node_count() const { return ids_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const Edge& edge(EdgeIndex e) const { return edges_[e]; }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const EdgeIndex> out_edges(NodeIndex v) const { return out_[v]; }
  std::span<const EdgeIndex> in_edges(NodeIndex v) const { return in_[v]; }

  std::optional<EdgeIndex> find_edge(NodeIndex from, NodeIndex to) const;

  const std::string& node_id(NodeIndex v) const { return ids_[v]; }
  std::optional<NodeIndex> find_node(const std::string& id) const;
  NodeIndex node(const std::string& id) const;  // throws InputError when unknown

  const std::optional<Point>& position(NodeIndex v) const { return positions_[v]; }
  bool has_coordinates() const;

  const std::optional<GeoOrigin>& geo_origin() const { return geo_origin_; }
  void set_geo_origin(GeoOrigin origin) { geo_origin_ = origin; }

  void set_capacity(EdgeIndex e, double capacity) { edges_[e].capacity = capacity; }
  void scale_capacities(double factor);

  double total_free_flow_time() const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::optional<Point>> positions_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeIndex>> out_;
  std::vector<std::vector<EdgeIndex>> in_;
  std::unordered_map<std::uint64_t, EdgeIndex> pair_index_;
  std::optional<GeoOrigin> geo_origin_;
};

struct Request {
  NodeIndex origin = 0;
  NodeIndex dest = 0;
  double rate = 0.0;  // customers per unit time
};

using RequestSet = std::vector<Request>;

double total_rate(const RequestSet& requests);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const RoadNetwork& network);
ValidationReport validate(const RoadNetwork& network, const RequestSet& requests);

// Throws InputError listing the violations.
void require_valid(const RoadNetwork& network);
void require_valid(const RoadNetwork& network, const RequestSet& requests);

struct SymmetryReport {
  bool symmetric = true;
  double worst_imbalance = 0.0;  // |in - out| / (in + out) at the worst node
  std::optional<NodeIndex> worst_node;
};

inline constexpr double kDefaultSymmetryTolerance = 1e-3;

SymmetryReport is_capacity_symmetric(const RoadNetwork& network,
                                     double tolerance = kDefaultSymmetryTolerance);

/// Node subset S of a cut (S, V \ S). Always nonempty and proper.
class Cut {
 public:
  explicit Cut(std::vector<bool> in_s);
  static Cut from_members(std::size_t node_count, std::span<const NodeIndex> members);
  static Cut from_mask(std::size_t node_count, std::uint64_t mask);

  bool contains(NodeIndex v) const { return in_s_[v]; }
  std::size_t node_count() const { return in_s_.size(); }
  std::vector<NodeIndex> members() const;
  Cut complement() const;

 private:
  std::vector<bool> in_s_;
};

struct CutReport {
  double c_out = 0.0;
  double c_in = 0.0;
  std::optional<double> f_out;  // customer flow leaving S
  std::optional<double> f_in;
  double demand_across = 0.0;   // sum of rates with origin in S, destination outside
  double disparity = 0.0;
};

// Customer flows per request, indexed [request][edge]. Declared here so that
// cut reports can consume flows without depending on the CRRP module.
struct FlowAssignment {
  std::vector<std::vector<double>> customer;
  std::vector<double> rebalancing;

  static FlowAssignment zeros(std::size_t requests, std::size_t edges);
  double customer_total(EdgeIndex e) const;
  double total(EdgeIndex e) const { return customer_total(e) + rebalancing[e]; }
};

double fractional_disparity(double c_out, double c_in);

CutReport cut_report(const RoadNetwork& network, const Cut& cut, const RequestSet& requests,
                     const FlowAssignment* flows = nullptr);

struct CutSearch {
  enum class Kind { Exhaustive, Sampled };
  Kind kind = Kind::Exhaustive;
  std::size_t count = 0;
  std::uint64_t seed = 0;

  static CutSearch exhaustive() { return {Kind::Exhaustive, 0, 0}; }
  static CutSearch sampled(std::size_t count, std::uint64_t seed) {
    return {Kind::Sampled, count, seed};
  }
};

inline constexpr std::size_t kMaxExhaustiveNodes = 20;

struct CutViolation {
  std::vector<NodeIndex> s_side;
  int condition = 0;      // 1: demand vs C_out, 2: demand vs C_in
  double demand = 0.0;
  double capacity = 0.0;
  double excess() const { return demand - capacity; }
};

struct ConditionReport {
  bool passed = true;
  std::size_t cuts_checked = 0;
  // Tightest cut found (largest demand - capacity); a violation when !passed.
  std::optional<CutViolation> worst;
};

ConditionReport check_cut_conditions(const RoadNetwork& network, const RequestSet& requests,
                                     const CutSearch& search);

struct DisparityStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t samples = 0;
};

DisparityStats sample_disparity(const RoadNetwork& network, std::size_t count, std::uint64_t seed);

// Uniform random nonempty proper subset, drawn by fair coin per node.
class CutSampler {
 public:
  CutSampler(std::size_t node_count, std::uint64_t seed);
  Cut next();

 private:
  std::size_t n_;
  Rng rng_;
};

}  // namespace amod
