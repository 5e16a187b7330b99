#include "amod/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "amod/error.hpp"

namespace amod {

namespace {

std::uint64_t pair_key(NodeIndex from, NodeIndex to) {
  return (static_cast<std::uint64_t>(from) << 32) ^ static_cast<std::uint64_t>(to);
}

// Relative slack used when comparing demand against cut capacity.
constexpr double kCutTolerance = 1e-9;

}  // namespace

NodeIndex RoadNetwork::add_node(std::string id, std::optional<Point> position) {
  const NodeIndex v = ids_.size();
  index_.emplace(id, v);
  ids_.push_back(std::move(id));
  positions_.push_back(position);
  out_.emplace_back();
  in_.emplace_back();
  return v;
}

EdgeIndex RoadNetwork::add_edge(NodeIndex from, NodeIndex to, double capacity,
                                double free_flow_time) {
  const EdgeIndex e = edges_.size();
  edges_.push_back({from, to, capacity, free_flow_time});
  if (from < out_.size()) out_[from].push_back(e);
  if (to < in_.size()) in_[to].push_back(e);
  pair_index_.emplace(pair_key(from, to), e);
  return e;
}

std::optional<EdgeIndex> RoadNetwork::find_edge(NodeIndex from, NodeIndex to) const {
  auto it = pair_index_.find(pair_key(from, to));
  if (it == pair_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<NodeIndex> RoadNetwork::find_node(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeIndex RoadNetwork::node(const std::string& id) const {
  auto v = find_node(id);
  if (!v) throw InputError("unknown node id '" + id + "'");
  return *v;
}

bool RoadNetwork::has_coordinates() const {
  return !positions_.empty() &&
         std::all_of(positions_.begin(), positions_.end(), [](const auto& p) { return p.has_value(); });
}

void RoadNetwork::scale_capacities(double factor) {
  for (auto& e : edges_) e.capacity *= factor;
}

double RoadNetwork::total_free_flow_time() const {
  double sum = 0.0;
  for (const auto& e : edges_) sum += e.free_flow_time;
  return sum;
}

double total_rate(const RequestSet& requests) {
  double sum = 0.0;
  for (const auto& r : requests) sum += r.rate;
  return sum;
}

ValidationReport validate(const RoadNetwork& network) {
  ValidationReport report;
  const std::size_t n = network.node_count();
  std::unordered_map<std::uint64_t, EdgeIndex> seen;
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    const Edge& edge = network.edge(e);
    std::ostringstream where;
    where << "edge " << e;
    if (edge.from >= n || edge.to >= n) {
      report.violations.push_back(where.str() + ": unknown endpoint");
      continue;
    }
    where << " (" << network.node_id(edge.from) << "->" << network.node_id(edge.to) << ")";
    if (edge.from == edge.to) report.violations.push_back(where.str() + ": self-loop");
    if (!(edge.capacity > 0.0) || !std::isfinite(edge.capacity))
      report.violations.push_back(where.str() + ": nonpositive capacity");
    if (!(edge.free_flow_time >= 0.0) || !std::isfinite(edge.free_flow_time))
      report.violations.push_back(where.str() + ": negative free-flow time");
    if (!seen.emplace(pair_key(edge.from, edge.to), e).second)
      report.violations.push_back(where.str() + ": duplicate edge");
  }
  return report;
}

ValidationReport validate(const RoadNetwork& network, const RequestSet& requests) {
  ValidationReport report = validate(network);
  for (std::size_t m = 0; m < requests.size(); ++m) {
    const Request& r = requests[m];
    const std::string where = "request " + std::to_string(m);
    if (r.origin >= network.node_count() || r.dest >= network.node_count()) {
      report.violations.push_back(where + ": unknown node");
      continue;
    }
    if (r.origin == r.dest) report.violations.push_back(where + ": origin equals destination");
    if (!(r.rate > 0.0) || !std::isfinite(r.rate))
      report.violations.push_back(where + ": nonpositive rate");
  }
  return report;
}

namespace {

void throw_report(const ValidationReport& report) {
  std::string msg = "invalid input:";
  for (const auto& v : report.violations) msg += "\n  " + v;
  throw InputError(msg);
}

}  // namespace

void require_valid(const RoadNetwork& network) {
  auto report = validate(network);
  if (!report.ok()) throw_report(report);
}

void require_valid(const RoadNetwork& network, const RequestSet& requests) {
  auto report = validate(network, requests);
  if (!report.ok()) throw_report(report);
}

SymmetryReport is_capacity_symmetric(const RoadNetwork& network, double tolerance) {
  std::vector<double> in(network.node_count(), 0.0), out(network.node_count(), 0.0);
  for (const Edge& e : network.edges()) {
    out[e.from] += e.capacity;
    in[e.to] += e.capacity;
  }
  SymmetryReport report;
  for (NodeIndex v = 0; v < network.node_count(); ++v) {
    const double total = in[v] + out[v];
    if (total <= 0.0) continue;
    const double imbalance = std::abs(in[v] - out[v]) / total;
    if (imbalance > report.worst_imbalance) {
      report.worst_imbalance = imbalance;
      report.worst_node = v;
    }
  }
  report.symmetric = report.worst_imbalance <= tolerance;
  return report;
}

Cut::Cut(std::vector<bool> in_s) : in_s_(std::move(in_s)) {
  const auto members = std::count(in_s_.begin(), in_s_.end(), true);
  if (members == 0) throw InputError("cut: S is empty");
  if (static_cast<std::size_t>(members) == in_s_.size()) throw InputError("cut: S is the whole node set");
}

Cut Cut::from_members(std::size_t node_count, std::span<const NodeIndex> members) {
  std::vector<bool> in_s(node_count, false);
  for (NodeIndex v : members) {
    if (v >= node_count) throw InputError("cut: member out of range");
    in_s[v] = true;
  }
  return Cut(std::move(in_s));
}

Cut Cut::from_mask(std::size_t node_count, std::uint64_t mask) {
  std::vector<bool> in_s(node_count, false);
  for (std::size_t v = 0; v < node_count && v < 64; ++v) in_s[v] = (mask >> v) & 1U;
  return Cut(std::move(in_s));
}

std::vector<NodeIndex> Cut::members() const {
  std::vector<NodeIndex> out;
  for (NodeIndex v = 0; v < in_s_.size(); ++v)
    if (in_s_[v]) out.push_back(v);
  return out;
}

Cut Cut::complement() const {
  std::vector<bool> flipped(in_s_.size());
  for (std::size_t v = 0; v < in_s_.size(); ++v) flipped[v] = !in_s_[v];
  return Cut(std::move(flipped));
}

FlowAssignment FlowAssignment::zeros(std::size_t requests, std::size_t edges) {
  FlowAssignment f;
  f.customer.assign(requests, std::vector<double>(edges, 0.0));
  f.rebalancing.assign(edges, 0.0);
  return f;
}

double FlowAssignment::customer_total(EdgeIndex e) const {
  double sum = 0.0;
  for (const auto& fm : customer) sum += fm[e];
  return sum;
}

double fractional_disparity(double c_out, double c_in) {
  const double denom = c_out + c_in;
  if (denom <= 0.0) return 0.0;
  return 2.0 * std::abs(c_out - c_in) / denom;
}

CutReport cut_report(const RoadNetwork& network, const Cut& cut, const RequestSet& requests,
                     const FlowAssignment* flows) {
  if (cut.node_count() != network.node_count())
    throw InputError("cut_report: cut and network sizes differ");
  CutReport report;
  double f_out = 0.0, f_in = 0.0;
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    const Edge& edge = network.edge(e);
    const bool from_s = cut.contains(edge.from);
    const bool to_s = cut.contains(edge.to);
    if (from_s == to_s) continue;
    const double f = flows ? flows->customer_total(e) : 0.0;
    if (from_s) {
      report.c_out += edge.capacity;
      f_out += f;
    } else {
      report.c_in += edge.capacity;
      f_in += f;
    }
  }
  if (flows) {
    report.f_out = f_out;
    report.f_in = f_in;
  }
  for (const Request& r : requests)
    if (cut.contains(r.origin) && !cut.contains(r.dest)) report.demand_across += r.rate;
  report.disparity = fractional_disparity(report.c_out, report.c_in);
  return report;
}

namespace {

// Tracks the tightest cut condition seen so far.
class ConditionTracker {
 public:
  void observe(const RoadNetwork& network, const RequestSet& requests, const Cut& cut) {
    ++checked_;
    const CutReport r = cut_report(network, cut, requests);
    consider(cut, 1, r.demand_across, r.c_out);
    consider(cut, 2, r.demand_across, r.c_in);
  }

  ConditionReport finish() && {
    ConditionReport report;
    report.cuts_checked = checked_;
    report.worst = std::move(worst_);
    if (report.worst) {
      const double slack = kCutTolerance * std::max(1.0, report.worst->capacity);
      report.passed = report.worst->excess() <= slack;
    }
    return report;
  }

 private:
  void consider(const Cut& cut, int condition, double demand, double capacity) {
    if (!worst_ || demand - capacity > worst_->excess()) {
      worst_ = CutViolation{cut.members(), condition, demand, capacity};
    }
  }

  std::size_t checked_ = 0;
  std::optional<CutViolation> worst_;
};

}  // namespace

ConditionReport check_cut_conditions(const RoadNetwork& network, const RequestSet& requests,
                                     const CutSearch& search) {
  require_valid(network, requests);
  const std::size_t n = network.node_count();
  ConditionTracker tracker;
  if (n < 2) return std::move(tracker).finish();
  if (search.kind == CutSearch::Kind::Exhaustive) {
    if (n > kMaxExhaustiveNodes)
      throw InputError("exhaustive cut enumeration is limited to " +
                       std::to_string(kMaxExhaustiveNodes) + " nodes; use sampling");
    const std::uint64_t full = (std::uint64_t{1} << n) - 1;
    for (std::uint64_t mask = 1; mask < full; ++mask)
      tracker.observe(network, requests, Cut::from_mask(n, mask));
  } else {
    CutSampler sampler(n, search.seed);
    for (std::size_t i = 0; i < search.count; ++i) tracker.observe(network, requests, sampler.next());
  }
  return std::move(tracker).finish();
}

CutSampler::CutSampler(std::size_t node_count, std::uint64_t seed) : n_(node_count), rng_(seed) {
  if (n_ < 2) throw InputError("cut sampling needs at least two nodes");
}

Cut CutSampler::next() {
  std::vector<bool> in_s(n_);
  for (;;) {
    std::size_t members = 0;
    for (std::size_t v = 0; v < n_; ++v) {
      in_s[v] = rng_.coin();
      members += in_s[v];
    }
    if (members != 0 && members != n_) return Cut(in_s);
  }
}

DisparityStats sample_disparity(const RoadNetwork& network, std::size_t count, std::uint64_t seed) {
  require_valid(network);
  if (count == 0) throw InputError("sample_disparity: count must be >= 1");
  CutSampler sampler(network.node_count(), seed);
  std::vector<double> values;
  values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    values.push_back(cut_report(network, sampler.next(), {}).disparity);
  }
  DisparityStats stats;
  stats.samples = count;
  stats.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(count);
  double ss = 0.0;
  for (double d : values) ss += (d - stats.mean) * (d - stats.mean);
  stats.stddev = std::sqrt(ss / static_cast<double>(count));
  return stats;
}

}  // namespace amod
