#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "amod/error.hpp"
#include "amod/netgraph.hpp"

using namespace amod;

namespace {

RoadNetwork two_node(double ab, double ba) {
  RoadNetwork net;
  net.add_node("a");
  net.add_node("b");
  if (ab > 0) net.add_edge(0, 1, ab, 1.0);
  if (ba > 0) net.add_edge(1, 0, ba, 1.0);
  return net;
}

RoadNetwork grid(int w, int h, double cap) {
  RoadNetwork net;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) net.add_node(std::to_string(y * w + x), Point{x * 100.0, y * 100.0});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const NodeIndex v = y * w + x;
      if (x + 1 < w) {
        net.add_edge(v, v + 1, cap, 1.0);
        net.add_edge(v + 1, v, cap, 1.0);
      }
      if (y + 1 < h) {
        net.add_edge(v, v + w, cap, 1.0);
        net.add_edge(v + w, v, cap, 1.0);
      }
    }
  return net;
}

}  // namespace

TEST_CASE("validate reports structural problems") {
  CHECK(validate(two_node(1, 1)).ok());

  RoadNetwork zero;
  zero.add_node("a");
  zero.add_node("b");
  zero.add_edge(0, 1, 0.0, 1.0);
  auto r = validate(zero);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].find("nonpositive capacity") != std::string::npos);

  RoadNetwork dup = two_node(1, 0);
  dup.add_edge(0, 1, 1.0, 1.0);
  r = validate(dup);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].find("duplicate edge") != std::string::npos);

  RoadNetwork loop;
  loop.add_node("a");
  loop.add_edge(0, 0, 1.0, 1.0);
  CHECK_FALSE(validate(loop).ok());
  CHECK_THROWS_AS(require_valid(loop), InputError);
}

TEST_CASE("request validation") {
  auto net = two_node(1, 1);
  CHECK(validate(net, {{0, 1, 1.0}}).ok());
  CHECK_FALSE(validate(net, {{0, 0, 1.0}}).ok());
  CHECK_FALSE(validate(net, {{0, 1, 0.0}}).ok());
  CHECK_FALSE(validate(net, {{0, 7, 1.0}}).ok());
}

TEST_CASE("capacity symmetry is a node balance") {
  auto g = grid(3, 3, 2.0);
  auto rep = is_capacity_symmetric(g);
  CHECK(rep.symmetric);
  CHECK(rep.worst_imbalance == 0.0);

  // Directed triangle: every node has one in-edge and one out-edge of capacity 2.
  RoadNetwork tri;
  for (auto id : {"a", "b", "c"}) tri.add_node(id);
  tri.add_edge(0, 1, 2, 1);
  tri.add_edge(1, 2, 2, 1);
  tri.add_edge(2, 0, 2, 1);
  CHECK(is_capacity_symmetric(tri, 0.0).symmetric);

  auto one_way = two_node(1, 0);
  rep = is_capacity_symmetric(one_way);
  CHECK_FALSE(rep.symmetric);
  CHECK(rep.worst_imbalance == doctest::Approx(1.0));
}

TEST_CASE("cut report sums and disparity") {
  auto net = two_node(1, 3);
  const NodeIndex a[] = {0};
  auto rep = cut_report(net, Cut::from_members(2, a), {{0, 1, 0.5}});
  CHECK(rep.c_out == 1.0);
  CHECK(rep.c_in == 3.0);
  CHECK(rep.disparity == doctest::Approx(1.0));
  CHECK(rep.demand_across == 0.5);
  CHECK_FALSE(rep.f_out.has_value());

  RoadNetwork isolated;
  isolated.add_node("a");
  isolated.add_node("b");
  CHECK(cut_report(isolated, Cut::from_members(2, a), {}).disparity == 0.0);

  auto g = grid(3, 3, 1.0);
  const NodeIndex corner[] = {0, 1, 3};
  CHECK(cut_report(g, Cut::from_members(9, corner), {}).disparity == 0.0);

  CHECK_THROWS_AS(Cut(std::vector<bool>{false, false}), InputError);
  CHECK_THROWS_AS(Cut(std::vector<bool>{true, true}), InputError);
}

TEST_CASE("cut report is symmetric under complement") {
  auto g = grid(3, 2, 1.0);
  g.set_capacity(0, 4.0);
  FlowAssignment flows = FlowAssignment::zeros(1, g.edge_count());
  for (EdgeIndex e = 0; e < g.edge_count(); ++e) flows.customer[0][e] = 0.1 * static_cast<double>(e);
  const NodeIndex s[] = {0, 4};
  Cut cut = Cut::from_members(6, s);
  auto fwd = cut_report(g, cut, {}, &flows);
  auto back = cut_report(g, cut.complement(), {}, &flows);
  CHECK(fwd.c_out == back.c_in);
  CHECK(fwd.c_in == back.c_out);
  CHECK(*fwd.f_out == *back.f_in);
  CHECK(*fwd.f_in == *back.f_out);
}

TEST_CASE("cut conditions on the two-node example") {
  auto net = two_node(2, 2);
  auto ok = check_cut_conditions(net, {{0, 1, 1.0}}, CutSearch::exhaustive());
  CHECK(ok.passed);
  CHECK(ok.cuts_checked == 2);

  auto bad = check_cut_conditions(net, {{0, 1, 3.0}}, CutSearch::exhaustive());
  CHECK_FALSE(bad.passed);
  REQUIRE(bad.worst.has_value());
  CHECK(bad.worst->s_side == std::vector<NodeIndex>{0});
  CHECK(bad.worst->demand == 3.0);
  CHECK(bad.worst->capacity == 2.0);

  CHECK(check_cut_conditions(net, {}, CutSearch::exhaustive()).passed);
  CHECK(check_cut_conditions(net, {{0, 1, 3.0}}, CutSearch::sampled(50, 1)).passed == false);
}

TEST_CASE("exhaustive cut search is capped") {
  auto g = grid(7, 3, 1.0);
  CHECK_THROWS_AS(check_cut_conditions(g, {}, CutSearch::exhaustive()), InputError);
  CHECK(check_cut_conditions(g, {}, CutSearch::sampled(10, 3)).cuts_checked == 10);
}

TEST_CASE("cut condition result does not depend on node labels") {
  RoadNetwork net;
  for (auto id : {"a", "b", "c", "d"}) net.add_node(id);
  net.add_edge(0, 1, 1, 1);
  net.add_edge(1, 2, 2, 1);
  net.add_edge(2, 3, 1, 1);
  net.add_edge(3, 0, 3, 1);
  net.add_edge(2, 0, 1, 1);
  RequestSet req = {{0, 2, 1.5}, {3, 1, 0.5}};
  const std::vector<NodeIndex> perm = {2, 0, 3, 1};
  RoadNetwork relabeled;
  for (auto id : {"a", "b", "c", "d"}) relabeled.add_node(id);
  for (const Edge& e : net.edges()) relabeled.add_edge(perm[e.from], perm[e.to], e.capacity, e.free_flow_time);
  RequestSet req2;
  for (auto r : req) req2.push_back({perm[r.origin], perm[r.dest], r.rate});
  auto a = check_cut_conditions(net, req, CutSearch::exhaustive());
  auto b = check_cut_conditions(relabeled, req2, CutSearch::exhaustive());
  CHECK(a.passed == b.passed);
  CHECK(a.worst->excess() == doctest::Approx(b.worst->excess()));
}

TEST_CASE("disparity sampling") {
  auto g = grid(4, 4, 2.0);
  auto s = sample_disparity(g, 200, 9);
  CHECK(s.mean == 0.0);
  CHECK(s.stddev == 0.0);

  auto two = two_node(1, 3);
  s = sample_disparity(two, 1000, 5);
  CHECK(s.mean == doctest::Approx(1.0));
  CHECK(s.stddev == doctest::Approx(0.0));

  // Scale invariance.
  auto skew = grid(4, 4, 2.0);
  skew.set_capacity(0, 1.0);
  skew.set_capacity(5, 3.5);
  const double base = sample_disparity(skew, 300, 4).mean;
  CHECK(base > 0.0);
  skew.scale_capacities(8.0);
  CHECK(sample_disparity(skew, 300, 4).mean == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("node-level symmetry implies zero disparity on every cut") {
  // Superpose directed cycles: node-balanced but not edge-symmetric.
  RoadNetwork net;
  for (int i = 0; i < 6; ++i) net.add_node(std::to_string(i));
  auto add = [&](NodeIndex u, NodeIndex v, double c) {
    if (auto e = net.find_edge(u, v)) {
      net.set_capacity(*e, net.edge(*e).capacity + c);
    } else {
      net.add_edge(u, v, c, 1.0);
    }
  };
  const std::vector<std::vector<NodeIndex>> cycles = {{0, 1, 2, 3, 4, 5}, {0, 2, 4}, {5, 3, 1}, {1, 4}};
  double c = 1.0;
  for (const auto& cyc : cycles) {
    for (std::size_t i = 0; i < cyc.size(); ++i) add(cyc[i], cyc[(i + 1) % cyc.size()], c);
    c += 1.0;
  }
  REQUIRE(is_capacity_symmetric(net, 0.0).symmetric);
  for (std::uint64_t mask = 1; mask < 63; ++mask)
    CHECK(cut_report(net, Cut::from_mask(6, mask), {}).disparity == 0.0);
}
