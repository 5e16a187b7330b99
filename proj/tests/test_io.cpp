#include <doctest.h>

#include <cmath>

#include "amod/canonical_json.hpp"
#include "amod/error.hpp"
#include "amod/io.hpp"
#include "amod/synth.hpp"

using namespace amod;

namespace {

void check_same_network(const RoadNetwork& a, const RoadNetwork& b) {
  REQUIRE(a.node_count() == b.node_count());
  REQUIRE(a.edge_count() == b.edge_count());
  for (NodeIndex v = 0; v < a.node_count(); ++v) {
    CHECK(a.node_id(v) == b.node_id(v));
    REQUIRE(a.position(v).has_value() == b.position(v).has_value());
    if (a.position(v)) {
      CHECK(a.position(v)->x == b.position(v)->x);
      CHECK(a.position(v)->y == b.position(v)->y);
    }
  }
  for (EdgeIndex e = 0; e < a.edge_count(); ++e) {
    CHECK(a.edge(e).from == b.edge(e).from);
    CHECK(a.edge(e).to == b.edge(e).to);
    CHECK(a.edge(e).capacity == b.edge(e).capacity);
    CHECK(a.edge(e).free_flow_time == b.edge(e).free_flow_time);
  }
}

}  // namespace

TEST_CASE("graph json round trip is exact") {
  Rng rng(5);
  auto net = random_symmetric_network(rng, 9, 3, 7);
  // Awkward doubles survive the trip bit for bit.
  net.set_capacity(0, 0.1 + 0.2);
  net.set_capacity(1, 1.0 / 3.0);
  net.set_geo_origin({40.7128, -74.006});
  const std::string text = save_graph(net);
  const RoadNetwork back = graph_from_json(parse_json(text, "graph"));
  check_same_network(net, back);
  REQUIRE(back.geo_origin().has_value());
  CHECK(back.geo_origin()->lat == 40.7128);
  CHECK(save_graph(back) == text);
}

TEST_CASE("graph json without coordinates") {
  const auto j = parse_json(R"({"nodes":[{"id":"a"},{"id":"b"}],
    "edges":[{"from":"a","to":"b","capacity":2,"free_flow_time":3},
             {"from":"b","to":"a","capacity":2,"free_flow_time":3}]})",
                            "graph");
  const auto net = graph_from_json(j);
  CHECK(net.node_count() == 2);
  CHECK_FALSE(net.has_coordinates());
  CHECK(net.edge(1).from == 1);
  check_same_network(net, graph_from_json(parse_json(save_graph(net), "graph")));
}

TEST_CASE("graph json errors are input errors") {
  CHECK_THROWS_AS(parse_json("{not json", "graph"), InputError);
  CHECK_THROWS_AS(graph_from_json(parse_json(R"({"nodes":[{"id":"a"}],
      "edges":[{"from":"a","to":"zz","capacity":1,"free_flow_time":1}]})",
                                             "graph")),
                  InputError);
  CHECK_THROWS_AS(graph_from_json(parse_json(R"({"edges":[]})", "graph")), InputError);
  CHECK_THROWS_AS(read_file("/nonexistent/dir/graph.json"), InputError);
}

TEST_CASE("requests and loads resolve node ids") {
  auto g = make_grid({2, 2, 100.0, 1.0, 10.0});
  const auto req = requests_from_json(parse_json(R"({"requests":[{"origin":"0_0","dest":"1_1","rate":1.5}]})", "r"), g);
  REQUIRE(req.size() == 1);
  CHECK(req[0].origin == g.node("0_0"));
  CHECK(req[0].dest == g.node("1_1"));
  CHECK(req[0].rate == 1.5);
  const auto bare = requests_from_json(requests_to_json(req, g), g);
  CHECK(bare[0].rate == 1.5);
  CHECK_THROWS_AS(requests_from_json(parse_json(R"([{"origin":"q","dest":"0_0","rate":1}])", "r"), g), InputError);

  const auto loads = loads_from_json(parse_json(R"({"loads":[{"from":"0_0","to":"1_0","flow":0.4}]})", "l"), g);
  REQUIRE(loads.size() == g.edge_count());
  const EdgeIndex e = *g.find_edge(g.node("0_0"), g.node("1_0"));
  for (EdgeIndex k = 0; k < g.edge_count(); ++k) CHECK(loads[k] == (k == e ? 0.4 : 0.0));
}

TEST_CASE("rebalance snapshot defaults") {
  auto g = make_grid({2, 1, 100.0, 2.5, 10.0});
  const auto snap = snapshot_from_json(parse_json(R"({"regions":[
      {"anchor":"0_0","idle_vehicles":3,"waiting_customers":1},
      {"anchor":"1_0","idle_vehicles":0,"waiting_customers":2}]})",
                                                  "s"),
                                       g);
  CHECK(snap.regions.size() == 2);
  CHECK(snap.t_vicinity == 120.0);
  CHECK(snap.inbound.empty());
  CHECK_FALSE(snap.slack_cost.has_value());
  REQUIRE(snap.residual_capacity.size() == g.edge_count());
  for (auto c : snap.residual_capacity) CHECK(c == 2);
}

TEST_CASE("canonical json is stable") {
  Json j = {{"b", 1}, {"a", {{"z", 0.1 + 0.2}, {"y", -0.0}}}, {"c", number_or_null(INFINITY)}};
  CHECK(canonical_dump(j) ==
        "{\n  \"a\": {\n    \"y\": 0,\n    \"z\": 0.3\n  },\n  \"b\": 1,\n  \"c\": null\n}\n");
  CHECK(canonical_dump(Json::array()) == "[]\n");
  CHECK(canonical_dump(Json(2.5)) == "2.5\n");
  CHECK(number_or_null(NAN).is_null());
  CHECK(number_or_null(3.0) == Json(3.0));
  // Insertion order does not matter.
  Json k;
  k["c"] = nullptr;
  k["a"]["z"] = 0.30000000000000004;
  k["a"]["y"] = 0.0;
  k["b"] = 1;
  CHECK(canonical_dump(k) == canonical_dump(j));
}
