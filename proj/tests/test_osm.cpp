#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "amod/error.hpp"
#include "amod/osm.hpp"

using namespace amod;

namespace {

constexpr double kEarthRadius = 6371008.8;

// Latitude offset in degrees for a northward distance in meters.
double dlat(double meters) { return meters / kEarthRadius * 180.0 / std::numbers::pi; }

std::string node_xml(long id, double lat, double lon) {
  std::ostringstream os;
  os.precision(17);
  os << "  <node id=\"" << id << "\" lat=\"" << lat << "\" lon=\"" << lon << "\"/>\n";
  return os.str();
}

std::string way_xml(long id, std::initializer_list<long> refs, std::initializer_list<std::pair<const char*, const char*>> tags) {
  std::ostringstream os;
  os << "  <way id=\"" << id << "\">\n";
  for (long r : refs) os << "    <nd ref=\"" << r << "\"/>\n";
  for (auto [k, v] : tags) os << "    <tag k=\"" << k << "\" v=\"" << v << "\"/>\n";
  os << "  </way>\n";
  return os.str();
}

std::string wrap(const std::string& body) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n" + body + "</osm>\n";
}

// Three nodes 100 m apart going north.
std::string column_nodes() {
  return node_xml(1, 40.0, -74.0) + node_xml(2, 40.0 + dlat(100.0), -74.0) + node_xml(3, 40.0 + dlat(200.0), -74.0);
}

}  // namespace

TEST_CASE("oneway way with tagged speed and lanes") {
  const std::string xml =
      wrap(column_nodes() + way_xml(10, {1, 2, 3}, {{"highway", "primary"}, {"oneway", "yes"}, {"maxspeed", "36"}, {"lanes", "2"}}));
  OsmReport report;
  const auto net = osm_to_network(parse_osm(std::string_view(xml)), default_osm_options(), &report);
  CHECK(net.node_count() == 3);
  REQUIRE(net.edge_count() == 2);
  CHECK(report.segments == 2);
  for (EdgeIndex e = 0; e < 2; ++e) {
    // 36 km/h is 10 m/s over 100 m; capacity is speed in km/h times lanes.
    CHECK(net.edge(e).free_flow_time == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(net.edge(e).capacity == doctest::Approx(72.0));
  }
  CHECK(net.node_id(net.edge(0).from) == "1");
  CHECK(net.node_id(net.edge(0).to) == "2");
  CHECK_FALSE(net.find_edge(net.node("2"), net.node("1")).has_value());
  REQUIRE(net.geo_origin().has_value());
  CHECK(net.position(net.node("2"))->y == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK(net.position(net.node("3"))->y == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("two-way lanes split per direction and defaults apply") {
  const std::string xml = wrap(column_nodes() + way_xml(11, {1, 2}, {{"highway", "secondary"}, {"maxspeed", "50"}, {"lanes", "2"}}) +
                               way_xml(12, {2, 3}, {{"highway", "residential"}}));
  OsmReport report;
  const auto net = osm_to_network(parse_osm(std::string_view(xml)), default_osm_options(), &report);
  REQUIRE(net.edge_count() == 4);
  const auto up = *net.find_edge(net.node("1"), net.node("2"));
  const auto down = *net.find_edge(net.node("2"), net.node("1"));
  CHECK(net.edge(up).capacity == doctest::Approx(50.0));  // one lane each way
  CHECK(net.edge(down).capacity == doctest::Approx(50.0));
  CHECK(net.edge(up).free_flow_time == doctest::Approx(100.0 / (50.0 / 3.6)));
  // Residential defaults: 30 km/h, 2 lanes total.
  const auto r = *net.find_edge(net.node("2"), net.node("3"));
  CHECK(net.edge(r).capacity == doctest::Approx(30.0));
  CHECK(report.defaulted_maxspeed == 1);
  CHECK(report.defaulted_lanes == 1);
}

TEST_CASE("reverse oneway, mph speeds and lane overrides") {
  const std::string xml = wrap(column_nodes() +
                               way_xml(13, {1, 2}, {{"highway", "tertiary"}, {"oneway", "-1"}, {"maxspeed", "25 mph"}, {"lanes", "1"}}) +
                               way_xml(14, {2, 3}, {{"highway", "tertiary"}, {"maxspeed", "40"}, {"lanes", "3"}, {"lanes:forward", "2"}, {"lanes:backward", "1"}}));
  const auto net = osm_to_network(parse_osm(std::string_view(xml)));
  REQUIRE(net.edge_count() == 3);
  const auto back = net.find_edge(net.node("2"), net.node("1"));
  REQUIRE(back.has_value());
  CHECK_FALSE(net.find_edge(net.node("1"), net.node("2")).has_value());
  CHECK(net.edge(*back).capacity == doctest::Approx(25.0 * 1.609344));
  CHECK(net.edge(*net.find_edge(net.node("2"), net.node("3"))).capacity == doctest::Approx(80.0));
  CHECK(net.edge(*net.find_edge(net.node("3"), net.node("2"))).capacity == doctest::Approx(40.0));
}

TEST_CASE("non-road ways are skipped and empty results rejected") {
  const std::string xml = wrap(column_nodes() + way_xml(15, {1, 2, 3}, {{"highway", "footway"}}) +
                               way_xml(16, {1, 3}, {{"building", "yes"}}));
  const auto ex = parse_osm(std::string_view(xml));
  CHECK(ex.ways.empty());
  CHECK(ex.ways_seen == 2);
  CHECK(ex.nodes.size() == 3);
  CHECK_THROWS_AS(osm_to_network(ex), InputError);
}

TEST_CASE("maxspeed parsing") {
  CHECK(parse_maxspeed("50") == 50.0);
  CHECK(parse_maxspeed("50 km/h") == 50.0);
  CHECK(*parse_maxspeed("30 mph") == doctest::Approx(48.28032));
  CHECK_FALSE(parse_maxspeed("signals").has_value());
  CHECK_FALSE(parse_maxspeed("-5").has_value());
  CHECK_FALSE(parse_maxspeed("").has_value());
}

TEST_CASE("malformed xml reports a byte offset") {
  const std::string xml = wrap(column_nodes()).substr(0, 120) + "<way id=\"1\"><nd ref=\"1\"></way>";
  try {
    parse_osm(std::string_view(xml));
    FAIL("expected an InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("byte offset") != std::string::npos);
  }
}

TEST_CASE("streaming parse of a large extract") {
  // Roughly 19 MB: far larger than the parser's read chunk.
  std::ostringstream os;
  os.precision(12);
  os << "<?xml version=\"1.0\"?>\n<osm version=\"0.6\">\n";
  const int side = 300;
  for (int i = 0; i < side * side; ++i)
    os << "  <node id=\"" << i + 1 << "\" lat=\"" << 40.0 + (i / side) * 1e-3 << "\" lon=\"" << -74.0 + (i % side) * 1e-3
       << "\" version=\"1\" timestamp=\"2020-01-01T00:00:00Z\" user=\"mapper\" uid=\"1\">\n"
       << "    <tag k=\"note\" v=\"padding padding padding padding padding padding\"/>\n  </node>\n";
  for (int r = 0; r < side; ++r) {
    os << "  <way id=\"" << r + 1 << "\">\n";
    for (int c = 0; c < side; ++c) os << "    <nd ref=\"" << r * side + c + 1 << "\"/>\n";
    os << "    <tag k=\"highway\" v=\"residential\"/>\n  </way>\n";
  }
  os << "</osm>\n";
  const std::string xml = os.str();
  CHECK(xml.size() > 15'000'000);
  std::istringstream in(xml);
  const auto ex = parse_osm(in);
  CHECK(ex.nodes.size() == static_cast<std::size_t>(side * side));
  REQUIRE(ex.ways.size() == static_cast<std::size_t>(side));
  CHECK(ex.ways[0].refs.size() == static_cast<std::size_t>(side));
  const auto net = osm_to_network(ex);
  CHECK(net.edge_count() == static_cast<std::size_t>(2 * side * (side - 1)));
}
