#include "amod/osm.hpp"

#include <expat.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <unordered_map>

#include "amod/error.hpp"

namespace amod {

namespace {

constexpr double kEarthRadius = 6371008.8;  // meters, mean radius
constexpr double kDeg = 3.14159265358979323846 / 180.0;
constexpr std::size_t kMaxWarnings = 20;

bool parse_i64(const char* s, std::int64_t& out) {
  if (!s || !*s) return false;
  char* end = nullptr;
  out = std::strtoll(s, &end, 10);
  return *end == '\0';
}

bool parse_f64(const char* s, double& out) {
  if (!s || !*s) return false;
  char* end = nullptr;
  out = std::strtod(s, &end);
  return *end == '\0' && std::isfinite(out);
}

const char* attr(const XML_Char** atts, const char* name) {
  for (int i = 0; atts[i]; i += 2)
    if (std::string_view(atts[i]) == name) return atts[i + 1];
  return nullptr;
}

struct ParseState {
  const std::set<std::string>* whitelist = nullptr;
  OsmExtract out;
  bool in_way = false;
  OsmWay way;
  std::string error;
  XML_Parser parser = nullptr;
};

void fail(ParseState& st, const std::string& message) {
  if (st.error.empty()) {
    st.error = message + " at byte offset " + std::to_string(XML_GetCurrentByteIndex(st.parser));
    XML_StopParser(st.parser, XML_FALSE);
  }
}

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** atts) {
  auto& st = *static_cast<ParseState*>(data);
  const std::string_view tag(name);
  if (tag == "node") {
    OsmNode n;
    if (!parse_i64(attr(atts, "id"), n.id) || !parse_f64(attr(atts, "lat"), n.lat) ||
        !parse_f64(attr(atts, "lon"), n.lon)) {
      fail(st, "node without a valid id, lat and lon");
      return;
    }
    st.out.nodes.push_back(n);
  } else if (tag == "way") {
    st.in_way = true;
    st.way = OsmWay{};
    if (!parse_i64(attr(atts, "id"), st.way.id)) fail(st, "way without a valid id");
  } else if (st.in_way && tag == "nd") {
    std::int64_t ref = 0;
    if (!parse_i64(attr(atts, "ref"), ref)) {
      fail(st, "way node reference without a valid ref");
      return;
    }
    st.way.refs.push_back(ref);
  } else if (st.in_way && tag == "tag") {
    const char* k = attr(atts, "k");
    const char* v = attr(atts, "v");
    if (!k || !v) return;
    const std::string_view key(k);
    if (key == "highway")
      st.way.highway = v;
    else if (key == "lanes" || key == "lanes:forward" || key == "lanes:backward" || key == "maxspeed" ||
             key == "oneway")
      st.way.tags[std::string(key)] = v;
  }
}

void XMLCALL on_end(void* data, const XML_Char* name) {
  auto& st = *static_cast<ParseState*>(data);
  if (std::string_view(name) != "way" || !st.in_way) return;
  st.in_way = false;
  ++st.out.ways_seen;
  if (st.way.refs.size() >= 2 && st.whitelist->count(st.way.highway))
    st.out.ways.push_back(std::move(st.way));
  else
    ++st.out.ways_skipped;
}

class Parser {
 public:
  explicit Parser(const std::set<std::string>& whitelist) : parser_(XML_ParserCreate(nullptr)) {
    if (!parser_) throw std::bad_alloc();
    st_.whitelist = &whitelist;
    st_.parser = parser_;
    XML_SetUserData(parser_, &st_);
    XML_SetElementHandler(parser_, on_start, on_end);
  }
  ~Parser() { XML_ParserFree(parser_); }
  Parser(const Parser&) = delete;
  Parser& operator=(const Parser&) = delete;

  void feed(const char* data, std::size_t n, bool final) {
    if (XML_Parse(parser_, data, static_cast<int>(n), final ? 1 : 0) == XML_STATUS_ERROR) {
      if (!st_.error.empty()) throw InputError("OSM: " + st_.error);
      throw InputError(std::string("OSM XML syntax error: ") + XML_ErrorString(XML_GetErrorCode(parser_)) +
                       " at byte offset " + std::to_string(XML_GetCurrentByteIndex(parser_)));
    }
  }

  OsmExtract finish() {
    auto& nodes = st_.out.nodes;
    std::stable_sort(nodes.begin(), nodes.end(), [](const OsmNode& a, const OsmNode& b) { return a.id < b.id; });
    return std::move(st_.out);
  }

 private:
  XML_Parser parser_;
  ParseState st_;
};

}  // namespace

const OsmNode* OsmExtract::find(std::int64_t id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id, [](const OsmNode& n, std::int64_t v) { return n.id < v; });
  return it != nodes.end() && it->id == id ? &*it : nullptr;
}

std::set<std::string> default_highway_whitelist() {
  std::set<std::string> w;
  for (const char* c : {"motorway", "trunk", "primary", "secondary", "tertiary"}) {
    w.insert(c);
    w.insert(std::string(c) + "_link");
  }
  w.insert("residential");
  w.insert("unclassified");
  return w;
}

OsmExtract parse_osm(std::istream& in, const std::set<std::string>& whitelist) {
  Parser p(whitelist);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<std::size_t>(in.gcount());
    if (n == 0) break;
    p.feed(buf.data(), n, false);
  }
  p.feed(nullptr, 0, true);
  return p.finish();
}

OsmExtract parse_osm(std::string_view xml, const std::set<std::string>& whitelist) {
  Parser p(whitelist);
  constexpr std::size_t kChunk = 1 << 16;
  for (std::size_t off = 0; off < xml.size(); off += kChunk)
    p.feed(xml.data() + off, std::min(kChunk, xml.size() - off), false);
  p.feed(nullptr, 0, true);
  return p.finish();
}

OsmOptions default_osm_options() {
  OsmOptions o;
  // km/h and total lanes; typical urban US values.
  o.defaults = {
      {"motorway", {100.0, 4}},     {"motorway_link", {60.0, 1}}, {"trunk", {80.0, 4}},
      {"trunk_link", {50.0, 1}},    {"primary", {60.0, 4}},       {"primary_link", {40.0, 1}},
      {"secondary", {50.0, 2}},     {"secondary_link", {40.0, 1}}, {"tertiary", {40.0, 2}},
      {"tertiary_link", {30.0, 1}}, {"residential", {30.0, 2}},   {"unclassified", {30.0, 2}},
  };
  o.fallback = {30.0, 2};
  return o;
}

std::optional<double> parse_maxspeed(const std::string& tag) {
  std::istringstream in(tag);
  double v = 0.0;
  if (!(in >> v) || !(v > 0.0) || !std::isfinite(v)) return std::nullopt;
  std::string unit;
  in >> std::ws;
  std::getline(in, unit);
  if (unit.empty() || unit == "km/h" || unit == "kmh" || unit == "kph") return v;
  if (unit == "mph") return v * 1.609344;
  return std::nullopt;
}

Point project(GeoOrigin origin, double lat, double lon) {
  return {kEarthRadius * (lon - origin.lon) * kDeg * std::cos(origin.lat * kDeg), kEarthRadius * (lat - origin.lat) * kDeg};
}

Json OsmReport::to_json() const {
  return {{"ways_retained", ways_retained},
          {"ways_skipped", ways_skipped},
          {"segments", segments},
          {"defaulted_maxspeed", defaulted_maxspeed},
          {"defaulted_lanes", defaulted_lanes},
          {"missing_refs", missing_refs},
          {"merged_duplicates", merged_duplicates},
          {"dropped_degenerate", dropped_degenerate},
          {"warnings", warnings}};
}

RoadNetwork osm_to_network(const OsmExtract& extract, const OsmOptions& options, OsmReport* report) {
  OsmReport local;
  OsmReport& rep = report ? *report : local;
  rep = OsmReport{};
  rep.ways_skipped = extract.ways_skipped;
  auto warn = [&](std::string msg) {
    if (rep.warnings.size() < kMaxWarnings) rep.warnings.push_back(std::move(msg));
  };
  if (!(options.capacity_scale > 0.0)) throw InputError("capacity scale must be positive");

  struct Segment {
    std::int64_t a, b;
    double capacity, speed_ms;
  };
  std::vector<Segment> segments;
  for (const auto& way : extract.ways) {
    const auto it = options.defaults.find(way.highway);
    const RoadClassDefaults& def = it != options.defaults.end() ? it->second : options.fallback;

    double speed = def.maxspeed_kmh;
    if (auto t = way.tags.find("maxspeed"); t != way.tags.end()) {
      if (auto s = parse_maxspeed(t->second)) {
        speed = *s;
      } else {
        ++rep.defaulted_maxspeed;
        warn("way " + std::to_string(way.id) + ": maxspeed '" + t->second + "' unreadable, using class default");
      }
    } else {
      ++rep.defaulted_maxspeed;
    }
    auto lanes_tag = [&](const char* key) -> std::optional<int> {
      auto t = way.tags.find(key);
      if (t == way.tags.end()) return std::nullopt;
      char* end = nullptr;
      const long n = std::strtol(t->second.c_str(), &end, 10);
      if (*end != '\0' || n <= 0 || n > 64) {
        warn("way " + std::to_string(way.id) + ": " + key + " '" + t->second + "' unreadable, using class default");
        return std::nullopt;
      }
      return static_cast<int>(n);
    };
    std::optional<int> lanes = lanes_tag("lanes");
    if (!lanes) ++rep.defaulted_lanes;
    const int total = lanes.value_or(def.lanes);

    std::string oneway;
    if (auto t = way.tags.find("oneway"); t != way.tags.end()) oneway = t->second;
    const bool forward_only = oneway == "yes" || oneway == "true" || oneway == "1";
    const bool backward_only = oneway == "-1" || oneway == "reverse";
    int fwd_lanes = total, bwd_lanes = total;
    if (!forward_only && !backward_only) {
      // Undivided two-way road: half the lanes each way, rounded up, unless
      // directional lane counts are tagged.
      fwd_lanes = lanes_tag("lanes:forward").value_or((total + 1) / 2);
      bwd_lanes = lanes_tag("lanes:backward").value_or((total + 1) / 2);
    }

    ++rep.ways_retained;
    const double speed_ms = speed / 3.6;
    for (std::size_t i = 0; i + 1 < way.refs.size(); ++i) {
      const auto a = way.refs[i], b = way.refs[i + 1];
      if (!extract.find(a) || !extract.find(b)) {
        ++rep.missing_refs;
        continue;
      }
      if (a == b) {
        ++rep.dropped_degenerate;
        continue;
      }
      if (!backward_only) segments.push_back({a, b, options.capacity_scale * speed * fwd_lanes, speed_ms});
      if (!forward_only) segments.push_back({b, a, options.capacity_scale * speed * bwd_lanes, speed_ms});
    }
  }

  // Node set and projection origin from the nodes actually used.
  std::vector<std::int64_t> used;
  for (const auto& s : segments) {
    used.push_back(s.a);
    used.push_back(s.b);
  }
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  if (used.empty()) throw InputError("OSM extract contains no usable road segments");
  GeoOrigin origin{0.0, 0.0};
  for (auto id : used) {
    origin.lat += extract.find(id)->lat;
    origin.lon += extract.find(id)->lon;
  }
  origin.lat /= static_cast<double>(used.size());
  origin.lon /= static_cast<double>(used.size());

  RoadNetwork net;
  net.set_geo_origin(origin);
  std::unordered_map<std::int64_t, NodeIndex> index;
  for (auto id : used) {
    const auto* n = extract.find(id);
    index[id] = net.add_node(std::to_string(id), project(origin, n->lat, n->lon));
  }
  std::vector<double> cap, time;
  for (const auto& s : segments) {
    const NodeIndex u = index[s.a], v = index[s.b];
    const auto& pu = *net.position(u);
    const auto& pv = *net.position(v);
    const double length = std::hypot(pv.x - pu.x, pv.y - pu.y);
    const double t = length / s.speed_ms;
    if (auto e = net.find_edge(u, v)) {
      ++rep.merged_duplicates;
      net.set_capacity(*e, net.edge(*e).capacity + s.capacity);
      time[*e] = std::min(time[*e], t);
      continue;
    }
    net.add_edge(u, v, s.capacity, t);
    cap.push_back(s.capacity);
    time.push_back(t);
  }
  rep.segments = net.edge_count();
  // Rebuild with the merged times (capacities were updated in place).
  RoadNetwork out;
  out.set_geo_origin(origin);
  for (NodeIndex v = 0; v < net.node_count(); ++v) out.add_node(net.node_id(v), net.position(v));
  for (EdgeIndex e = 0; e < net.edge_count(); ++e)
    out.add_edge(net.edge(e).from, net.edge(e).to, net.edge(e).capacity, time[e]);
  return out;
}

}  // namespace amod
