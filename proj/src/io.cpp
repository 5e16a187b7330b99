#include "amod/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "amod/error.hpp"

namespace amod {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
  if (!out) throw InputError("write failed for '" + path + "'");
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

namespace {

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InputError(where + ": \"" + key + "\" has the wrong type");
  }
}

double number(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing \"" + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_number()) throw InputError(where + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

NodeIndex node_ref(const Json& j, const char* key, const RoadNetwork& net, const std::string& where) {
  const auto id = field<std::string>(j, key, where);
  const auto v = net.find_node(id);
  if (!v) throw InputError(where + ": unknown node '" + id + "'");
  return *v;
}

EdgeIndex edge_ref(const Json& j, const RoadNetwork& net, const std::string& where) {
  const auto from = node_ref(j, "from", net, where);
  const auto to = node_ref(j, "to", net, where);
  const auto e = net.find_edge(from, to);
  if (!e) throw InputError(where + ": no edge " + net.node_id(from) + " -> " + net.node_id(to));
  return *e;
}

const Json& list(const Json& j, const char* key, const std::string& what) {
  if (j.is_array()) return j;
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_array())
    throw InputError(what + ": expected an array \"" + key + "\"");
  return j.at(key);
}

}  // namespace

RoadNetwork graph_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("graph: expected an object");
  RoadNetwork net;
  const auto& nodes = list(j, "nodes", "graph");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "graph node " + std::to_string(i);
    const auto id = field<std::string>(nodes[i], "id", where);
    std::optional<Point> p;
    const bool has_x = nodes[i].contains("x"), has_y = nodes[i].contains("y");
    if (has_x != has_y) throw InputError(where + ": x and y must appear together");
    if (has_x) p = Point{number(nodes[i], "x", where), number(nodes[i], "y", where)};
    if (net.find_node(id)) throw InputError(where + ": duplicate node id '" + id + "'");
    net.add_node(id, p);
  }
  if (!j.contains("edges")) throw InputError("graph: missing \"edges\"");
  const auto& edges = list(j, "edges", "graph");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string where = "graph edge " + std::to_string(i);
    const auto from = node_ref(edges[i], "from", net, where);
    const auto to = node_ref(edges[i], "to", net, where);
    net.add_edge(from, to, number(edges[i], "capacity", where), number(edges[i], "free_flow_time", where));
  }
  if (j.contains("origin")) {
    const auto& o = j.at("origin");
    net.set_geo_origin({number(o, "lat", "graph origin"), number(o, "lon", "graph origin")});
  }
  return net;
}

Json graph_to_json(const RoadNetwork& network) {
  Json nodes = Json::array();
  for (NodeIndex v = 0; v < network.node_count(); ++v) {
    Json n = {{"id", network.node_id(v)}};
    if (const auto& p = network.position(v)) {
      n["x"] = p->x;
      n["y"] = p->y;
    }
    nodes.push_back(std::move(n));
  }
  Json edges = Json::array();
  for (const auto& e : network.edges()) {
    edges.push_back({{"from", network.node_id(e.from)},
                     {"to", network.node_id(e.to)},
                     {"capacity", e.capacity},
                     {"free_flow_time", e.free_flow_time}});
  }
  Json j = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
  if (const auto& o = network.geo_origin()) j["origin"] = {{"lat", o->lat}, {"lon", o->lon}};
  return j;
}

RoadNetwork load_graph(const std::string& path) { return graph_from_json(parse_json(read_file(path), path)); }

std::string save_graph(const RoadNetwork& network) { return graph_to_json(network).dump(2) + "\n"; }

RequestSet requests_from_json(const Json& j, const RoadNetwork& network) {
  RequestSet out;
  const auto& items = list(j, "requests", "requests");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string where = "request " + std::to_string(i);
    out.push_back({node_ref(items[i], "origin", network, where), node_ref(items[i], "dest", network, where),
                   number(items[i], "rate", where)});
  }
  return out;
}

Json requests_to_json(const RequestSet& requests, const RoadNetwork& network) {
  Json items = Json::array();
  for (const auto& r : requests)
    items.push_back({{"origin", network.node_id(r.origin)}, {"dest", network.node_id(r.dest)}, {"rate", r.rate}});
  return {{"requests", std::move(items)}};
}

EdgeLoad loads_from_json(const Json& j, const RoadNetwork& network) {
  EdgeLoad loads(network.edge_count(), 0.0);
  const auto& items = list(j, "loads", "loads");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string where = "load " + std::to_string(i);
    const double f = number(items[i], "flow", where);
    if (!(f >= 0.0) || !std::isfinite(f)) throw InputError(where + ": flow must be finite and nonnegative");
    loads[edge_ref(items[i], network, where)] = f;
  }
  return loads;
}

Json edge_values_to_json(const RoadNetwork& network, const std::vector<double>& values, const char* key,
                         bool skip_zero) {
  Json items = Json::array();
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    if (skip_zero && values[e] == 0.0) continue;
    const auto& edge = network.edge(e);
    items.push_back({{"from", network.node_id(edge.from)}, {"to", network.node_id(edge.to)}, {key, values[e]}});
  }
  return items;
}

RebalanceSnapshot snapshot_from_json(const Json& j, const RoadNetwork& network) {
  RebalanceSnapshot s;
  const auto& regions = list(j, "regions", "snapshot");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::string where = "snapshot region " + std::to_string(i);
    RegionSnapshot r;
    r.anchor = node_ref(regions[i], "anchor", network, where);
    r.idle_vehicles = field<std::int64_t>(regions[i], "idle_vehicles", where);
    r.waiting_customers = field<std::int64_t>(regions[i], "waiting_customers", where);
    if (r.idle_vehicles < 0 || r.waiting_customers < 0) throw InputError(where + ": counts must be nonnegative");
    s.regions.push_back(r);
  }
  if (s.regions.empty()) throw InputError("snapshot: no regions");
  if (j.contains("inbound")) {
    const auto& inbound = j.at("inbound");
    if (!inbound.is_array()) throw InputError("snapshot: \"inbound\" must be an array");
    for (std::size_t i = 0; i < inbound.size(); ++i) {
      const std::string where = "snapshot inbound " + std::to_string(i);
      InboundVehicle v;
      v.from_region = field<std::size_t>(inbound[i], "from_region", where);
      v.to_region = field<std::size_t>(inbound[i], "to_region", where);
      v.eta = number(inbound[i], "eta", where);
      if (v.from_region >= s.regions.size() || v.to_region >= s.regions.size())
        throw InputError(where + ": unknown region");
      s.inbound.push_back(v);
    }
  }
  if (j.contains("t_vicinity")) s.t_vicinity = number(j, "t_vicinity", "snapshot");
  s.residual_capacity.resize(network.edge_count());
  for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
    const double c = network.edge(e).capacity;
    s.residual_capacity[e] = std::isfinite(c) ? static_cast<std::int64_t>(std::floor(c)) : INT32_MAX;
  }
  if (j.contains("residual_capacity")) {
    const auto& items = j.at("residual_capacity");
    if (!items.is_array()) throw InputError("snapshot: \"residual_capacity\" must be an array");
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string where = "snapshot residual capacity " + std::to_string(i);
      const double c = number(items[i], "capacity", where);
      if (!(c >= 0.0) || c != std::floor(c)) throw InputError(where + ": capacity must be a nonnegative integer");
      s.residual_capacity[edge_ref(items[i], network, where)] = static_cast<std::int64_t>(c);
    }
  }
  if (j.contains("slack_cost")) s.slack_cost = number(j, "slack_cost", "snapshot");
  return s;
}

}  // namespace amod
