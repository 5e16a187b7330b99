#include "amod/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "amod/canonical_json.hpp"
#include "amod/crrp.hpp"
#include "amod/error.hpp"
#include "amod/io.hpp"
#include "amod/netgraph.hpp"
#include "amod/osm.hpp"
#include "amod/rebalance.hpp"
#include "amod/regions.hpp"
#include "amod/routing.hpp"
#include "amod/simulator.hpp"
#include "amod/synth.hpp"
#include "amod/trips.hpp"

namespace amod {

namespace {

constexpr const char* kToolVersion = "1.0.0";

// Raised by a command to report a domain-level negative result after its
// outputs are written.
struct Infeasible {
  std::string message;
};

class Output {
 public:
  Output(std::string dir, std::string subcommand) : dir_(std::move(dir)), subcommand_(std::move(subcommand)) {}

  void write(const std::string& name, const std::string& content) {
    std::filesystem::create_directories(dir_);
    write_file((std::filesystem::path(dir_) / name).string(), content);
    outputs_.push_back(name);
  }
  void write_json(const std::string& name, const Json& j) { write(name, canonical_dump(j)); }

  void input(const std::string& path) { inputs_.push_back(path); }
  void config(const std::string& key, Json value) { config_[key] = std::move(value); }
  void seed(std::uint64_t s) { seed_ = s; }

  void write_manifest() {
    std::filesystem::create_directories(dir_);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    Json m = {{"subcommand", subcommand_}, {"inputs", inputs_},   {"outputs", outputs_},
              {"config", config_},         {"version", kToolVersion}, {"timestamp", stamp}};
    m["seed"] = seed_ ? Json(*seed_) : Json(nullptr);
    write_file((std::filesystem::path(dir_) / "manifest.json").string(), canonical_dump(m));
  }

 private:
  std::string dir_;
  std::string subcommand_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  Json config_ = Json::object();
  std::optional<std::uint64_t> seed_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Json node_list(const RoadNetwork& net, const std::vector<NodeIndex>& nodes) {
  Json a = Json::array();
  for (auto v : nodes) a.push_back(net.node_id(v));
  return a;
}

Json violation_json(const RoadNetwork& net, const CutViolation& v) {
  return {{"s_side", node_list(net, v.s_side)},
          {"condition", v.condition},
          {"demand", v.demand},
          {"capacity", v.capacity},
          {"excess", v.excess()}};
}

Json metrics_json(const SimMetrics& m) {
  return {{"customers", m.customers},
          {"trips_completed", m.trips_completed},
          {"mean_wait_s", m.mean_wait},
          {"mean_travel_s", m.mean_travel},
          {"mean_service_s", m.mean_service},
          {"pct_wait_over_5min", m.pct_wait_over_5min},
          {"mean_rebalancing_vehicles", m.mean_rebalancing_vehicles},
          {"rebalancing_dispatches", m.rebalancing_dispatches},
          {"unserviceable", m.unserviceable},
          {"steps", m.steps},
          {"end_time_s", m.end_time}};
}

Heuristic parse_heuristic(const std::string& s) {
  if (s == "auto") return Heuristic::Auto;
  if (s == "free_flow") return Heuristic::FreeFlow;
  if (s == "euclidean") return Heuristic::Euclidean;
  if (s == "zero") return Heuristic::Zero;
  throw InputError("unknown heuristic '" + s + "' (expected auto, free_flow, euclidean or zero)");
}

CrrpVariant parse_variant(const std::string& s) {
  if (s == "joint") return CrrpVariant::Joint;
  if (s == "customer_only") return CrrpVariant::CustomerOnly;
  throw InputError("unknown variant '" + s + "' (expected joint or customer_only)");
}

Placement parse_placement(const std::string& s) {
  if (s == "random") return Placement::Random;
  if (s == "even") return Placement::Even;
  throw InputError("unknown placement '" + s + "' (expected random or even)");
}

// Flags shared by simulate and compare.
struct SimFlags {
  std::string graph, trips;
  std::size_t fleet = 50;
  std::string rebalancer = "congestion_aware";
  std::uint64_t seed = 1;
  double step = 6.0, period = 120.0;
  std::optional<double> vicinity, duration, speed;
  double drain = 1800.0;
  double capacity_multiplier = 1.0;
  std::size_t regions = 8;
  std::string placement = "random";
  double alpha = 0.15, beta = 4.0;

  void add(CLI::App* app, bool with_rebalancer) {
    app->add_option("graph", graph, "Road network JSON")->required();
    app->add_option("--trips", trips, "Trips CSV (arrival_time_s,origin_node,dest_node)")->required();
    app->add_option("--fleet", fleet, "Fleet size");
    if (with_rebalancer)
      app->add_option("--rebalancer", rebalancer, "congestion_aware | baseline_p2p | none");
    app->add_option("--seed", seed, "Seed for fleet placement and region clustering");
    app->add_option("--step", step, "Time step in seconds");
    app->add_option("--period", period, "Rebalancing period t_hor in seconds");
    app->add_option("--vicinity", vicinity, "t_vicinity in seconds (default: the period)");
    app->add_option("--duration", duration, "Simulated seconds (default: last arrival + drain)");
    app->add_option("--drain", drain, "Seconds simulated after the last arrival when no duration is given");
    app->add_option("--speed", speed, "Recompute free-flow times from coordinates at this speed (m/s)");
    app->add_option("--capacity-multiplier", capacity_multiplier, "Uniform capacity factor for exogenous traffic");
    app->add_option("--regions", regions, "Region count for k-means clustering");
    app->add_option("--placement", placement, "Initial fleet placement: random | even");
    app->add_option("--alpha", alpha, "BPR alpha");
    app->add_option("--beta", beta, "BPR beta");
  }

  SimConfig config() const {
    SimConfig c;
    c.time_step = step;
    c.rebalance_period = period;
    c.t_vicinity = vicinity;
    c.fleet_size = fleet;
    c.free_flow_speed = speed;
    c.bpr = {alpha, beta};
    c.rebalancer = parse_rebalancer(rebalancer);
    c.seed = seed;
    c.duration = duration;
    c.drain_time = drain;
    c.capacity_multiplier = capacity_multiplier;
    c.regions = regions;
    c.placement = parse_placement(placement);
    return c;
  }
};

TripStream load_sim_trips(const std::string& path, const RoadNetwork& net) {
  TripLoadOptions opts;
  return load_trips_csv(read_file(path), net, opts);
}

Regions regions_for(const RoadNetwork& net, const SimConfig& c) {
  return net.has_coordinates() ? kmeans_regions(net, std::min(c.regions, net.node_count()), c.seed)
                               : single_region(net);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Congestion-aware routing and rebalancing for mobility-on-demand fleets", "amod"};
  app.require_subcommand(1);
  std::string out_dir;
  if (const char* env = std::getenv("AMOD_OUT_DIR")) out_dir = env;
  if (out_dir.empty()) out_dir = ".";
  app.add_option("--out", out_dir, "Output directory (default: $AMOD_OUT_DIR or the working directory)");

  std::function<void(Output&)> command;
  auto sub = [&](const char* name, const char* help) { return app.add_subcommand(name, help); };

  // check-symmetry
  std::string graph_path;
  double tolerance = kDefaultSymmetryTolerance;
  auto* cs = sub("check-symmetry", "Node-level capacity symmetry check");
  cs->add_option("graph", graph_path, "Road network JSON")->required();
  cs->add_option("--tolerance", tolerance, "Relative node imbalance tolerance");
  cs->callback([&] {
    command = [&](Output& o) {
      o.input(graph_path);
      const auto net = load_graph(graph_path);
      require_valid(net);
      const auto r = is_capacity_symmetric(net, tolerance);
      Json j = {{"symmetric", r.symmetric},
                {"tolerance", tolerance},
                {"worst_imbalance", r.worst_imbalance},
                {"nodes", net.node_count()},
                {"edges", net.edge_count()}};
      j["worst_node"] = r.worst_node ? Json(net.node_id(*r.worst_node)) : Json(nullptr);
      o.write_json("symmetry.json", j);
      out << canonical_dump(j);
    };
  });

  // cut-conditions
  std::string requests_path, mode = "auto";
  std::size_t samples = 1000, disparity_samples = 0;
  std::uint64_t seed = 1;
  auto* cc = sub("cut-conditions", "Check the cut conditions for a request set");
  cc->add_option("graph", graph_path, "Road network JSON")->required();
  cc->add_option("--requests", requests_path, "Requests JSON")->required();
  cc->add_option("--mode", mode, "auto | exhaustive | sampled (auto: exhaustive up to 20 nodes)");
  cc->add_option("--samples", samples, "Cut samples in sampled mode");
  cc->add_option("--seed", seed, "Sampling seed");
  cc->add_option("--disparity-samples", disparity_samples, "Also sample fractional capacity disparity");
  cc->callback([&] {
    command = [&](Output& o) {
      o.input(graph_path);
      o.input(requests_path);
      o.seed(seed);
      const auto net = load_graph(graph_path);
      const auto req = requests_from_json(parse_json(read_file(requests_path), requests_path), net);
      require_valid(net, req);
      CutSearch search = CutSearch::exhaustive();
      if (mode == "sampled" || (mode == "auto" && net.node_count() > kMaxExhaustiveNodes))
        search = CutSearch::sampled(samples, seed);
      else if (mode != "exhaustive" && mode != "auto")
        throw InputError("unknown mode '" + mode + "'");
      const auto r = check_cut_conditions(net, req, search);
      Json j = {{"passed", r.passed},
                {"mode", search.kind == CutSearch::Kind::Exhaustive ? "exhaustive" : "sampled"},
                {"cuts_checked", r.cuts_checked}};
      j["worst"] = r.worst ? violation_json(net, *r.worst) : Json(nullptr);
      if (disparity_samples > 0) {
        const auto d = sample_disparity(net, disparity_samples, seed);
        j["disparity"] = {{"mean", d.mean}, {"stddev", d.stddev}, {"samples", d.samples}};
      }
      o.write_json("cut_conditions.json", j);
      out << canonical_dump(j);
      if (!r.passed) throw Infeasible{"a cut condition is violated"};
    };
  });

  // solve-crrp
  double rho = 1.0;
  bool relax = false;
  std::optional<double> slack_cost;
  std::string variant = "joint";
  auto* sc = sub("solve-crrp", "Solve the congestion-free routing and rebalancing LP");
  sc->add_option("graph", graph_path, "Road network JSON")->required();
  sc->add_option("--requests", requests_path, "Requests JSON")->required();
  sc->add_option("--rho", rho, "Weight of rebalancing time");
  sc->add_flag("--relax", relax, "Allow capacity violations at a penalty");
  sc->add_option("--slack-cost", slack_cost, "Penalty per unit of capacity violation");
  sc->add_option("--variant", variant, "joint | customer_only");
  sc->callback([&] {
    command = [&](Output& o) {
      o.input(graph_path);
      o.input(requests_path);
      const auto net = load_graph(graph_path);
      const auto req = requests_from_json(parse_json(read_file(requests_path), requests_path), net);
      CrrpConfig cfg;
      cfg.rho = rho;
      cfg.relax_congestion = relax;
      cfg.slack_cost = slack_cost;
      cfg.variant = parse_variant(variant);
      const auto s = solve_crrp(net, req, cfg);
      Json j = {{"status", to_string(s.status)}, {"variant", to_string(cfg.variant)}, {"rho", rho},
                {"relaxed", relax},              {"pivots", s.pivots}};
      j["witness"] = s.witness ? violation_json(net, *s.witness) : Json(nullptr);
      if (s.status == LpStatus::Optimal) {
        j["objective"] = s.objective;
        j["v_min"] = s.v_min;
        j["total_slack"] = s.total_slack();
        Json cust = Json::array();
        for (std::size_t m = 0; m < req.size(); ++m)
          cust.push_back({{"request", m},
                          {"origin", net.node_id(req[m].origin)},
                          {"dest", net.node_id(req[m].dest)},
                          {"rate", req[m].rate},
                          {"edges", edge_values_to_json(net, s.flows.customer[m], "flow")}});
        j["customer_flows"] = std::move(cust);
        j["rebalancing_flows"] = edge_values_to_json(net, s.flows.rebalancing, "flow");
        j["slacks"] = edge_values_to_json(net, s.slacks, "slack");
      }
      o.write_json("crrp.json", j);
      out << canonical_dump(j);
      if (s.status == LpStatus::Infeasible) throw Infeasible{"the CRRP instance is infeasible"};
      if (s.status != LpStatus::Optimal) throw NumericalError(std::string("LP solve ended with ") + to_string(s.status));
    };
  });

  // rebalance-once
  std::string snapshot_path;
  auto* ro = sub("rebalance-once", "One round of the real-time rebalancing program");
  ro->add_option("graph", graph_path, "Road network JSON")->required();
  ro->add_option("--snapshot", snapshot_path, "Region snapshot JSON")->required();
  ro->callback([&] {
    command = [&](Output& o) {
      o.input(graph_path);
      o.input(snapshot_path);
      const auto net = load_graph(graph_path);
      require_valid(net);
      const auto snap = snapshot_from_json(parse_json(read_file(snapshot_path), snapshot_path), net);
      const auto state = compute_region_state(snap.regions, snap.inbound, snap.t_vicinity);
      auto inst = make_rebalance_instance(snap.regions, state, snap.residual_capacity);
      inst.slack_cost = snap.slack_cost;
      const auto plan = solve_realtime_rebalance(inst, net);
      const auto paths = flow_decompose(net, std::span<const std::int64_t>(plan.flow));
      Json assignments = Json::array();
      for (const auto& p : paths.paths) assignments.push_back({{"path", node_list(net, p.nodes)}, {"vehicles", p.count}});
      Json regions = Json::array();
      for (std::size_t i = 0; i < state.size(); ++i)
        regions.push_back({{"anchor", net.node_id(snap.regions[i].anchor)},
                           {"vehicles", state[i].vehicles},
                           {"inbound", state[i].inbound},
                           {"owned", state[i].owned},
                           {"excess", state[i].excess},
                           {"desired", state[i].desired},
                           {"origin_slack", plan.origin_slack[i]},
                           {"destination_slack", plan.destination_slack[i]}});
      Json report = {{"regions", regions},
                     {"objective", plan.objective},
                     {"slack_cost", plan.slack_cost},
                     {"paths", paths.paths.size()},
                     {"cycles", paths.cycles.size()}};
      o.write_json("rebalance.json", assignments);
      o.write_json("rebalance_report.json", report);
      out << canonical_dump(assignments);
    };
  });

  // route
  std::string from_id, to_id, loads_path, heuristic = "auto";
  double alpha = 0.15, beta = 4.0;
  auto* rt = sub("route", "Minimum-delay route under BPR at given loads");
  rt->add_option("graph", graph_path, "Road network JSON")->required();
  rt->add_option("--from", from_id, "Origin node id")->required();
  rt->add_option("--to", to_id, "Destination node id")->required();
  rt->add_option("--loads", loads_path, "Edge loads JSON (default: empty network)");
  rt->add_option("--heuristic", heuristic, "auto | free_flow | euclidean | zero");
  rt->add_option("--alpha", alpha, "BPR alpha");
  rt->add_option("--beta", beta, "BPR beta");
  rt->callback([&] {
    command = [&](Output& o) {
      o.input(graph_path);
      if (!loads_path.empty()) o.input(loads_path);
      const auto net = load_graph(graph_path);
      require_valid(net);
      const EdgeLoad loads = loads_path.empty() ? EdgeLoad{} : loads_from_json(parse_json(read_file(loads_path), loads_path), net);
      FreeFlowOracle oracle(net);
      RouteOptions opts;
      opts.heuristic = parse_heuristic(heuristic);
      opts.oracle = &oracle;
      opts.bpr = {alpha, beta};
      try {
        const auto r = astar_route(net, loads, net.node(from_id), net.node(to_id), opts);
        Json j = {{"nodes", node_list(net, r.nodes)}, {"time", r.time}, {"edges", r.edges.size()}};
        o.write_json("route.json", j);
        out << canonical_dump(j);
      } catch (const NoRouteError& e) {
        o.write_json("route.json", {{"nodes", nullptr}, {"time", nullptr}, {"error", e.what()}});
        throw Infeasible{e.what()};
      }
    };
  });

  // simulate
  SimFlags sim;
  bool trace = false;
  auto* sm = sub("simulate", "Run the fleet simulator");
  sim.add(sm, true);
  sm->add_flag("--trace", trace, "Also write the per-step trace CSV");
  sm->callback([&] {
    command = [&](Output& o) {
      o.input(sim.graph);
      o.input(sim.trips);
      o.seed(sim.seed);
      const auto net = load_graph(sim.graph);
      require_valid(net);
      const auto trips = load_sim_trips(sim.trips, net);
      const auto cfg = sim.config();
      const auto regions = regions_for(net, cfg);
      const auto res = run_simulation(net, trips, cfg, &regions);
      Json j = metrics_json(res.metrics);
      j["rebalancer"] = to_string(cfg.rebalancer);
      j["regions"] = regions.size();
      o.write_json("metrics.json", j);
      if (trace) o.write("trace.csv", write_trace_csv(res.trace));
      out << canonical_dump(j);
    };
  });

  // compare
  SimFlags cmp;
  std::string rebalancers = "congestion_aware,baseline_p2p,none";
  auto* cp = sub("compare", "Run several rebalancers on the same inputs");
  cmp.add(cp, false);
  cp->add_option("--rebalancers", rebalancers, "Comma-separated rebalancers");
  cp->callback([&] {
    command = [&](Output& o) {
      o.input(cmp.graph);
      o.input(cmp.trips);
      o.seed(cmp.seed);
      const auto net = load_graph(cmp.graph);
      require_valid(net);
      const auto trips = load_sim_trips(cmp.trips, net);
      std::vector<SimConfig> configs;
      for (const auto& name : split_list(rebalancers)) {
        auto c = cmp.config();
        c.rebalancer = parse_rebalancer(name);
        configs.push_back(c);
      }
      if (configs.empty()) throw InputError("no rebalancers given");
      const auto regions = regions_for(net, configs.front());
      const auto runs = compare(net, trips, configs, &regions);
      Json list = Json::array();
      for (std::size_t i = 0; i < runs.size(); ++i)
        list.push_back({{"rebalancer", to_string(configs[i].rebalancer)}, {"metrics", metrics_json(runs[i].metrics)}});
      Json j = {{"runs", list}, {"regions", regions.size()}};
      std::ostringstream csv;
      csv << "clock";
      for (const auto& c : configs) csv << ',' << to_string(c.rebalancer);
      csv << '\n';
      char buf[40];
      for (std::size_t k = 0; k < runs.front().trace.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.12g", runs.front().trace[k].clock);
        csv << buf;
        for (const auto& r : runs) csv << ',' << r.trace[k].congested_edges;
        csv << '\n';
      }
      o.write_json("comparison.json", j);
      o.write("congested_edges.csv", csv.str());
      out << canonical_dump(j);
    };
  });

  // sweep-asymmetry
  std::string reductions = "0,10,20,30,40,50";
  double bearing = 0.0, half_width = 45.0;
  std::optional<double> calibrate;
  auto* sw = sub("sweep-asymmetry", "Travel times with and without rebalancing under directional capacity cuts");
  sw->add_option("graph", graph_path, "Road network JSON")->required();
  sw->add_option("--requests", requests_path, "Requests JSON")->required();
  sw->add_option("--reductions", reductions, "Comma-separated capacity reductions in percent");
  sw->add_option("--bearing", bearing, "Direction of derated edges, degrees clockwise from north");
  sw->add_option("--half-width", half_width, "Half width of the bearing window in degrees");
  sw->add_option("--calibrate", calibrate, "First scale capacities to this customer-only max utilization");
  sw->add_option("--rho", rho, "Weight of rebalancing time");
  sw->add_option("--slack-cost", slack_cost, "Penalty per unit of capacity violation");
  sw->callback([&] {
    command = [&](Output& o) {
      o.input(graph_path);
      o.input(requests_path);
      auto net = load_graph(graph_path);
      const auto req = requests_from_json(parse_json(read_file(requests_path), requests_path), net);
      require_valid(net, req);
      if (!net.has_coordinates()) throw InputError("sweep-asymmetry needs node coordinates to select edges by bearing");
      std::vector<double> fractions;
      for (const auto& s : split_list(reductions)) {
        double pct = 0.0;
        try {
          std::size_t used = 0;
          pct = std::stod(s, &used);
          if (used != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
          throw InputError("bad reduction '" + s + "'");
        }
        if (!(pct >= 0.0 && pct <= 100.0)) throw InputError("reductions must lie in [0, 100]");
        fractions.push_back(pct / 100.0);
      }
      Json j = Json::object();
      if (calibrate) {
        const auto c = calibrate_capacities(net, req, *calibrate);
        j["calibration"] = {{"scale", c.scale}, {"max_utilization", c.max_utilization}};
      }
      SweepConfig cfg;
      cfg.rho = rho;
      cfg.slack_cost = slack_cost;
      const auto rep = asymmetry_sweep(net, req, fractions, BearingFilter{bearing, half_width}, cfg);
      Json points = Json::array();
      std::ostringstream csv;
      csv << "reduction_pct,mean_time_with_reb,mean_time_without_reb\n";
      char buf[96];
      for (const auto& p : rep.points) {
        points.push_back({{"reduction_pct", p.reduction * 100.0},
                          {"mean_time_with_reb", number_or_null(p.mean_time_with_rebalancing)},
                          {"mean_time_without_reb", number_or_null(p.mean_time_without_rebalancing)},
                          {"relative_gap", number_or_null(p.relative_gap())},
                          {"slack_with_reb", p.slack_with_rebalancing},
                          {"slack_without_reb", p.slack_without_rebalancing},
                          {"derated_edges", p.derated_edges}});
        auto fmt = [](double v) {
          char b[40];
          if (std::isfinite(v))
            std::snprintf(b, sizeof b, "%.12g", v);
          else
            std::snprintf(b, sizeof b, "inf");
          return std::string(b);
        };
        std::snprintf(buf, sizeof buf, "%.12g", p.reduction * 100.0);
        csv << buf << ',' << fmt(p.mean_time_with_rebalancing) << ',' << fmt(p.mean_time_without_rebalancing) << '\n';
      }
      j["points"] = std::move(points);
      j["bearing_deg"] = bearing;
      j["half_width_deg"] = half_width;
      o.write_json("sweep.json", j);
      o.write("sweep.csv", csv.str());
      out << canonical_dump(j);
    };
  });

  // ingest-osm
  std::string osm_path, whitelist;
  double capacity_scale = 1.0;
  auto* io = sub("ingest-osm", "Build a road network from an OSM XML extract");
  io->add_option("osm", osm_path, "OSM XML file")->required();
  io->add_option("--capacity-scale", capacity_scale, "Capacity per (km/h * lane)");
  io->add_option("--whitelist", whitelist, "Comma-separated highway classes to keep");
  io->callback([&] {
    command = [&](Output& o) {
      o.input(osm_path);
      std::ifstream in(osm_path, std::ios::binary);
      if (!in) throw InputError("cannot open '" + osm_path + "'");
      std::set<std::string> classes = default_highway_whitelist();
      if (!whitelist.empty()) {
        const auto items = split_list(whitelist);
        classes = std::set<std::string>(items.begin(), items.end());
      }
      const auto extract = parse_osm(in, classes);
      auto opts = default_osm_options();
      opts.capacity_scale = capacity_scale;
      OsmReport rep;
      const auto net = osm_to_network(extract, opts, &rep);
      require_valid(net);
      Json j = rep.to_json();
      j["nodes"] = net.node_count();
      j["edges"] = net.edge_count();
      j["osm_nodes"] = extract.nodes.size();
      const auto sym = is_capacity_symmetric(net);
      j["symmetric"] = sym.symmetric;
      j["worst_imbalance"] = sym.worst_imbalance;
      o.write("graph.json", save_graph(net));
      o.write_json("ingest_report.json", j);
      out << canonical_dump(j);
    };
  });

  // convert-trips
  std::string trips_path, schema = "simple";
  double snap_radius = 250.0;
  std::size_t error_budget = 0;
  auto* ct = sub("convert-trips", "Convert a trips CSV to the simulator schema");
  ct->add_option("trips", trips_path, "Input CSV")->required();
  ct->add_option("--graph", graph_path, "Road network JSON used for node lookup and snapping")->required();
  ct->add_option("--schema", schema, "simple | nyc_taxi");
  ct->add_option("--snap-radius", snap_radius, "Snap radius in meters");
  ct->add_option("--error-budget", error_budget, "Malformed rows tolerated");
  ct->callback([&] {
    command = [&](Output& o) {
      o.input(trips_path);
      o.input(graph_path);
      const auto net = load_graph(graph_path);
      TripLoadOptions opts;
      opts.schema = parse_trip_schema(schema);
      opts.snap_radius_m = snap_radius;
      opts.error_budget = error_budget;
      TripLoadReport rep;
      const auto trips = load_trips_csv(read_file(trips_path), net, opts, &rep);
      Json j = {{"rows", rep.rows},
                {"loaded", rep.loaded},
                {"dropped_unsnappable", rep.dropped_unsnappable},
                {"dropped_same_node", rep.dropped_same_node},
                {"malformed", rep.malformed},
                {"errors", rep.errors}};
      o.write("trips.csv", write_trips_csv(trips, net));
      o.write_json("trips_report.json", j);
      out << canonical_dump(j);
    };
  });

  // make-grid
  GridSpec grid;
  auto* mg = sub("make-grid", "Write a synthetic bidirectional grid network");
  mg->add_option("--width", grid.width, "Nodes per row");
  mg->add_option("--height", grid.height, "Nodes per column");
  mg->add_option("--spacing", grid.spacing_m, "Block length in meters");
  mg->add_option("--capacity", grid.capacity, "Capacity per direction (vehicles per second)");
  mg->add_option("--speed", grid.free_flow_speed, "Free-flow speed in m/s");
  mg->callback([&] {
    command = [&](Output& o) {
      if (grid.width < 1 || grid.height < 1) throw InputError("grid dimensions must be positive");
      o.write("graph.json", save_graph(make_grid(grid)));
    };
  });

  // make-trips
  TripSpec trip_plan;
  auto* mt = sub("make-trips", "Write synthetic trips for a network");
  mt->add_option("graph", graph_path, "Road network JSON")->required();
  mt->add_option("--count", trip_plan.count, "Number of trips");
  mt->add_option("--duration", trip_plan.duration_s, "Arrival window in seconds");
  mt->add_option("--imbalance", trip_plan.imbalance, "Fraction of southwest-to-northeast trips");
  mt->add_option("--seed", trip_plan.seed, "Seed");
  mt->callback([&] {
    command = [&](Output& o) {
      o.input(graph_path);
      o.seed(trip_plan.seed);
      const auto net = load_graph(graph_path);
      require_valid(net);
      o.write("trips.csv", write_trips_csv(make_trips(net, trip_plan), net));
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitInput;
  }

  const auto* chosen = app.get_subcommands().front();
  Output output(out_dir, chosen->get_name());
  for (const auto* opt : chosen->get_options()) {
    if (opt->count() == 0 || opt->get_name() == "--help" || opt->get_positional()) continue;
    const auto& res = opt->results();
    output.config(opt->get_name(), res.size() == 1 ? Json(res.front()) : Json(res));
  }

  int code = kExitOk;
  try {
    command(output);
  } catch (const Infeasible& e) {
    err << "infeasible: " << e.message << "\n";
    code = kExitInfeasible;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    code = kExitInput;
  } catch (const NoRouteError& e) {
    err << "no route: " << e.what() << "\n";
    code = kExitInfeasible;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    code = kExitInternal;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "input error: " << e.what() << "\n";
    code = kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    code = kExitInternal;
  }
  try {
    output.write_manifest();
  } catch (const std::exception& e) {
    err << "cannot write manifest: " << e.what() << "\n";
    if (code == kExitOk) code = kExitInput;
  }
  return code;
}

}  // namespace amod
