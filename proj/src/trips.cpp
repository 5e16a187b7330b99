#include "amod/trips.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "amod/error.hpp"
#include "amod/osm.hpp"

namespace amod {

namespace {

constexpr std::size_t kMaxErrors = 10;

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// One CSV record; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (*end != '\0' || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "YYYY-MM-DD HH:MM:SS" (a 'T' separator is also accepted), in seconds.
std::optional<double> parse_datetime(const std::string& s) {
  int y, mo, d, h, mi;
  double sec;
  char sep;
  if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi, &sec) != 7) return std::nullopt;
  if ((sep != ' ' && sep != 'T') || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 ||
      sec < 0 || sec >= 61)
    return std::nullopt;
  const auto days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

// Nearest node within a radius, through a uniform bucket grid.
class Snapper {
 public:
  Snapper(const RoadNetwork& net, double radius) : net_(net), radius_(radius) {
    for (NodeIndex v = 0; v < net.node_count(); ++v) {
      const auto& p = net.position(v);
      if (p) cells_[key(cell(p->x), cell(p->y))].push_back(v);
    }
  }

  std::optional<NodeIndex> snap(Point q) const {
    std::optional<NodeIndex> best;
    double best_d = radius_;
    const auto cx = cell(q.x), cy = cell(q.y);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (auto v : it->second) {
          const auto& p = *net_.position(v);
          const double d = std::hypot(p.x - q.x, p.y - q.y);
          if (d < best_d || (d == best_d && best && v < *best) || (d == best_d && !best)) {
            best_d = d;
            best = v;
          }
        }
      }
    return best;
  }

 private:
  std::int64_t cell(double x) const { return static_cast<std::int64_t>(std::floor(x / radius_)); }
  static std::pair<std::int64_t, std::int64_t> key(std::int64_t a, std::int64_t b) { return {a, b}; }

  const RoadNetwork& net_;
  double radius_;
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<NodeIndex>> cells_;
};

std::optional<std::size_t> column(const std::vector<std::string>& header, std::initializer_list<const char*> names) {
  for (const char* n : names)
    for (std::size_t i = 0; i < header.size(); ++i)
      if (lower(header[i]) == n) return i;
  return std::nullopt;
}

}  // namespace

TripSchema parse_trip_schema(const std::string& name) {
  if (name == "simple") return TripSchema::Simple;
  if (name == "nyc_taxi") return TripSchema::NycTaxi;
  throw InputError("unknown trip schema '" + name + "' (expected simple or nyc_taxi)");
}

TripStream load_trips_csv(std::string_view text, const RoadNetwork& network, const TripLoadOptions& options,
                          TripLoadReport* report) {
  TripLoadReport local;
  TripLoadReport& rep = report ? *report : local;
  rep = TripLoadReport{};
  const auto lines = lines_of(text);
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw InputError("trips CSV is empty");
  const auto header = split_csv(lines[first]);

  auto malformed = [&](std::size_t line_no, const std::string& why) {
    ++rep.malformed;
    if (rep.errors.size() < kMaxErrors) rep.errors.push_back("line " + std::to_string(line_no + 1) + ": " + why);
    if (rep.malformed > options.error_budget)
      throw InputError("trips CSV line " + std::to_string(line_no + 1) + ": " + why + " (error budget " +
                       std::to_string(options.error_budget) + " exceeded)");
  };

  struct Raw {
    double time;
    NodeIndex origin, dest;
  };
  std::vector<Raw> raw;

  if (options.schema == TripSchema::Simple) {
    const auto t = column(header, {"arrival_time_s"});
    const auto o = column(header, {"origin_node"});
    const auto d = column(header, {"dest_node"});
    if (!t || !o || !d) throw InputError("trips CSV header must contain arrival_time_s,origin_node,dest_node");
    const std::size_t need = std::max({*t, *o, *d}) + 1;
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      ++rep.rows;
      const auto f = split_csv(lines[i]);
      if (f.size() < need) {
        malformed(i, "too few fields");
        continue;
      }
      const auto time = to_double(f[*t]);
      if (!time || *time < 0.0) {
        malformed(i, "bad arrival time '" + f[*t] + "'");
        continue;
      }
      const auto from = network.find_node(f[*o]);
      const auto to = network.find_node(f[*d]);
      if (!from || !to) {
        malformed(i, "unknown node '" + (!from ? f[*o] : f[*d]) + "'");
        continue;
      }
      if (*from == *to) {
        ++rep.dropped_same_node;
        continue;
      }
      raw.push_back({*time, *from, *to});
    }
  } else {
    if (!network.geo_origin()) throw InputError("the taxi schema needs a network with a geographic origin");
    if (!(options.snap_radius_m > 0.0)) throw InputError("snap radius must be positive");
    const auto t = column(header, {"tpep_pickup_datetime", "pickup_datetime", "trip_pickup_datetime"});
    const auto plon = column(header, {"pickup_longitude", "start_lon"});
    const auto plat = column(header, {"pickup_latitude", "start_lat"});
    const auto dlon = column(header, {"dropoff_longitude", "end_lon"});
    const auto dlat = column(header, {"dropoff_latitude", "end_lat"});
    if (!t || !plon || !plat || !dlon || !dlat)
      throw InputError(
          "taxi CSV header must contain pickup_datetime, pickup_longitude, pickup_latitude, dropoff_longitude and "
          "dropoff_latitude");
    const std::size_t need = std::max({*t, *plon, *plat, *dlon, *dlat}) + 1;
    const Snapper snapper(network, options.snap_radius_m);
    const GeoOrigin origin = *network.geo_origin();
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      ++rep.rows;
      const auto f = split_csv(lines[i]);
      if (f.size() < need) {
        malformed(i, "too few fields");
        continue;
      }
      const auto time = parse_datetime(f[*t]);
      const auto a_lon = to_double(f[*plon]), a_lat = to_double(f[*plat]);
      const auto b_lon = to_double(f[*dlon]), b_lat = to_double(f[*dlat]);
      if (!time) {
        malformed(i, "bad pickup time '" + f[*t] + "'");
        continue;
      }
      if (!a_lon || !a_lat || !b_lon || !b_lat) {
        malformed(i, "bad coordinate");
        continue;
      }
      const auto from = snapper.snap(project(origin, *a_lat, *a_lon));
      const auto to = snapper.snap(project(origin, *b_lat, *b_lon));
      if (!from || !to) {
        ++rep.dropped_unsnappable;
        continue;
      }
      if (*from == *to) {
        ++rep.dropped_same_node;
        continue;
      }
      raw.push_back({*time, *from, *to});
    }
    // Arrival times count from the earliest pickup in the file.
    double t0 = std::numeric_limits<double>::infinity();
    for (const auto& r : raw) t0 = std::min(t0, r.time);
    for (auto& r : raw) r.time -= t0;
  }

  TripStream out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back({r.time, r.origin, r.dest});
  std::stable_sort(out.begin(), out.end(), [](const Trip& a, const Trip& b) { return a.arrival < b.arrival; });
  rep.loaded = out.size();
  return out;
}

std::string write_trips_csv(const TripStream& trips, const RoadNetwork& network) {
  std::ostringstream os;
  os << "arrival_time_s,origin_node,dest_node\n";
  char buf[40];
  for (const auto& t : trips) {
    std::snprintf(buf, sizeof buf, "%.12g", t.arrival);
    os << buf << ',' << network.node_id(t.origin) << ',' << network.node_id(t.dest) << '\n';
  }
  return os.str();
}

}  // namespace amod
