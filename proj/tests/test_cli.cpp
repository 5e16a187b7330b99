#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "amod/canonical_json.hpp"
#include "amod/cli.hpp"
#include "amod/io.hpp"

using namespace amod;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) {
    dir = fs::temp_directory_path() / ("amod_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string path(const std::string& file) const { return (dir / file).string(); }

  int run(std::vector<std::string> args, std::string* err_text = nullptr) const {
    args.insert(args.begin(), {"--out", dir.string()});
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
  }
  Json json(const std::string& file) const { return parse_json(read_file(path(file)), file); }
};

}  // namespace

TEST_CASE("grid generation and symmetry check") {
  Workspace ws("symmetry");
  REQUIRE(ws.run({"make-grid", "--width", "3", "--height", "3"}) == kExitOk);
  CHECK(ws.run({"check-symmetry", ws.path("graph.json")}) == kExitOk);
  const Json sym = ws.json("symmetry.json");
  CHECK(sym["symmetric"] == true);
  CHECK(sym["nodes"] == 9);
  const Json manifest = ws.json("manifest.json");
  CHECK(manifest["subcommand"] == "check-symmetry");
  CHECK(manifest["outputs"][0] == "symmetry.json");
  CHECK(manifest.contains("timestamp"));
  CHECK(manifest.contains("version"));
}

TEST_CASE("infeasible routing reports a violated cut") {
  Workspace ws("crrp");
  REQUIRE(ws.run({"make-grid", "--width", "3", "--height", "3"}) == kExitOk);
  write_file(ws.path("req.json"), R"({"requests":[{"origin":"0_0","dest":"2_2","rate":5}]})");
  CHECK(ws.run({"solve-crrp", ws.path("graph.json"), "--requests", ws.path("req.json")}) == kExitInfeasible);
  Json res = ws.json("crrp.json");
  CHECK(res["status"] == "infeasible");
  REQUIRE(res.contains("witness"));
  CHECK(res["witness"]["demand"].get<double>() > res["witness"]["capacity"].get<double>());

  // The relaxed problem always solves.
  CHECK(ws.run({"solve-crrp", ws.path("graph.json"), "--requests", ws.path("req.json"), "--relax"}) == kExitOk);
  res = ws.json("crrp.json");
  CHECK(res["status"] == "optimal");

  write_file(ws.path("ok.json"), R"({"requests":[{"origin":"0_0","dest":"2_2","rate":0.5}]})");
  CHECK(ws.run({"solve-crrp", ws.path("graph.json"), "--requests", ws.path("ok.json")}) == kExitOk);
}

TEST_CASE("bad input exits with the input code") {
  Workspace ws("errors");
  std::string err;
  CHECK(ws.run({"check-symmetry", "--no-such-flag", "x.json"}, &err) == kExitInput);
  CHECK_FALSE(err.empty());
  CHECK(ws.run({}, &err) == kExitInput);
  CHECK(ws.run({"check-symmetry", ws.path("missing.json")}, &err) == kExitInput);
  write_file(ws.path("broken.json"), "{\"nodes\": [");
  CHECK(ws.run({"check-symmetry", ws.path("broken.json")}, &err) == kExitInput);
  REQUIRE(ws.run({"make-grid", "--width", "2", "--height", "2"}) == kExitOk);
  CHECK(ws.run({"simulate", ws.path("graph.json"), "--trips", ws.path("graph.json"), "--rebalancer", "teleport"}) ==
        kExitInput);
}

TEST_CASE("route exits nonzero without a path") {
  Workspace ws("route");
  write_file(ws.path("g.json"), R"({"nodes":[{"id":"a"},{"id":"b"}],
    "edges":[{"from":"a","to":"b","capacity":1,"free_flow_time":4}]})");
  CHECK(ws.run({"route", ws.path("g.json"), "--from", "a", "--to", "b"}) == kExitOk);
  CHECK(ws.json("route.json")["time"] == 4.0);
  CHECK(ws.run({"route", ws.path("g.json"), "--from", "b", "--to", "a"}) == kExitInfeasible);
}

TEST_CASE("simulate output is byte identical across runs") {
  Workspace ws("simulate");
  REQUIRE(ws.run({"make-grid", "--width", "4", "--height", "4"}) == kExitOk);
  REQUIRE(ws.run({"make-trips", ws.path("graph.json"), "--count", "60", "--duration", "900", "--imbalance", "0.5"}) ==
          kExitOk);
  const std::vector<std::string> args = {"simulate", ws.path("graph.json"), "--trips", ws.path("trips.csv"),
                                         "--fleet", "8", "--seed", "3", "--regions", "4", "--trace"};
  REQUIRE(ws.run(args) == kExitOk);
  const std::string first = read_file(ws.path("metrics.json"));
  const std::string trace = read_file(ws.path("trace.csv"));
  REQUIRE(ws.run(args) == kExitOk);
  CHECK(read_file(ws.path("metrics.json")) == first);
  CHECK(read_file(ws.path("trace.csv")) == trace);
  const Json m = parse_json(first, "metrics");
  CHECK(m["customers"] == 60);
}
