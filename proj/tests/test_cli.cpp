#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kSmall = R"({"name": "small", "space": {"window_radius": 512},
  "heat": {"n_max": 32, "t_grid": [1, 2, 4]},
  "montecarlo": {"n_paths": 2000, "exit_r": [4, 8], "gamma_r": [4, 8], "hitting_d": [16, 32, 64],
                 "chi_draws": 10000, "sim_radius": 8192},
  "verify": {"target_radius": 128, "harnack_R": [4, 8], "nash_samples": 20, "tail_r": [4, 8, 16], "diag_n_min": 2}})";

struct Result {
  int code;
  std::string out;
};

fs::path scratch() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / ("lrw_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "small.json") << kSmall;
    return d;
  }();
  return dir;
}

Result lrw(const std::string& args) {
  const char* bin = std::getenv("LRW_CLI");
  REQUIRE(bin != nullptr);
  const auto log = scratch() / "last.log";
  const std::string cmd = std::string(bin) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

std::string small_args(const std::string& out) { return "--config " + (scratch() / "small.json").string() + " --out " + (scratch() / out).string(); }

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (rel == "run.meta.json" || rel == "effective-config.json") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[rel] = ss.str();
  }
  return files;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

TEST_CASE("bad beta is rejected") {
  const auto r = lrw("run audit " + small_args("beta") + " --set phi.beta=2.5");
  CHECK(r.code == 1);
  CHECK(r.out.find("beta") != std::string::npos);
  CHECK(r.out.find("(0,2)") != std::string::npos);
}

TEST_CASE("stages require their inputs") {
  const auto b = lrw("run build " + small_args("deps"));
  CHECK(b.code == 0);
  const auto v = lrw("run verify " + small_args("deps"));
  CHECK(v.code == 1);
  CHECK(v.out.find("missing") != std::string::npos);
  CHECK(v.out.find("heat") != std::string::npos);
}

TEST_CASE("reruns are byte-identical") {
  const auto a = lrw("run all " + small_args("rerun"));
  REQUIRE(a.code == 0);
  CHECK(a.out.find("verify/hkp: PASS") != std::string::npos);
  const auto first = snapshot(scratch() / "rerun");
  CHECK(first.count("reports/summary.json") == 1);
  CHECK(first.count("mc/summary.json") == 1);
  REQUIRE(lrw("run all " + small_args("rerun")).code == 0);
  CHECK(snapshot(scratch() / "rerun") == first);
  // worker count does not change any artifact
  REQUIRE(lrw("run all " + small_args("workers") + " --workers 3").code == 0);
  CHECK(snapshot(scratch() / "workers") == first);
  const auto meta = read_json(scratch() / "rerun" / "run.meta.json");
  CHECK(meta.contains("seconds"));
}

TEST_CASE("--set changes only the named field") {
  REQUIRE(lrw("run audit " + small_args("base")).code == 0);
  REQUIRE(lrw("run audit " + small_args("over") + " --set verify.drift_factor=3").code == 0);
  auto base = read_json(scratch() / "base" / "effective-config.json");
  auto over = read_json(scratch() / "over" / "effective-config.json");
  CHECK(over["verify"]["drift_factor"] == 3.0);
  const auto patch = json::diff(base, over);
  for (const auto& op : patch) {
    const std::string path = op["path"];
    CHECK((path == "/verify/drift_factor" || path == "/output"));
  }
  REQUIRE(lrw("run audit " + small_args("seed") + " --seed 99").code == 0);
  CHECK(read_json(scratch() / "seed" / "effective-config.json")["montecarlo"]["seed"] == 99);

  const auto bad = lrw("run audit " + small_args("bad") + " --set verify.no_such_key=1");
  CHECK(bad.code == 1);
  CHECK(bad.out.find("no_such_key") != std::string::npos);
}

TEST_CASE("presets and missing files") {
  const auto p = lrw("presets");
  CHECK(p.code == 0);
  for (const char* name : {"z1-beta05", "z1-beta1", "z2-beta15", "z1-beta1-log"}) CHECK(p.out.find(name) != std::string::npos);
  CHECK(lrw("run audit --config /nonexistent/x.json").code == 1);
  const auto both = lrw("run audit --preset z1-beta1 --config " + (scratch() / "small.json").string());
  CHECK(both.code == 1);
  CHECK(both.out.find("mutually exclusive") != std::string::npos);
}
