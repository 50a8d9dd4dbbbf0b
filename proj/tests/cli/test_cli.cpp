#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qml_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

struct Run {
  int code;
  json report;
  std::string err;
};

Run invoke(const std::string& cmd, const fs::path& config, const fs::path& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"qml", cmd, "--config", config.string(), "--out", out.string()};
  args.insert(args.end(), extra.begin(), extra.end());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  Run r{qml::cli::run_cli(static_cast<int>(argv.size()), argv.data(), o, e), json(), e.str()};
  const fs::path rep = out / (cmd + "_report.json");
  if (fs::exists(rep)) r.report = json::parse(std::ifstream(rep));
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every file in the directory; the report with its timestamp blanked.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name == "config.json") continue;
    std::string body = slurp(e.path());
    if (name.size() > 12 && name.substr(name.size() - 12) == "_report.json") {
      json j = json::parse(body);
      j["timestamp"] = "";
      body = j.dump(2);
    }
    out[name] = body;
  }
  return out;
}

const char* kCheck = R"({"dimension": 2, "symbol": "model-fold", "hypersurface": "x2",
  "region": {"x": [-0.5, 0.5], "xi": [-0.6, 0.6], "samples": 4, "random_seeds": 20}})";
const char* kFlow = R"({"symbol": "model-fold", "hypersurface": "x2", "base_point": {"x": [0, 0], "xi": [0, 0]},
  "flow": {"span": [-1, 1], "samples": 21}})";
const char* kFold = R"({"symbol": "model-fold", "hypersurface": "x2", "base_point": {"x": [0, 0], "xi": [0, 0]}})";
const char* kTable = R"({"table": {"n": [2, 3], "p": [2, 4, "inf"]}})";
const char* kOpnorm = R"({"opnorm": {"mode": "lambda", "phase": "bilinear", "support": 0.5,
  "ladder": {"powers_of_two": [6, 9]}}})";
const char* kQuasi = R"({"symbol": "model-fold", "quasimode": {"ladder": {"powers_of_two": [-5, -8]}, "p": [2, "inf"]}})";

}  // namespace

TEST_CASE("passing runs exit 0 and write reports") {
  const std::vector<std::pair<std::string, const char*>> cases{
      {"check", kCheck}, {"flow", kFlow}, {"fold", kFold}, {"table", kTable}, {"opnorm", kOpnorm}, {"quasimode", kQuasi}};
  for (const auto& [cmd, text] : cases) {
    CAPTURE(cmd);
    const fs::path dir = scratch("pass_" + cmd);
    const Run r = invoke(cmd, write_config(dir, text), dir);
    CHECK(r.code == 0);
    REQUIRE(r.report.is_object());
    CHECK(r.report["command"] == cmd);
    CHECK(r.report["status"] == "pass");
    CHECK(r.report["reason"] == "ok");
    CHECK(r.report["exit_code"] == 0);
    CHECK(r.report["timestamp"].get<std::string>().size() == 20);
    CHECK(!r.report.contains("jobs"));
    for (const auto& a : r.report["artifacts"]) CHECK(fs::exists(dir / a.get<std::string>()));
  }
}

TEST_CASE("table artifact matches exponents") {
  const fs::path dir = scratch("table");
  REQUIRE(invoke("table", write_config(dir, kTable), dir).code == 0);
  const std::string csv = slurp(dir / "exponents.csv");
  CHECK(csv.rfind("n,p,delta,delta_tilde\n", 0) == 0);
  CHECK(csv.find("2,2,0.25,0.16666666666666666\n") != std::string::npos);
  CHECK(csv.find("2,4,0.25,0.25\n") != std::string::npos);
  CHECK(csv.find("2,inf,0.5,\n") != std::string::npos);
}

TEST_CASE("failed checks exit 1 with a reason") {
  SUBCASE("fold on flat-elliptic") {
    const fs::path dir = scratch("fail_fold");
    const Run r = invoke("fold", write_config(dir, R"({"symbol": "flat-elliptic", "hypersurface": "x2",
      "base_point": {"x": [0, 0], "xi": [1, 0]}, "fold": {"numeric": false}})"), dir);
    CHECK(r.code == 1);
    CHECK(r.report["status"] == "fail");
    CHECK(r.report["reason"] == "pi_right_not_fold");
  }
  SUBCASE("A3 with a non-curved hypersurface") {
    const fs::path dir = scratch("fail_check");
    const Run r = invoke("check", write_config(dir, R"({"symbol": "flat-elliptic", "hypersurface": "x2",
      "region": {"x": [-0.5, 0.5], "xi": [-1.2, 1.2]}})"), dir);
    CHECK(r.code == 1);
    CHECK(r.report["status"] == "fail");
    CHECK(r.report["reason"] == "a3_fail");
    CHECK(!r.report["message"].get<std::string>().empty());
  }
  SUBCASE("opnorm slope far from a forced target") {
    const fs::path dir = scratch("fail_opnorm");
    const Run r = invoke("opnorm", write_config(dir, R"({"opnorm": {"mode": "lambda", "phase": "bilinear",
      "support": 0.5, "ladder": {"powers_of_two": [6, 9]}, "target": -1.0}})"), dir);
    CHECK(r.code == 1);
    CHECK(r.report["reason"] == "fit_out_of_margin");
    CHECK(fs::exists(dir / "opnorm_sweep.csv"));
  }
  SUBCASE("flow drift bound") {
    const fs::path dir = scratch("fail_flow");
    const Run r = invoke("flow", write_config(dir, R"({"symbol": "xi1^2 + xi2^2 + x1^4", "base_point":
      {"x": [1, 0], "xi": [0.3, 1]}, "flow": {"span": [0, 3], "tol": 1e-3, "max_drift": 1e-15}})"), dir);
    CHECK(r.code == 1);
    CHECK(r.report["reason"] == "hamiltonian_drift");
  }
}

TEST_CASE("config errors exit 2 and still write a report") {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"check", "{not json"},
      {"check", "[1, 2]"},
      {"check", R"({"symbol": "model-fold", "hypersurface": "x2", "region": {"x": [-0.5, 0.5], "xi": [-1, 1]}, "bogus": 1})"},
      {"check", R"({"symbol": "xi1 +* x2", "hypersurface": "x2", "region": {"x": [0, 1], "xi": [0, 1]}})"},
      {"check", R"({"symbol": "model-fold", "region": {"x": [0, 1], "xi": [0, 1]}})"},
      {"check", R"({"dimension": 1, "symbol": "model-fold"})"},
      {"check", R"({"symbol": "model-fold", "hypersurface": "x3", "region": {"x": [0, 1], "xi": [0, 1]}})"},
      {"flow", R"({"symbol": "model-fold", "base_point": {"x": [0], "xi": [0, 0]}, "flow": {"span": [0, 1]}})"},
      {"flow", R"({"symbol": "model-fold", "base_point": {"x": [0, 0], "xi": [0, 0]}, "flow": {"span": [1, 1]}})"},
      {"fold", R"({"symbol": "model-fold", "base_point": {"x": [0, 0], "xi": [1, 0]}})"},
      {"table", R"({"table": {"n": [2.5], "p": [2]}})"},
      {"table", R"({"table": {"n": [2], "p": ["two"]}})"},
      {"opnorm", R"({"opnorm": {"mode": "lambda", "phase": "quartic", "ladder": [1, 2, 3, 4]}})"},
      {"opnorm", R"({"opnorm": {"mode": "lambda", "phase": "bilinear", "ladder": [64, 128]}})"},
      {"opnorm", R"({"opnorm": {"mode": "lambda", "phase": "bilinear", "ladder": [64, 128, 256, 512], "points_per_period": 1}})"},
      {"opnorm", R"({"dimension": 3, "symbol": "model-fold", "opnorm": {"mode": "h", "ladder": [0.1, 0.05, 0.02, 0.01]}})"},
      {"quasimode", R"({"symbol": "flat-elliptic", "quasimode": {"ladder": [0.1, 0.05, 0.02, 0.01], "p": [2]}})"},
      {"quasimode", R"({"quasimode": {"ladder": [0.1, 0.05, 0.02, 0.01], "p": [1]}})"},
      {"quasimode", R"({"quasimode": {"ladder": [0.01, 0.005, 0.002, 0.001], "p": [2], "memory_budget": 1000}})"},
  };
  int i = 0;
  for (const auto& [cmd, text] : cases) {
    CAPTURE(text);
    const fs::path dir = scratch("err_" + std::to_string(i++));
    const Run r = invoke(cmd, write_config(dir, text), dir);
    CHECK(r.code == 2);
    REQUIRE(r.report.is_object());
    CHECK(r.report["status"] == "error");
    CHECK(r.report["reason"] == "config_error");
    CHECK(r.report["exit_code"] == 2);
    CHECK(!r.report["message"].get<std::string>().empty());
  }
  SUBCASE("missing config file") {
    const fs::path dir = scratch("err_missing");
    const Run r = invoke("table", dir / "nope.json", dir);
    CHECK(r.code == 2);
    CHECK(r.report["reason"] == "config_error");
  }
}

TEST_CASE("argument errors exit 2") {
  std::ostringstream o, e;
  const char* no_cmd[] = {"qml"};
  CHECK(qml::cli::run_cli(1, no_cmd, o, e) == 2);
  const char* bad_cmd[] = {"qml", "frobnicate", "--config", "x.json"};
  CHECK(qml::cli::run_cli(4, bad_cmd, o, e) == 2);
  const char* no_config[] = {"qml", "table"};
  CHECK(qml::cli::run_cli(2, no_config, o, e) == 2);
  const char* bad_jobs[] = {"qml", "table", "--config", "x.json", "--jobs", "0"};
  CHECK(qml::cli::run_cli(6, bad_jobs, o, e) == 2);
  const char* bad_seed[] = {"qml", "table", "--config", "x.json", "--seed", "-4"};
  CHECK(qml::cli::run_cli(6, bad_seed, o, e) == 2);
  const char* help[] = {"qml", "--help"};
  CHECK(qml::cli::run_cli(2, help, o, e) == 0);
}

TEST_CASE("seed: CLI overrides config") {
  const fs::path dir = scratch("seed");
  const fs::path cfg = write_config(dir, R"({"seed": 11, "table": {"n": [2], "p": [2]}})");
  CHECK(invoke("table", cfg, dir).report["seed"] == 11);
  CHECK(invoke("table", cfg, dir, {"--seed", "18446744073709551615"}).report["seed"] == 18446744073709551615ull);
}

TEST_CASE("output is deterministic apart from the timestamp") {
  const std::vector<std::pair<std::string, const char*>> cases{
      {"check", kCheck}, {"flow", kFlow}, {"fold", kFold}, {"table", kTable}, {"opnorm", kOpnorm}, {"quasimode", kQuasi}};
  for (const auto& [cmd, text] : cases) {
    CAPTURE(cmd);
    const fs::path a = scratch("det_a_" + cmd), b = scratch("det_b_" + cmd), c = scratch("det_c_" + cmd);
    const int ca = invoke(cmd, write_config(a, text), a, {"--seed", "7"}).code;
    const int cb = invoke(cmd, write_config(b, text), b, {"--seed", "7"}).code;
    const int cc = invoke(cmd, write_config(c, text), c, {"--seed", "7", "--jobs", "3"}).code;
    CHECK(ca == cb);
    CHECK(ca == cc);
    const auto sa = snapshot(a);
    CHECK(sa == snapshot(b));
    CHECK(sa == snapshot(c));
  }
}

TEST_CASE("random region samples follow the seed") {
  const fs::path a = scratch("seed_a"), b = scratch("seed_b");
  invoke("check", write_config(a, kCheck), a, {"--seed", "1"});
  invoke("check", write_config(b, kCheck), b, {"--seed", "2"});
  const json ra = json::parse(std::ifstream(a / "check_report.json"));
  const json rb = json::parse(std::ifstream(b / "check_report.json"));
  CHECK(ra["result"]["sample"] != rb["result"]["sample"]);
}
