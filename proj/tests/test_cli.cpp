#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coinfer_cli/scenarios.hpp"
#include "helpers.hpp"

using namespace coinfer;
using namespace coinfer::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("coinfer_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunConfig quick(const std::string& scenario) {
  RunConfig cfg;
  cfg.scenario = scenario;
  cfg.data_dir = COINFER_TEST_DATA_DIR;
  return cfg;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("scenario registry") {
    const auto all = scenarios(COINFER_TEST_DATA_DIR);
    for (const char* name : {"chain4-forward", "chain4-inverse-det", "chain4-inverse-prob", "chain4-inverse-learned",
                             "chain6-inverse", "chain6-diffusion", "chain-scaling", "hierarchy-toy",
                             "grid-case9-distributed", "grid-case14-centralized", "grid-scaling"})
      CHECK_NOTHROW(find_scenario(all, name));
    try {
      find_scenario(all, "chain5-nope");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnknownScenario);
      CHECK(std::string(e.what()).find("chain4-forward") != std::string::npos);
    }
  }

  TEST_CASE("config validation") {
    RunConfig cfg = quick("chain4-forward");
    CHECK_NOTHROW(validate_config(cfg));
    cfg.params = {{"no_such_key", 1}};
    CHECK_THROWS_AS(validate_config(cfg), Error);
    cfg.params = {{"dt", "fast"}};
    CHECK_THROWS_AS(validate_config(cfg), Error);
    const fs::path dir = scratch("cfg");
    std::ofstream(dir / "bad.json") << R"({"scenario": "chain4-forward", "colour": 1})";
    CHECK_THROWS_AS(load_run_config((dir / "bad.json").string()), Error);
    std::ofstream(dir / "ok.json") << R"({"scenario": "chain4-forward", "seed": 3, "params": {"horizon": 1.0}})";
    const RunConfig ok = load_run_config((dir / "ok.json").string());
    CHECK(ok.scenario == "chain4-forward");
    CHECK(*ok.seed == 3u);
    CHECK(validate_config(ok)["horizon"] == 1.0);
  }

  TEST_CASE("bundled configs validate") {
    for (const auto& entry : fs::directory_iterator(COINFER_TEST_CONFIG_DIR)) {
      CAPTURE(entry.path().string());
      RunConfig cfg = load_run_config(entry.path().string());
      cfg.data_dir = COINFER_TEST_DATA_DIR;
      CHECK_NOTHROW(validate_config(cfg));
    }
  }

  TEST_CASE("CSV round trip") {
    Trajectory t;
    t.name = "demo";
    t.columns = {"t", "a_true", "a_mean"};
    t.data.resize(4, 3);
    Rng rng(61);
    for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data.data()[i] = rng.normal() * 1e-5;
    const fs::path dir = scratch("csv");
    write_csv((dir / "demo.csv").string(), t);
    const Trajectory back = read_csv((dir / "demo.csv").string());
    CHECK(back.columns == t.columns);
    CHECK(th::max_abs(back.data - t.data) <= 1e-12);
    CHECK(slurp(dir / "demo.csv").rfind("t,a_true,a_mean\n", 0) == 0);
  }

  TEST_CASE("empty report writes JSON only") {
    ExperimentReport rep;
    rep.scenario = "empty";
    const fs::path dir = scratch("empty");
    const auto files = emit_reports(rep, dir.string());
    REQUIRE(files.size() == 1);
    const json j = json::parse(slurp(files[0]));
    CHECK(j["scenario"] == "empty");
    CHECK(j["schema_version"] == kReportSchemaVersion);
    CHECK(j["trajectories"].empty());
  }

  TEST_CASE("data file hashes") {
    CHECK(sha256_file(std::string(COINFER_TEST_DATA_DIR) + "/case9.m") ==
          "3c02c1b1093e13f397291aaa051e71480b3d5241b83b3fe8b6e3b14a4ff4ec20");
  }

  TEST_CASE("fixed seed gives byte-identical outputs") {
    RunConfig cfg = quick("chain4-forward");
    cfg.params = {{"horizon", 0.5}};
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    emit_reports(run_scenario(cfg), a.string());
    emit_reports(run_scenario(cfg), b.string());
    for (const auto& entry : fs::directory_iterator(a)) {
      if (entry.path().extension() != ".csv") continue;
      CAPTURE(entry.path().filename().string());
      CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    }
    const json ja = json::parse(slurp(a / "report.json")), jb = json::parse(slurp(b / "report.json"));
    CHECK(ja["hashes"] == jb["hashes"]);
    CHECK(ja["config"] == jb["config"]);
  }
}
