#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "coinfer_cli/scenarios.hpp"

#ifndef COINFER_DEFAULT_DATA_DIR
#define COINFER_DEFAULT_DATA_DIR "data"
#endif

namespace coinfer::cli {

namespace fs = std::filesystem;

std::string resolve_data_dir(const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("COINFER_DATA_DIR"); env && *env) return env;
  return COINFER_DEFAULT_DATA_DIR;
}

std::string sha256_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (f) {
    f.read(buf, sizeof buf);
    if (f.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::vector<ScenarioInfo> scenarios(const std::string& data_dir) {
  std::vector<ScenarioInfo> out;
  register_chain_scenarios(out);
  register_grid_scenarios(out, resolve_data_dir(data_dir));
  return out;
}

const ScenarioInfo& find_scenario(const std::vector<ScenarioInfo>& all, const std::string& name) {
  for (const auto& s : all)
    if (s.name == name) return s;
  std::string msg = "unknown scenario '" + name + "'; valid:";
  for (const auto& s : all) msg += " " + s.name;
  fail(ErrorKind::UnknownScenario, msg);
}

namespace {

void check_keys(const json& defaults, const json& given, const std::string& path) {
  if (!given.is_object()) fail(ErrorKind::ConfigInvalid, "params" + path + " must be an object");
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!defaults.contains(it.key())) fail(ErrorKind::ConfigInvalid, "unknown parameter '" + path + it.key() + "'");
    const auto& d = defaults[it.key()];
    const auto& g = it.value();
    if (d.is_object()) {
      check_keys(d, g, path + it.key() + ".");
    } else if (d.is_number() != g.is_number() || d.is_string() != g.is_string() ||
               d.is_boolean() != g.is_boolean() || d.is_array() != g.is_array()) {
      fail(ErrorKind::ConfigInvalid, "parameter '" + path + it.key() + "' has the wrong type");
    }
  }
}

}  // namespace

json effective_params(const ScenarioInfo& info, const RunConfig& cfg) {
  check_keys(info.defaults, cfg.params, "");
  json p = info.defaults;
  p.merge_patch(cfg.params);
  if (cfg.seed) p["seed"] = *cfg.seed;
  if (cfg.replicates) {
    if (*cfg.replicates < 1) fail(ErrorKind::ConfigInvalid, "replicates must be >= 1");
    p["replicates"] = *cfg.replicates;
  }
  return p;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot read config " + path);
  json j;
  try {
    j = json::parse(f, nullptr, true, true);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigInvalid, path + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::ConfigInvalid, path + ": top level must be an object");
  RunConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k == "scenario") cfg.scenario = it->get<std::string>();
    else if (k == "params") cfg.params = *it;
    else if (k == "seed") cfg.seed = it->get<std::uint64_t>();
    else if (k == "replicates") cfg.replicates = it->get<int>();
    else if (k == "threads") cfg.threads = it->get<int>();
    else if (k == "description") continue;
    else fail(ErrorKind::ConfigInvalid, path + ": unknown key '" + k + "'");
  }
  return cfg;
}

json validate_config(const RunConfig& cfg) {
  const auto all = scenarios(cfg.data_dir);
  const auto& info = find_scenario(all, cfg.scenario);
  if (cfg.threads < 1) fail(ErrorKind::ConfigInvalid, "threads must be >= 1");
  return effective_params(info, cfg);
}

ExperimentReport run_scenario(const RunConfig& cfg) {
  const auto all = scenarios(cfg.data_dir);
  const auto& info = find_scenario(all, cfg.scenario);
  if (cfg.threads < 1) fail(ErrorKind::ConfigInvalid, "threads must be >= 1");
  const json params = effective_params(info, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  try {
    rep = info.run(cfg, params);
  } catch (const Error& e) {
    fail(e.kind(), cfg.scenario + ": " + e.what());
  }
  rep.scenario = cfg.scenario;
  rep.config = params;
  rep.config["threads"] = cfg.threads;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!cfg.keep_trajectories) rep.trajectories.clear();
  return rep;
}

void write_csv(const std::string& path, const Trajectory& t) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot write " + path);
  for (std::size_t c = 0; c < t.columns.size(); ++c) f << (c ? "," : "") << t.columns[c];
  f << '\n';
  f << std::setprecision(17);
  for (Eigen::Index r = 0; r < t.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.data.cols(); ++c) f << (c ? "," : "") << t.data(r, c);
    f << '\n';
  }
  if (!f) fail(ErrorKind::IoError, "write failed for " + path);
}

Trajectory read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot read " + path);
  Trajectory t;
  t.name = fs::path(path).stem().string();
  std::string line;
  if (!std::getline(f, line)) fail(ErrorKind::ParseError, path + ": empty file");
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) t.columns.push_back(col);
  }
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::ParseError, path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != t.columns.size()) fail(ErrorKind::ParseError, path + ":" + std::to_string(lineno) + ": width");
    rows.push_back(std::move(row));
  }
  t.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.data(r, c) = rows[r][c];
  return t;
}

std::vector<std::string> emit_reports(const ExperimentReport& report, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create " + dir + ": " + ec.message());
  std::vector<std::string> files;
  json traj = json::array();
  for (const auto& t : report.trajectories) {
    const std::string name = t.name + ".csv";
    write_csv((fs::path(dir) / name).string(), t);
    traj.push_back(name);
    files.push_back((fs::path(dir) / name).string());
  }
  json extra = json::array();
  for (const auto& [name, text] : report.files) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream f(path);
    if (!f) fail(ErrorKind::IoError, "cannot write " + path);
    f << text;
    extra.push_back(name);
    files.push_back(path);
  }
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["tool"] = "coinfer";
  j["tool_version"] = kToolVersion;
  j["scenario"] = report.scenario;
  j["config"] = report.config;
  j["results"] = report.results;
  j["hashes"] = report.hashes;
  j["trajectories"] = traj;
  j["files"] = extra;
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&tt), "%Y-%m-%dT%H:%M:%SZ");
  j["metadata"] = {{"generated_at", ts.str()}, {"wall_seconds", report.seconds}};
  const std::string path = (fs::path(dir) / "report.json").string();
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot write " + path);
  f << j.dump(2) << '\n';
  files.push_back(path);
  return files;
}

std::vector<std::uint64_t> replicate_seeds(const json& params) {
  const auto seed = params.at("seed").get<std::uint64_t>();
  const int n = params.at("replicates").get<int>();
  std::vector<std::uint64_t> out;
  for (int r = 0; r < n; ++r) out.push_back(seed + static_cast<std::uint64_t>(r));
  return out;
}

json metric_json(const MetricReport& m) {
  json j;
  j["rmse"] = m.rmse;
  if (!m.nrmse.empty()) j["nrmse"] = m.nrmse;
  if (!m.nrmse_fallback.empty()) j["nrmse_fallback"] = m.nrmse_fallback;
  if (!m.coverage.empty()) j["coverage"] = m.coverage;
  if (m.has_nll) j["nll"] = m.nll;
  j["seconds"] = m.seconds;
  return j;
}

Trajectory make_trajectory(const std::string& name, const std::vector<double>& t,
                           const std::vector<std::pair<std::string, Vector>>& cols) {
  Trajectory tr;
  tr.name = name;
  tr.columns.push_back("t");
  const auto n = static_cast<Eigen::Index>(t.size());
  tr.data.resize(n, static_cast<Eigen::Index>(cols.size() + 1));
  for (Eigen::Index r = 0; r < n; ++r) tr.data(r, 0) = t[static_cast<std::size_t>(r)];
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].second.size() != n) fail(ErrorKind::LengthMismatch, "trajectory column " + cols[c].first);
    tr.columns.push_back(cols[c].first);
    tr.data.col(static_cast<Eigen::Index>(c + 1)) = cols[c].second;
  }
  return tr;
}

}  // namespace coinfer::cli
