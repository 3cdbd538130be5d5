#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "ksentcli/runner.hpp"

// Named bench presets bundling the reference experiments and analytic
// fixtures, with expected values and tolerances baked into a
// machine-readable expectations file (expectations.json).

namespace ksentcli {

namespace {

using nlohmann::json;

struct Expectation {
  std::string metric;          // key into the run results (dot-free)
  std::string kind;            // "rel" | "abs" | "bound" (|actual| <= tolerance)
  double expected = 0.0;
  double tolerance = 0.0;
};

struct Preset {
  std::string name;
  std::string engine;
  std::map<std::string, std::string> keys;  // applied as overrides
  std::vector<Expectation> expectations;
};

const std::vector<Preset>& preset_table() {
  static const std::vector<Preset> presets = {
      {"example1",
       "continuous",
       {{"model", "quartic3"}, {"t_max", "1e4"}, {"dt", "1e-3"}, {"energy", "1"},
        {"sample_every", "10"}},
       {{"k_window", "rel", 0.6126, 0.05}}},
      {"example2",
       "kicked",
       {{"model", "kicked-quartic"}, {"T", "1e-10"}, {"n_steps", "1e7"}, {"ic", "saddle"},
        {"sample_every", "10000"}},
       {{"k", "rel", 1.5e5, 0.10}}},
      {"inverted-1d",
       "continuous",
       {{"model", "inverted-1d"}, {"t_max", "100"}, {"dt", "1e-3"}, {"q0", "0"}, {"p0", "0"},
        {"sample_every", "1"}},
       {{"k_window", "abs", 1.0, 1e-3}}},
      {"harmonic",
       "continuous",
       {{"model", "quadratic"}, {"omega", "2"}, {"t_max", "1e3"}, {"dt", "1e-3"}, {"q0", "1"},
        {"p0", "0"}, {"sample_every", "1"}},
       {{"k", "bound", 0.0, 1e-3}}},
      {"golden-kicked",
       "kicked",
       {{"model", "rotor"}, {"kick_strength", "1"}, {"T", "1"}, {"n_steps", "1000"},
        {"q0", "0"}, {"p0", "0"}, {"sample_every", "1"}},
       {{"k_window", "abs", 0.9624236501192069, 1e-6}}},
      {"rotor-quantum",
       "rotor-quantum",
       {{"K", "5"}, {"hbar", "1"}, {"grid", "2048"}, {"n_periods", "1000"}, {"mb_orbits", "1"},
        {"entropy_every", "10"}},
       {{"k_mb_max_abs", "bound", 0.0, 0.01}}},
  };
  return presets;
}

/// Pulls the metric out of the engine results; k_mb_max_abs aggregates
/// over the per-orbit estimates of a rotor-quantum run.
bool metric_value(const json& results, const std::string& metric, double& value) {
  if (metric == "k_mb_max_abs") {
    if (!results.contains("orbits")) return false;
    double worst = 0.0;
    bool any = false;
    for (const auto& o : results["orbits"]) {
      if (!o.contains("k_mb")) continue;
      worst = std::max(worst, std::abs(o["k_mb"].get<double>()));
      any = true;
    }
    value = worst;
    return any;
  }
  if (!results.contains(metric) || !results[metric].is_number()) return false;
  value = results[metric].get<double>();
  return true;
}

}  // namespace

std::vector<std::string> bench_presets() {
  std::vector<std::string> names;
  for (const auto& p : preset_table()) names.push_back(p.name);
  return names;
}

RunOutcome run_bench(const RunConfig& cfg) {
  RunOutcome out;
  const Preset* preset = nullptr;
  for (const auto& p : preset_table())
    if (p.name == cfg.preset) preset = &p;
  if (!preset) {
    std::fprintf(stderr, "unknown bench preset '%s' (known:", cfg.preset.c_str());
    for (const auto& p : preset_table()) std::fprintf(stderr, " %s", p.name.c_str());
    std::fprintf(stderr, ")\n");
    out.exit_code = 2;
    return out;
  }

  // materialize the preset as a run config for its engine
  std::vector<std::pair<std::string, std::string>> overrides(preset->keys.begin(),
                                                             preset->keys.end());
  overrides.emplace_back("out", cfg.out);
  overrides.emplace_back("seed", std::to_string(cfg.seed));
  if (cfg.quiet) overrides.emplace_back("quiet", "1");
  ParseResult parsed = parse_config("", preset->engine, overrides);
  if (!parsed.ok()) {
    std::fprintf(stderr, "%s", format_errors(parsed.errors).c_str());
    out.exit_code = 2;
    return out;
  }

  RunOutcome run;
  if (preset->engine == "continuous") run = run_continuous(parsed.config);
  else if (preset->engine == "kicked") run = run_kicked(parsed.config);
  else if (preset->engine == "oracle") run = run_oracle(parsed.config);
  else run = run_rotor_quantum(parsed.config);

  json checks = json::array();
  bool all_pass = true;
  for (const auto& e : preset->expectations) {
    json c;
    c["preset"] = preset->name;
    c["metric"] = e.metric;
    c["kind"] = e.kind;
    c["expected"] = e.expected;
    c["tolerance"] = e.tolerance;
    double actual = 0.0;
    bool pass = false;
    if (metric_value(run.results, e.metric, actual)) {
      c["actual"] = actual;
      if (e.kind == "rel")
        pass = std::abs(actual - e.expected) <= e.tolerance * std::abs(e.expected);
      else if (e.kind == "abs")
        pass = std::abs(actual - e.expected) <= e.tolerance;
      else
        pass = std::abs(actual) <= e.tolerance;
    } else {
      c["actual"] = nullptr;
    }
    c["pass"] = pass;
    all_pass = all_pass && pass;
    if (!cfg.quiet) {
      const std::string shown = c["actual"].is_null() ? "unavailable" : c["actual"].dump();
      std::printf("[%s] %s %s: %s\n", pass ? "PASS" : "FAIL", preset->name.c_str(),
                  e.metric.c_str(), shown.c_str());
    }
    checks.push_back(std::move(c));
  }

  std::ofstream exf(std::filesystem::path(cfg.out) / "expectations.json");
  exf << checks.dump(2) << "\n";

  out.results = run.results;
  out.results["expectations"] = std::move(checks);
  out.exit_code = run.exit_code != 0 ? run.exit_code : (all_pass ? 0 : 3);
  return out;
}

}  // namespace ksentcli
