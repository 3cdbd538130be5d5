#include "ksentcli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>
#include <sstream>

namespace ksentcli {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end && *end == '\0' && !s.empty();
}

bool parse_long(const std::string& s, long& out) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);  // accept 1e7 for counts
  if (!end || *end != '\0' || s.empty()) return false;
  if (v != static_cast<double>(static_cast<long>(v))) return false;
  out = static_cast<long>(v);
  return true;
}

bool parse_vec(const std::string& s, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v;
    if (!parse_double(trim(item), v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

struct Ctx {
  RunConfig& cfg;
  std::vector<ConfigError>& errors;
  int line = 0;

  void fail(const std::string& msg) { errors.push_back({line, msg}); }

  void set_double(const std::string& key, const std::string& val, double& dst,
                  bool positive = false, bool nonneg = false) {
    double v;
    if (!parse_double(val, v)) return fail("key '" + key + "': not a number: '" + val + "'");
    if (positive && v <= 0.0) return fail("key '" + key + "': must be positive, got " + val);
    if (nonneg && v < 0.0) return fail("key '" + key + "': must be nonnegative, got " + val);
    dst = v;
  }
  void set_long(const std::string& key, const std::string& val, long& dst, long min_v) {
    long v;
    if (!parse_long(val, v)) return fail("key '" + key + "': not an integer: '" + val + "'");
    if (v < min_v)
      return fail("key '" + key + "': must be >= " + std::to_string(min_v) + ", got " + val);
    dst = v;
  }
  void set_int(const std::string& key, const std::string& val, int& dst, long min_v) {
    long v = dst;
    set_long(key, val, v, min_v);
    dst = static_cast<int>(v);
  }
  void set_bool(const std::string& key, const std::string& val, bool& dst) {
    if (val == "1" || val == "true")
      dst = true;
    else if (val == "0" || val == "false")
      dst = false;
    else
      fail("key '" + key + "': expected 0/1/true/false, got '" + val + "'");
  }
  void set_enum(const std::string& key, const std::string& val, std::string& dst,
                const std::set<std::string>& allowed) {
    if (!allowed.count(val)) {
      std::string opts;
      for (const auto& a : allowed) opts += (opts.empty() ? "" : "|") + a;
      return fail("key '" + key + "': unknown value '" + val + "' (expected " + opts + ")");
    }
    dst = val;
  }
  void set_vec(const std::string& key, const std::string& val, std::vector<double>& dst) {
    if (!parse_vec(val, dst)) fail("key '" + key + "': expected comma-separated numbers");
  }
};

// Applies one key for the chosen engine; returns false on unknown key.
bool apply_key(Ctx& c, const std::string& engine, const std::string& key, const std::string& val) {
  RunConfig& g = c.cfg;
  // common keys
  if (key == "engine") {
    if (val != engine)
      c.fail("key 'engine': config says '" + val + "' but the '" + engine +
             "' subcommand was invoked");
    return true;
  }
  if (key == "out") { g.out = val; return true; }
  if (key == "seed") {
    long v;
    if (!parse_long(val, v) || v < 0) c.fail("key 'seed': not a nonnegative integer: '" + val + "'");
    else g.seed = static_cast<uint64_t>(v);
    return true;
  }
  if (key == "quiet") { c.set_bool(key, val, g.quiet); return true; }

  const bool continuous_like = engine == "continuous" || engine == "oracle";
  if (continuous_like || engine == "kicked") {
    if (key == "model") { g.model = val; return true; }
  }
  if (continuous_like) {
    if (key == "t_max") { c.set_double(key, val, g.t_max, true); return true; }
    if (key == "dt") { c.set_double(key, val, g.dt, true); return true; }
    if (key == "sample_every") { c.set_double(key, val, g.sample_every, false, true); return true; }
    if (key == "omega") { c.set_double(key, val, g.omega, true); return true; }
    if (key == "energy") { c.set_double(key, val, g.energy, true); return true; }
    if (key == "escape_bound") { c.set_double(key, val, g.escape_bound, true); return true; }
    if (key == "q0") { c.set_vec(key, val, g.q0); return true; }
    if (key == "p0") { c.set_vec(key, val, g.p0); return true; }
  }
  if (engine == "continuous") {
    if (key == "switch_threshold") { c.set_double(key, val, g.switch_threshold, true); return true; }
    if (key == "hysteresis") { c.set_double(key, val, g.hysteresis, true); return true; }
  }
  if (engine == "oracle") {
    if (key == "renorm_interval") { c.set_double(key, val, g.renorm_interval, true); return true; }
    if (key == "T") { c.set_double(key, val, g.T, true); return true; }
    if (key == "n_steps") { c.set_long(key, val, g.n_steps, 1); return true; }
    if (key == "kick_strength") { c.set_double(key, val, g.kick_strength); return true; }
    if (key == "ic") { c.set_enum(key, val, g.ic, {"saddle", "scaled"}); return true; }
    if (key == "f_scale") { c.set_double(key, val, g.f_scale, true); return true; }
    if (key == "p_scale") { c.set_double(key, val, g.p_scale, false, true); return true; }
  }
  if (engine == "kicked") {
    if (key == "T") { c.set_double(key, val, g.T, true); return true; }
    if (key == "n_steps") { c.set_long(key, val, g.n_steps, 1); return true; }
    if (key == "sample_every") {
      double v = 0.0;
      c.set_double(key, val, v, false, true);
      g.sample_every = v;
      return true;
    }
    if (key == "kick_strength") { c.set_double(key, val, g.kick_strength); return true; }
    if (key == "ic") { c.set_enum(key, val, g.ic, {"saddle", "scaled"}); return true; }
    if (key == "f_scale") { c.set_double(key, val, g.f_scale, true); return true; }
    if (key == "p_scale") { c.set_double(key, val, g.p_scale, false, true); return true; }
    if (key == "q0") { c.set_vec(key, val, g.q0); return true; }
    if (key == "p0") { c.set_vec(key, val, g.p0); return true; }
    if (key == "escape_bound") { c.set_double(key, val, g.escape_bound, true); return true; }
  }
  if (engine == "rotor-quantum") {
    if (key == "K") { c.set_double(key, val, g.K); return true; }
    if (key == "T") { c.set_double(key, val, g.T, true); return true; }
    if (key == "hbar") { c.set_double(key, val, g.hbar, true); return true; }
    if (key == "grid") { c.set_int(key, val, g.grid, 2); return true; }
    if (key == "substeps") { c.set_int(key, val, g.substeps, 1); return true; }
    if (key == "n_periods") { c.set_long(key, val, g.n_periods, 1); return true; }
    if (key == "mb_orbits") { c.set_int(key, val, g.mb_orbits, 0); return true; }
    if (key == "classical_q0") { c.set_double(key, val, g.classical_q0); return true; }
    if (key == "classical_p0") { c.set_double(key, val, g.classical_p0); return true; }
    if (key == "entropy_every") { c.set_int(key, val, g.entropy_every, 1); return true; }
    if (key == "psi0") { c.set_enum(key, val, g.psi0, {"gaussian", "uniform", "plane"}); return true; }
    if (key == "psi0_center") { c.set_double(key, val, g.psi0_center, false, true); return true; }
    if (key == "psi0_width") { c.set_double(key, val, g.psi0_width, true); return true; }
    if (key == "psi0_wavenumber") { c.set_int(key, val, g.psi0_wavenumber, -1000000); return true; }
    if (key == "rtol") { c.set_double(key, val, g.rtol, true); return true; }
    if (key == "record") { c.set_bool(key, val, g.record); return true; }
  }
  if (engine == "bench") {
    if (key == "preset") { g.preset = val; return true; }
  }
  return false;
}

void check_required(Ctx& c, const std::string& engine) {
  RunConfig& g = c.cfg;
  c.line = 0;
  auto require = [&](bool present, const std::string& key) {
    if (!present) c.fail("missing required key '" + key + "' for engine '" + engine + "'");
  };
  const bool known_model = g.model == "quartic3" || g.model == "quadratic" ||
                           g.model == "inverted-1d" || g.model == "free" ||
                           g.model == "kicked-quartic" || g.model == "rotor";
  if (!g.model.empty() && !known_model) c.fail("key 'model': unknown model '" + g.model + "'");
  if (engine == "continuous" || engine == "oracle") {
    require(!g.model.empty(), "model");
    const bool kicked_model = g.model == "kicked-quartic" || g.model == "rotor";
    if (engine == "oracle" && kicked_model) {
      require(g.T > 0.0, "T");
      require(g.n_steps > 0, "n_steps");
    } else {
      require(g.t_max > 0.0, "t_max");
      require(g.dt > 0.0, "dt");
    }
    if (!g.model.empty() && engine == "continuous" && kicked_model)
      c.fail("key 'model': '" + g.model + "' is a kicked model; use the kicked engine");
  } else if (engine == "kicked") {
    require(!g.model.empty(), "model");
    require(g.T > 0.0, "T");
    require(g.n_steps > 0, "n_steps");
  } else if (engine == "rotor-quantum") {
    require(g.n_periods > 0, "n_periods");
    if (g.T <= 0.0) g.T = 1.0;  // default kick period
    if (g.grid > 0 && (g.grid & (g.grid - 1)) != 0)
      c.fail("key 'grid': must be a power of two, got " + std::to_string(g.grid));
  } else if (engine == "bench") {
    require(!g.preset.empty(), "preset");
  }
  if (!g.q0.empty() != !g.p0.empty())
    c.fail("keys 'q0'/'p0': give both or neither");
  if (!g.q0.empty() && g.q0.size() != g.p0.size())
    c.fail("keys 'q0'/'p0': dimension mismatch");
}

}  // namespace

ParseResult parse_config(const std::string& text, const std::string& engine,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  ParseResult res;
  res.config.engine = engine;
  Ctx ctx{res.config, res.errors};

  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    ctx.line = line_no;
    const size_t hash = raw.find('#');
    std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const size_t eq = s.find('=');
    if (eq == std::string::npos) {
      ctx.fail("expected key=value, got '" + s + "'");
      continue;
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (key.empty()) {
      ctx.fail("empty key");
      continue;
    }
    if (res.config.echo.count(key)) {
      ctx.fail("duplicate key '" + key + "'");
      continue;
    }
    res.config.echo[key] = val;
    if (!apply_key(ctx, engine, key, val))
      ctx.fail("unknown key '" + key + "' for engine '" + engine + "'");
  }

  ctx.line = 0;
  for (const auto& [key, val] : overrides) {
    res.config.echo[key] = val;
    if (!apply_key(ctx, engine, key, val))
      ctx.fail("unknown key '" + key + "' for engine '" + engine + "' (from command line)");
  }

  check_required(ctx, engine);
  return res;
}

std::string format_errors(const std::vector<ConfigError>& errors) {
  std::string out;
  for (const auto& e : errors) {
    if (e.line > 0)
      out += "config line " + std::to_string(e.line) + ": " + e.message + "\n";
    else
      out += "config: " + e.message + "\n";
  }
  return out;
}

}  // namespace ksentcli
