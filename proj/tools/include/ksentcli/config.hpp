#pragma once

// Flat key=value run configuration: '#' comments, one key per line,
// engine-specific schemas. Validation collects every error (with line
// numbers) instead of stopping at the first.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ksentcli {

struct ConfigError {
  int line = 0;  // 0: not tied to a line (missing key, override)
  std::string message;
};

struct RunConfig {
  std::string engine;
  std::string out = "out";
  uint64_t seed = 1;
  bool quiet = false;

  // continuous / oracle
  std::string model;
  double t_max = 0.0;
  double dt = 0.0;
  double sample_every = 1.0;
  double omega = 1.0;
  double energy = 1.0;
  double switch_threshold = 1e3;
  double hysteresis = 10.0;
  double escape_bound = 1e6;
  double renorm_interval = 1.0;
  std::vector<double> q0, p0;  // empty: use the seeded sampler

  // kicked
  double T = 0.0;
  long n_steps = 0;
  double kick_strength = 5.0;
  std::string ic = "saddle";  // saddle | scaled
  double f_scale = 1.0;
  double p_scale = 1.0;

  // rotor-quantum
  double K = 5.0;
  double hbar = 1.0;
  int grid = 2048;
  int substeps = 32;
  long n_periods = 0;
  int mb_orbits = 4;
  double classical_q0 = 0.5;
  double classical_p0 = 0.0;
  int entropy_every = 1;
  std::string psi0 = "gaussian";  // gaussian | uniform | plane
  double psi0_center = 3.14159265358979323846;
  double psi0_width = 0.4;
  int psi0_wavenumber = 1;
  double rtol = 1e-7;
  bool record = false;

  // bench
  std::string preset;

  std::map<std::string, std::string> echo;  // raw key=value as parsed
};

struct ParseResult {
  RunConfig config;
  std::vector<ConfigError> errors;
  bool ok() const { return errors.empty(); }
};

/// Parse and validate `text` for the given engine. `overrides` (from
/// command-line flags) are applied after the file and validated the same
/// way, reported with line 0.
ParseResult parse_config(const std::string& text, const std::string& engine,
                         const std::vector<std::pair<std::string, std::string>>& overrides = {});

std::string format_errors(const std::vector<ConfigError>& errors);

}  // namespace ksentcli
