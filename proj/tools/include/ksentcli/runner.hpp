#pragma once

// Engine dispatch: executes a validated RunConfig, writes CSV series and
// the JSON manifest into the output directory, and returns the process
// exit code (0 success, 3 diagnostic failure with partial results).

#include <json.hpp>

#include "ksentcli/config.hpp"

namespace ksentcli {

struct RunOutcome {
  int exit_code = 0;
  nlohmann::json results;
};

RunOutcome run_continuous(const RunConfig& cfg);
RunOutcome run_kicked(const RunConfig& cfg);
RunOutcome run_rotor_quantum(const RunConfig& cfg);
RunOutcome run_oracle(const RunConfig& cfg);
RunOutcome run_bench(const RunConfig& cfg);

/// Full dispatch on cfg.engine.
int dispatch(const RunConfig& cfg);

/// Names of the built-in bench presets.
std::vector<std::string> bench_presets();

}  // namespace ksentcli
