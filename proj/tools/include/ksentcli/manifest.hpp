#pragma once

// JSON run manifest: config echo, code version, wall time, estimates,
// event counts, and a file inventory with SHA-256 checksums. Written even
// on diagnostic failure, with partial results marked.

#include <chrono>
#include <string>
#include <vector>

#include <json.hpp>

#include "ksentcli/config.hpp"

namespace ksentcli {

std::string sha256_file(const std::string& path);

class ManifestBuilder {
 public:
  explicit ManifestBuilder(const RunConfig& cfg);

  /// Engine-specific results block (estimates, event counts, ...).
  void set_results(nlohmann::json results) { results_ = std::move(results); }
  void set_status(bool ok, const std::string& error = "") {
    ok_ = ok;
    error_ = error;
  }
  void add_file(const std::string& name) { files_.push_back(name); }  // relative to out dir

  /// Stamps wall time, checksums the inventory, writes out/manifest.json.
  void write() const;

 private:
  std::string out_dir_;
  nlohmann::json config_echo_;
  nlohmann::json results_;
  std::vector<std::string> files_;
  bool ok_ = true;
  std::string error_;
  std::string engine_;
  uint64_t seed_ = 0;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace ksentcli
