#include "ksentcli/manifest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace ksentcli {

namespace {
constexpr const char* kVersion = "0.1.0";
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256_file: cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i) std::snprintf(&hex[2 * i], 3, "%02x", digest[i]);
  return hex;
}

ManifestBuilder::ManifestBuilder(const RunConfig& cfg)
    : out_dir_(cfg.out),
      engine_(cfg.engine),
      seed_(cfg.seed),
      start_(std::chrono::steady_clock::now()) {
  config_echo_ = nlohmann::json::object();
  for (const auto& [k, v] : cfg.echo) config_echo_[k] = v;
}

void ManifestBuilder::write() const {
  nlohmann::json m;
  m["tool"] = "ksent";
  m["version"] = kVersion;
  m["engine"] = engine_;
  m["seed"] = seed_;
  m["config"] = config_echo_;
  m["status"] = ok_ ? "ok" : "partial";
  if (!error_.empty()) m["error"] = error_;
  m["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  m["results"] = results_.is_null() ? nlohmann::json::object() : results_;

  nlohmann::json files = nlohmann::json::array();
  for (const auto& name : files_) {
    const std::filesystem::path p = std::filesystem::path(out_dir_) / name;
    nlohmann::json f;
    f["name"] = name;
    f["bytes"] = std::filesystem::exists(p) ? std::filesystem::file_size(p) : 0;
    f["sha256"] = std::filesystem::exists(p) ? sha256_file(p.string()) : "";
    files.push_back(std::move(f));
  }
  m["files"] = std::move(files);

  std::ofstream out(std::filesystem::path(out_dir_) / "manifest.json");
  out << m.dump(2) << "\n";
}

}  // namespace ksentcli
