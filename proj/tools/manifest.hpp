#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace apidrift::cli {

std::string sha256_hex(std::string_view bytes);

/// Incremental SHA-256.
class Sha256 {
 public:
  Sha256();
  void update(std::string_view bytes);
  std::string hex();

 private:
  struct CtxFree {
    void operator()(void* ctx) const noexcept;
  };
  std::unique_ptr<void, CtxFree> ctx_;
};
std::string sha256_file(const std::filesystem::path& path);

/// Run manifest written next to every command's outputs. Field layout is
/// published in schemas/manifest.schema.json.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void set_config(const nlohmann::json& effective_config);
  void set_seed(std::uint64_t seed);
  void add_input(const std::filesystem::path& path);
  void add_stream_input(const std::string& name, const std::string& sha256);
  void add_output(const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value);

  /// Stamps the finish time and writes `manifest.json` into `dir`.
  void write(const std::filesystem::path& dir);

  const nlohmann::json& json() const noexcept { return doc_; }

 private:
  nlohmann::json doc_;
};

/// Problems found when checking a manifest against the published schema;
/// empty when valid.
std::vector<std::string> validate_manifest(const nlohmann::json& manifest);

}  // namespace apidrift::cli
