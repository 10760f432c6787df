#include "manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>
#include <regex>
#include <stdexcept>

#include "apidrift/version.hpp"

namespace apidrift::cli {

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

void Sha256::CtxFree::operator()(void* ctx) const noexcept { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx)); }

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_.get()), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 init failed");
}

void Sha256::update(std::string_view bytes) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_.get()), bytes.data(), bytes.size());
}

std::string Sha256::hex() {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_.get()), digest, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

RunManifest::RunManifest(std::string command) {
  doc_ = {{"schema", "apidrift.manifest/1"},
          {"tool", "apidrift"},
          {"version", kVersion},
          {"command", std::move(command)},
          {"config_hash", nullptr},
          {"master_seed", nullptr},
          {"inputs", nlohmann::json::array()},
          {"outputs", nlohmann::json::array()},
          {"parameters", nlohmann::json::object()},
          {"started_at", utc_now()}};
}

void RunManifest::set_config(const nlohmann::json& effective_config) {
  doc_["config_hash"] = "sha256:" + sha256_hex(effective_config.dump());
  doc_["parameters"] = effective_config;
}

void RunManifest::set_seed(std::uint64_t seed) { doc_["master_seed"] = seed; }

void RunManifest::add_input(const std::filesystem::path& path) {
  doc_["inputs"].push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
}

void RunManifest::add_stream_input(const std::string& name, const std::string& sha256) {
  doc_["inputs"].push_back({{"path", name}, {"sha256", sha256}});
}

void RunManifest::add_output(const std::filesystem::path& path) { doc_["outputs"].push_back(path.generic_string()); }

void RunManifest::set(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }

void RunManifest::write(const std::filesystem::path& dir) {
  auto& outputs = doc_["outputs"];
  std::vector<std::string> names = outputs.get<std::vector<std::string>>();
  std::sort(names.begin(), names.end());
  outputs = names;
  doc_["finished_at"] = utc_now();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  out << doc_.dump(2) << '\n';
}

std::vector<std::string> validate_manifest(const nlohmann::json& m) {
  std::vector<std::string> problems;
  auto need = [&](const char* key, auto pred, const char* what) {
    if (!m.contains(key)) {
      problems.push_back(std::string("missing '") + key + "'");
    } else if (!pred(m.at(key))) {
      problems.push_back(std::string("'") + key + "' must be " + what);
    }
  };
  if (!m.is_object()) return {"manifest is not an object"};
  const std::regex timestamp(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)");
  const std::regex hash(R"(sha256:[0-9a-f]{64})");
  const std::regex hex(R"([0-9a-f]{64})");
  auto is_string = [](const nlohmann::json& v) { return v.is_string(); };
  auto is_time = [&](const nlohmann::json& v) { return v.is_string() && std::regex_match(v.get<std::string>(), timestamp); };

  need("schema", [](const nlohmann::json& v) { return v == "apidrift.manifest/1"; }, "\"apidrift.manifest/1\"");
  need("tool", is_string, "a string");
  need("version", is_string, "a string");
  need("command", [](const nlohmann::json& v) {
    return v == "baseline" || v == "monitor" || v == "simulate" || v == "attribute";
  }, "a known command");
  need("config_hash", [&](const nlohmann::json& v) {
    return v.is_null() || (v.is_string() && std::regex_match(v.get<std::string>(), hash));
  }, "null or sha256:<64 hex>");
  need("master_seed", [](const nlohmann::json& v) { return v.is_null() || v.is_number_unsigned(); },
       "null or a non-negative integer");
  need("inputs", [&](const nlohmann::json& v) {
    if (!v.is_array()) return false;
    return std::all_of(v.begin(), v.end(), [&](const nlohmann::json& e) {
      return e.is_object() && e.contains("path") && e["path"].is_string() && e.contains("sha256") &&
             e["sha256"].is_string() && std::regex_match(e["sha256"].get<std::string>(), hex);
    });
  }, "an array of {path, sha256}");
  need("outputs", [](const nlohmann::json& v) {
    return v.is_array() && std::all_of(v.begin(), v.end(), [](const nlohmann::json& e) { return e.is_string(); });
  }, "an array of strings");
  need("parameters", [](const nlohmann::json& v) { return v.is_object(); }, "an object");
  need("started_at", is_time, "an ISO-8601 UTC timestamp");
  need("finished_at", is_time, "an ISO-8601 UTC timestamp");
  return problems;
}

}  // namespace apidrift::cli
