#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "apidrift/error.hpp"
#include "commands.hpp"

namespace apidrift::cli {

nlohmann::json load_config_document(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }
  toml::table table;
  try {
    table = toml::parse(in, path.string());
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ValidationError(path.string() + ":" + std::to_string(where.line) + ":" + std::to_string(where.column) +
                          ": " + std::string(e.description()));
  }
  // Same document shape as the JSON form.
  std::ostringstream text;
  text << toml::json_formatter{table};
  return nlohmann::json::parse(text.str());
}

}  // namespace apidrift::cli
