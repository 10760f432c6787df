#include "apidrift/category_space.hpp"

#include <nlohmann/json.hpp>

#include "apidrift/error.hpp"

namespace apidrift {

std::string_view to_string(SpaceMode mode) {
  return mode == SpaceMode::Single ? "single" : "pair";
}

SpaceMode parse_space_mode(std::string_view text) {
  if (text == "single") return SpaceMode::Single;
  if (text == "pair") return SpaceMode::Pair;
  throw ValidationError("unknown space mode '" + std::string(text) + "' (expected single|pair)");
}

CategorySpace::CategorySpace(std::vector<std::string> apis, SpaceMode mode)
    : mode_(mode), apis_(std::move(apis)) {
  if (apis_.empty()) throw ValidationError("category space needs at least one API name");
  position_.reserve(apis_.size());
  for (std::size_t i = 0; i < apis_.size(); ++i) {
    if (apis_[i].empty()) throw ValidationError("empty API name at position " + std::to_string(i));
    if (!position_.emplace(apis_[i], i).second)
      throw ValidationError("duplicate API name '" + apis_[i] + "'");
  }
  size_ = mode_ == SpaceMode::Single ? apis_.size() : positions() * positions();
}

CategorySpace CategorySpace::build(std::vector<std::string> api_names, SpaceMode mode) {
  return CategorySpace(std::move(api_names), mode);
}

SpacePtr CategorySpace::make_shared(std::vector<std::string> api_names, SpaceMode mode) {
  return std::make_shared<const CategorySpace>(build(std::move(api_names), mode));
}

std::optional<std::size_t> CategorySpace::find_api(std::string_view name) const {
  auto it = position_.find(std::string(name));
  if (it == position_.end()) return std::nullopt;
  return it->second;
}

std::size_t CategorySpace::position_of(const std::optional<std::string>& name) const {
  if (!name) return null_position();
  auto pos = find_api(*name);
  if (!pos) throw UnknownCategory(*name);
  return *pos;
}

CategoryIndex CategorySpace::pair_index(std::size_t parent_pos, std::size_t child_pos) const {
  if (mode_ != SpaceMode::Pair) throw ValidationError("pair_index on a single-mode space");
  if (parent_pos >= positions() || child_pos >= positions())
    throw ValidationError("pair position out of range");
  return parent_pos * positions() + child_pos;
}

CategoryIndex CategorySpace::encode(const Observation& obs) const {
  if (mode_ == SpaceMode::Single) {
    if (obs.parent) throw ValidationError("single-mode observation must not carry a parent");
    if (!obs.api) throw ValidationError("single-mode observation has no API name");
    auto pos = find_api(*obs.api);
    if (!pos) throw UnknownCategory(*obs.api);
    return *pos;
  }
  if (!obs.parent && !obs.api) throw ValidationError("the (null, null) pair is not an admissible observation");
  return pair_index(position_of(obs.parent), position_of(obs.api));
}

void CategorySpace::check_index(CategoryIndex index) const {
  if (index >= size_)
    throw ValidationError("category index " + std::to_string(index) + " out of range [0, " +
                          std::to_string(size_) + ")");
}

std::size_t CategorySpace::parent_position(CategoryIndex index) const {
  if (mode_ != SpaceMode::Pair) throw ValidationError("parent position requested on a single-mode space");
  check_index(index);
  return index / positions();
}

std::size_t CategorySpace::child_position(CategoryIndex index) const {
  if (mode_ != SpaceMode::Pair) throw ValidationError("child position requested on a single-mode space");
  check_index(index);
  return index % positions();
}

CategoryIndex CategorySpace::null_pair_index() const {
  return pair_index(null_position(), null_position());
}

bool CategorySpace::admissible(CategoryIndex index) const {
  check_index(index);
  return mode_ == SpaceMode::Single || index != null_pair_index();
}

Observation CategorySpace::decode(CategoryIndex index) const {
  check_index(index);
  if (mode_ == SpaceMode::Single) return Observation::single(apis_[index]);
  if (index == null_pair_index()) throw ValidationError("the (null, null) pair has no observation");
  auto name = [this](std::size_t pos) -> std::optional<std::string> {
    if (pos == null_position()) return std::nullopt;
    return apis_[pos];
  };
  return Observation::pair(name(index / positions()), name(index % positions()));
}

std::string CategorySpace::position_label(std::size_t pos) const {
  if (pos == null_position()) return std::string(kNullLabel);
  if (pos > null_position()) throw ValidationError("position out of range");
  return apis_[pos];
}

std::string CategorySpace::label(CategoryIndex index) const {
  check_index(index);
  if (mode_ == SpaceMode::Single) return apis_[index];
  return "(" + position_label(index / positions()) + "," + position_label(index % positions()) + ")";
}

nlohmann::json to_json(const CategorySpace& space) {
  return {{"mode", to_string(space.mode())}, {"apis", space.apis()}};
}

SpacePtr space_from_json(const nlohmann::json& j) {
  try {
    return CategorySpace::make_shared(j.at("apis").get<std::vector<std::string>>(),
                                      parse_space_mode(j.at("mode").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid category space JSON: ") + e.what());
  }
}

}  // namespace apidrift
