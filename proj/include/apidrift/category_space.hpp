#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace apidrift {

enum class SpaceMode { Single, Pair };

std::string_view to_string(SpaceMode mode);
SpaceMode parse_space_mode(std::string_view text);

/// Printable form of the null element used for parent-less / child-less calls.
inline constexpr std::string_view kNullLabel = "\xE2\x88\x85";  // U+2205

/// One observed call. In pair mode `parent` and `api` are the two positions of
/// the ordered pair and either may be empty (the null element); in single mode
/// `parent` must be empty and `api` set.
struct Observation {
  std::optional<std::string> parent;
  std::optional<std::string> api;

  static Observation single(std::string name) { return {std::nullopt, std::move(name)}; }
  static Observation pair(std::optional<std::string> parent, std::optional<std::string> child) {
    return {std::move(parent), std::move(child)};
  }

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Dense index of a category in [0, K).
using CategoryIndex = std::size_t;

/// The finite category universe. Single mode has one category per API; pair
/// mode has (|A|+1)^2 categories indexed parent * (|A|+1) + child, where the
/// null element takes position index |A|. The (null, null) pair keeps an index
/// but is never produced by encode().
class CategorySpace {
 public:
  static CategorySpace build(std::vector<std::string> api_names, SpaceMode mode);
  static std::shared_ptr<const CategorySpace> make_shared(std::vector<std::string> api_names,
                                                          SpaceMode mode);

  SpaceMode mode() const noexcept { return mode_; }
  const std::vector<std::string>& apis() const noexcept { return apis_; }
  std::size_t size() const noexcept { return size_; }

  /// Number of values a pair position can take, |A| + 1.
  std::size_t positions() const noexcept { return apis_.size() + 1; }
  std::size_t null_position() const noexcept { return apis_.size(); }

  CategoryIndex encode(const Observation& obs) const;
  Observation decode(CategoryIndex index) const;

  /// Position index of an API name, or null_position() for an empty optional.
  std::size_t position_of(const std::optional<std::string>& name) const;
  std::optional<std::size_t> find_api(std::string_view name) const;

  CategoryIndex pair_index(std::size_t parent_pos, std::size_t child_pos) const;
  std::size_t parent_position(CategoryIndex index) const;
  std::size_t child_position(CategoryIndex index) const;
  /// Index of the inadmissible (null, null) pair; pair mode only.
  CategoryIndex null_pair_index() const;
  bool admissible(CategoryIndex index) const;

  /// API name for a position, or the null label.
  std::string position_label(std::size_t pos) const;
  /// "api" in single mode, "(parent,child)" in pair mode.
  std::string label(CategoryIndex index) const;

  friend bool operator==(const CategorySpace& a, const CategorySpace& b) {
    return a.mode_ == b.mode_ && a.apis_ == b.apis_;
  }

 private:
  CategorySpace(std::vector<std::string> apis, SpaceMode mode);

  void check_index(CategoryIndex index) const;

  SpaceMode mode_;
  std::vector<std::string> apis_;
  std::unordered_map<std::string, std::size_t> position_;
  std::size_t size_;
};

using SpacePtr = std::shared_ptr<const CategorySpace>;

nlohmann::json to_json(const CategorySpace& space);
SpacePtr space_from_json(const nlohmann::json& j);

}  // namespace apidrift
