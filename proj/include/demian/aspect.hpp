#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "demian/error.hpp"

namespace demian {

// The four annotation aspects. Declaration order is the canonical listing
// order and is used for tie-breaking wherever a deterministic order is needed.
enum class AspectKind : std::size_t {
  physical_motion = 0,
  scene_composition = 1,
  arm_pose = 2,
  reasoning = 3,
};

inline constexpr std::size_t kNumAspects = 4;

inline constexpr std::array<AspectKind, kNumAspects> kAllAspects = {
    AspectKind::physical_motion, AspectKind::scene_composition,
    AspectKind::arm_pose, AspectKind::reasoning};

constexpr std::size_t index_of(AspectKind a) { return static_cast<std::size_t>(a); }

constexpr std::string_view to_string(AspectKind a) {
  switch (a) {
    case AspectKind::physical_motion: return "physical_motion";
    case AspectKind::scene_composition: return "scene_composition";
    case AspectKind::arm_pose: return "arm_pose";
    case AspectKind::reasoning: return "reasoning";
  }
  return "?";
}

inline std::optional<AspectKind> try_parse_aspect(std::string_view s) {
  for (AspectKind a : kAllAspects) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

inline AspectKind parse_aspect(std::string_view s) {
  if (auto a = try_parse_aspect(s)) return *a;
  throw ValidationError("unknown aspect '" + std::string(s) + "'");
}

// A set of aspects that always iterates in listing order.
class AspectSet {
 public:
  AspectSet() = default;
  AspectSet(std::initializer_list<AspectKind> aspects) {
    for (AspectKind a : aspects) insert(a);
  }

  static AspectSet all() { return {kAllAspects[0], kAllAspects[1], kAllAspects[2], kAllAspects[3]}; }

  // Accepts "all" or a comma-separated list of aspect names.
  static AspectSet parse(std::string_view csv) {
    if (csv == "all") return all();
    AspectSet set;
    while (!csv.empty()) {
      auto comma = csv.find(',');
      auto item = csv.substr(0, comma);
      while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
      while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
      if (!item.empty()) set.insert(parse_aspect(item));
      if (comma == std::string_view::npos) break;
      csv.remove_prefix(comma + 1);
    }
    return set;
  }

  void insert(AspectKind a) { bits_.set(index_of(a)); }
  void erase(AspectKind a) { bits_.reset(index_of(a)); }
  bool contains(AspectKind a) const { return bits_.test(index_of(a)); }
  bool empty() const { return bits_.none(); }
  std::size_t size() const { return bits_.count(); }

  std::vector<AspectKind> to_vector() const {
    std::vector<AspectKind> out;
    for (AspectKind a : kAllAspects) {
      if (contains(a)) out.push_back(a);
    }
    return out;
  }

  friend bool operator==(const AspectSet&, const AspectSet&) = default;

 private:
  std::bitset<kNumAspects> bits_;
};

}  // namespace demian
