#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace regio {

// Coarse to fine. The numeric value is the depth below the country root.
enum class SpatialLevel : int { NUTS0 = 0, NUTS1 = 1, NUTS2 = 2, NUTS3 = 3, LAU = 4 };

inline constexpr std::array<SpatialLevel, 5> kAllLevels{SpatialLevel::NUTS0, SpatialLevel::NUTS1,
                                                         SpatialLevel::NUTS2, SpatialLevel::NUTS3,
                                                         SpatialLevel::LAU};

// True when `a` is strictly finer (deeper) than `b`.
constexpr bool finer_than(SpatialLevel a, SpatialLevel b) {
  return static_cast<int>(a) > static_cast<int>(b);
}
constexpr bool coarser_than(SpatialLevel a, SpatialLevel b) { return finer_than(b, a); }

std::string_view to_string(SpatialLevel level);
// Throws Error(UnknownLevel).
SpatialLevel parse_level(std::string_view token);

struct RegionNode {
  std::string code;
  SpatialLevel level = SpatialLevel::NUTS0;
  std::optional<std::string> parent;
  std::string country;
};

// Immutable forest of NUTS0 roots down to LAU leaves. Every non-root node has a
// parent exactly one level coarser, so the structure is a strict tree per country.
class RegionHierarchy {
 public:
  RegionHierarchy() = default;

  // Validates and builds. `lines` optionally carries a source line per node for diagnostics.
  static RegionHierarchy build(std::vector<RegionNode> nodes,
                               const std::vector<std::size_t>& lines = {});

  bool contains(std::string_view code) const;
  const RegionNode& node(std::string_view code) const;  // throws UnknownRegion
  std::size_t size() const { return nodes_.size(); }

  // Direct children, sorted.
  const std::vector<std::string>& children(std::string_view code) const;

  // All regions at `target` under `code` (inclusive when target == level(code)), sorted.
  std::vector<std::string> descendants(std::string_view code, SpatialLevel target) const;

  // The unique ancestor of `code` at `target` (self when target == level(code)).
  const std::string& ancestor(std::string_view code, SpatialLevel target) const;

  // All regions at `level`, optionally restricted to one country, sorted.
  std::vector<std::string> regions_at(SpatialLevel level,
                                      std::optional<std::string_view> country = std::nullopt) const;

  std::vector<std::string> countries() const;

  // Nodes in code order.
  std::vector<RegionNode> nodes() const;

 private:
  std::map<std::string, RegionNode, std::less<>> nodes_;
  std::map<std::string, std::vector<std::string>, std::less<>> children_;
};

// Reads a `code,level,parent,country` CSV.
RegionHierarchy load_hierarchy(const std::filesystem::path& path);

}  // namespace regio
