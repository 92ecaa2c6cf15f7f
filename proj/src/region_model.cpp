#include "regio/region_model.hpp"

#include <algorithm>
#include <set>

#include "regio/csv.hpp"
#include "regio/error.hpp"

namespace regio {

std::string_view to_string(SpatialLevel level) {
  switch (level) {
    case SpatialLevel::NUTS0: return "NUTS0";
    case SpatialLevel::NUTS1: return "NUTS1";
    case SpatialLevel::NUTS2: return "NUTS2";
    case SpatialLevel::NUTS3: return "NUTS3";
    case SpatialLevel::LAU: return "LAU";
  }
  return "?";
}

SpatialLevel parse_level(std::string_view token) {
  for (auto level : kAllLevels) {
    if (to_string(level) == token) return level;
  }
  throw Error(ErrorKind::UnknownLevel, "unknown level token '" + std::string(token) + "'");
}

namespace {

std::string where(const std::vector<std::size_t>& lines, std::size_t i) {
  if (i < lines.size()) return "line " + std::to_string(lines[i]) + ": ";
  return "";
}

const std::vector<std::string> kNoChildren;

}  // namespace

RegionHierarchy RegionHierarchy::build(std::vector<RegionNode> nodes,
                                       const std::vector<std::size_t>& lines) {
  RegionHierarchy h;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& n = nodes[i];
    if (n.code.empty()) throw Error(ErrorKind::MalformedCsv, where(lines, i) + "empty region code");
    if (h.nodes_.contains(n.code)) {
      throw Error(ErrorKind::DuplicateCode, where(lines, i) + "duplicate code '" + n.code + "'");
    }
    h.nodes_.emplace(n.code, n);
  }

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    const auto at = where(lines, i);
    if (n.level == SpatialLevel::NUTS0) {
      if (n.parent) {
        throw Error(ErrorKind::ParentWrongLevel, at + "NUTS0 region '" + n.code + "' has a parent");
      }
      if (n.code != n.country) {
        throw Error(ErrorKind::CountryMismatch,
                    at + "NUTS0 code '" + n.code + "' differs from country '" + n.country + "'");
      }
      continue;
    }
    if (!n.parent) {
      throw Error(ErrorKind::DanglingParent, at + "region '" + n.code + "' has no parent");
    }
    auto it = h.nodes_.find(*n.parent);
    if (it == h.nodes_.end()) {
      throw Error(ErrorKind::DanglingParent,
                  at + "region '" + n.code + "' references unknown parent '" + *n.parent + "'");
    }
    const auto& p = it->second;
    if (static_cast<int>(p.level) + 1 != static_cast<int>(n.level)) {
      throw Error(ErrorKind::ParentWrongLevel,
                  at + "parent '" + p.code + "' of '" + n.code + "' is " +
                      std::string(to_string(p.level)) + ", expected one level above " +
                      std::string(to_string(n.level)));
    }
    if (p.country != n.country) {
      throw Error(ErrorKind::CountryMismatch,
                  at + "region '" + n.code + "' country '" + n.country + "' differs from parent's '" +
                      p.country + "'");
    }
    h.children_[p.code].push_back(n.code);
  }

  // Every chain must terminate at a NUTS0 root within five steps.
  for (const auto& [code, n] : h.nodes_) {
    const RegionNode* cur = &n;
    std::size_t steps = 0;
    while (cur->parent) {
      if (++steps > kAllLevels.size()) {
        throw Error(ErrorKind::Cycle, "parent chain of '" + code + "' does not reach a NUTS0 root");
      }
      cur = &h.nodes_.find(*cur->parent)->second;
    }
    if (cur->level != SpatialLevel::NUTS0) {
      throw Error(ErrorKind::Cycle, "parent chain of '" + code + "' does not reach a NUTS0 root");
    }
  }

  for (auto& [_, kids] : h.children_) std::sort(kids.begin(), kids.end());
  return h;
}

bool RegionHierarchy::contains(std::string_view code) const { return nodes_.find(code) != nodes_.end(); }

const RegionNode& RegionHierarchy::node(std::string_view code) const {
  auto it = nodes_.find(code);
  if (it == nodes_.end()) throw Error(ErrorKind::UnknownRegion, "unknown region '" + std::string(code) + "'");
  return it->second;
}

const std::vector<std::string>& RegionHierarchy::children(std::string_view code) const {
  node(code);
  auto it = children_.find(code);
  return it == children_.end() ? kNoChildren : it->second;
}

std::vector<std::string> RegionHierarchy::descendants(std::string_view code, SpatialLevel target) const {
  const auto& start = node(code);
  if (coarser_than(target, start.level)) {
    throw Error(ErrorKind::TargetCoarserThanSource,
                std::string(to_string(target)) + " is coarser than " + std::string(to_string(start.level)) +
                    " region '" + start.code + "'");
  }
  std::vector<std::string> frontier{start.code};
  for (int depth = static_cast<int>(start.level); depth < static_cast<int>(target); ++depth) {
    std::vector<std::string> next;
    for (const auto& c : frontier) {
      const auto& kids = children(c);
      next.insert(next.end(), kids.begin(), kids.end());
    }
    frontier = std::move(next);
  }
  std::sort(frontier.begin(), frontier.end());
  return frontier;
}

const std::string& RegionHierarchy::ancestor(std::string_view code, SpatialLevel target) const {
  const RegionNode* cur = &node(code);
  if (finer_than(target, cur->level)) {
    throw Error(ErrorKind::TargetFinerThanSource,
                std::string(to_string(target)) + " is finer than " + std::string(to_string(cur->level)) +
                    " region '" + cur->code + "'");
  }
  while (cur->level != target) {
    if (!cur->parent) {
      throw Error(ErrorKind::NoAncestor,
                  "region '" + std::string(code) + "' has no ancestor at " + std::string(to_string(target)));
    }
    cur = &node(*cur->parent);
  }
  return cur->code;
}

std::vector<std::string> RegionHierarchy::regions_at(SpatialLevel level,
                                                     std::optional<std::string_view> country) const {
  std::vector<std::string> out;
  for (const auto& [code, n] : nodes_) {
    if (n.level == level && (!country || n.country == *country)) out.push_back(code);
  }
  return out;
}

std::vector<std::string> RegionHierarchy::countries() const { return regions_at(SpatialLevel::NUTS0); }

std::vector<RegionNode> RegionHierarchy::nodes() const {
  std::vector<RegionNode> out;
  out.reserve(nodes_.size());
  for (const auto& [_, n] : nodes_) out.push_back(n);
  return out;
}

RegionHierarchy load_hierarchy(const std::filesystem::path& path) {
  auto table = csv::read(path);
  const std::vector<std::string> expected{"code", "level", "parent", "country"};
  if (table.header != expected) {
    throw Error(ErrorKind::MalformedCsv, path.string() + ": header must be exactly code,level,parent,country");
  }
  std::vector<RegionNode> nodes;
  std::vector<std::size_t> lines;
  for (const auto& row : table.rows) {
    RegionNode n;
    n.code = row.cells[0];
    try {
      n.level = parse_level(row.cells[1]);
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + ": line " + std::to_string(row.line) + ": " + e.detail());
    }
    if (!row.cells[2].empty()) n.parent = row.cells[2];
    n.country = row.cells[3];
    nodes.push_back(std::move(n));
    lines.push_back(row.line);
  }
  try {
    return RegionHierarchy::build(std::move(nodes), lines);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

}  // namespace regio
