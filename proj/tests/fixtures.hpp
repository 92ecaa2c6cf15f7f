#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "regio/data_store.hpp"
#include "regio/error.hpp"
#include "regio/region_model.hpp"

namespace regio::testing {

// Kind of the regio::Error thrown by fn; fails the test when nothing is thrown.
template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected regio::Error");
  return ErrorKind::ConfigError;
}

inline RegionNode node(std::string code, SpatialLevel level, std::string parent, std::string country) {
  RegionNode n{std::move(code), level, std::nullopt, std::move(country)};
  if (!parent.empty()) n.parent = std::move(parent);
  return n;
}

// DE -> DE1 -> DE11 -> DE111 -> {DE_0001, DE_0002, DE_0003}
//                   -> DE112 -> {DE_0004}
inline RegionHierarchy small_de() {
  using L = SpatialLevel;
  return RegionHierarchy::build({
      node("DE", L::NUTS0, "", "DE"),
      node("DE1", L::NUTS1, "DE", "DE"),
      node("DE11", L::NUTS2, "DE1", "DE"),
      node("DE111", L::NUTS3, "DE11", "DE"),
      node("DE112", L::NUTS3, "DE11", "DE"),
      node("DE_0001", L::LAU, "DE111", "DE"),
      node("DE_0002", L::LAU, "DE111", "DE"),
      node("DE_0003", L::LAU, "DE111", "DE"),
      node("DE_0004", L::LAU, "DE112", "DE"),
  });
}

inline VariableSeries make_series(std::string id, SpatialLevel level,
                                  const std::vector<std::pair<std::string, std::optional<double>>>& values,
                                  ConfidenceLevel conf = ConfidenceLevel::VERY_HIGH) {
  VariableSeries s;
  s.meta.variable_id = std::move(id);
  s.meta.level = level;
  for (const auto& [r, v] : values) s.observations[r] = Observation{v, conf};
  return s;
}

// Random hierarchy: `countries` roots, each with a random fan-out down to LAU.
inline RegionHierarchy random_hierarchy(std::mt19937_64& rng, int countries, int min_lau_per_country) {
  using L = SpatialLevel;
  std::vector<RegionNode> nodes;
  std::uniform_int_distribution<int> fan(1, 4);
  for (int c = 0; c < countries; ++c) {
    const std::string cc = std::string(1, static_cast<char>('A' + c)) + "X";
    nodes.push_back(node(cc, L::NUTS0, "", cc));
    int lau = 0;
    int n1 = 0;
    while (lau < min_lau_per_country) {
      const auto c1 = cc + std::to_string(++n1);
      nodes.push_back(node(c1, L::NUTS1, cc, cc));
      for (int a = 0, na = fan(rng); a < na; ++a) {
        const auto c2 = c1 + "_" + std::to_string(a);
        nodes.push_back(node(c2, L::NUTS2, c1, cc));
        for (int b = 0, nb = fan(rng); b < nb; ++b) {
          const auto c3 = c2 + "_" + std::to_string(b);
          nodes.push_back(node(c3, L::NUTS3, c2, cc));
          for (int d = 0, nd = fan(rng) * 3; d < nd; ++d) {
            nodes.push_back(node(c3 + "_" + std::to_string(d), L::LAU, c3, cc));
            ++lau;
          }
        }
      }
    }
  }
  return RegionHierarchy::build(std::move(nodes));
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("regio_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace regio::testing
