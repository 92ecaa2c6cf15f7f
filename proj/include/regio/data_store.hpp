#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "regio/region_model.hpp"

namespace regio {

// Ordered so that std::min picks the weaker grade.
enum class ConfidenceLevel : int { VERY_LOW = 0, LOW = 1, MEDIUM = 2, HIGH = 3, VERY_HIGH = 4 };

std::string_view to_string(ConfidenceLevel c);
ConfidenceLevel parse_confidence(std::string_view token);  // throws ConfigError

struct Observation {
  std::optional<double> value;  // nullopt = missing
  ConfidenceLevel confidence = ConfidenceLevel::VERY_HIGH;

  bool missing() const { return !value.has_value(); }
};

inline constexpr std::string_view kAllCountries = "ALL";

struct SeriesMeta {
  std::string variable_id;
  std::string description;
  std::string unit;
  SpatialLevel level = SpatialLevel::LAU;
  std::string country_scope{kAllCountries};
};

struct VariableSeries {
  SeriesMeta meta;
  std::map<std::string, Observation> observations;  // region -> observation, code order

  const std::string& id() const { return meta.variable_id; }
  SpatialLevel level() const { return meta.level; }

  bool contains(std::string_view region) const { return observations.contains(std::string(region)); }
  const Observation& at(std::string_view region) const;  // throws UnknownRegion
  bool complete() const;
  std::size_t missing_count() const;
  std::vector<std::string> regions() const;
  std::vector<std::string> missing_regions() const;
};

struct MissingReport {
  std::string variable_id;
  std::size_t total = 0;
  std::size_t missing = 0;
  double pct = 0.0;  // exact; use display_pct() for the 2-decimal figure
};

// Half-up (away from zero on ties) rounding to `decimals` places.
double round_half_up(double value, int decimals = 2);
// Fixed two-decimal rendering of round_half_up(value, 2).
std::string format_2dp(double value);

// Regions the series is expected to cover: the declared level, restricted to its country scope.
std::vector<std::string> scope_regions(const RegionHierarchy& h, const SeriesMeta& meta);

// Reads a `region,value` CSV. Present values are VERY_HIGH; empty cells and regions of the
// declared scope with no row at all become missing observations.
VariableSeries ingest_series(const std::filesystem::path& path, const SeriesMeta& meta,
                             const RegionHierarchy& h);
// Same, from an already-split table; `source` names the origin in diagnostics.
VariableSeries ingest_rows(const std::vector<std::pair<std::string, std::string>>& rows,
                           const SeriesMeta& meta, const RegionHierarchy& h,
                           const std::string& source = "<memory>");

// Reads a `region,value,confidence` CSV as written by write_series_csv.
VariableSeries read_series_csv(const std::filesystem::path& path, const SeriesMeta& meta,
                               const RegionHierarchy& h);
void write_series_csv(const std::filesystem::path& path, const VariableSeries& s);

MissingReport missing_report(const VariableSeries& s);

// Sum over descendants at `target`; confidence is the minimum over contributors.
// Without allow_partial, any missing observation throws MissingValues. With it, missing
// contributors are skipped and a target region with no present contributor stays missing.
VariableSeries aggregate(const VariableSeries& s, const RegionHierarchy& h, SpatialLevel target,
                         bool allow_partial = false);

// Sample Pearson correlation. nullopt when either vector is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

}  // namespace regio
