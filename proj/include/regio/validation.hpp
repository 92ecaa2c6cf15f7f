#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "regio/data_store.hpp"
#include "regio/disaggregation.hpp"
#include "regio/region_model.hpp"

namespace regio {

struct DeviationRow {
  std::string label;
  double reported = 0.0;
  double disaggregated = 0.0;
  double difference = 0.0;     // reported - disaggregated
  double pct_deviation = 0.0;  // 100 * difference / reported
};

// Throws UndefinedDeviation when reported == 0.
DeviationRow deviation(double reported, double disaggregated, std::string label = {});

struct ReferenceRow {
  std::string label;
  std::string region;  // empty when the inventory has no region code
  double value = 0.0;
};

// `label,region,value` or `region,value[,label]` CSV; rows without a region code stay unjoinable.
std::vector<ReferenceRow> load_reference(const std::filesystem::path& path);

struct ComparisonReport {
  std::vector<DeviationRow> rows;
  std::vector<std::string> unmatched;  // reference labels with nothing to compare against
  std::vector<std::string> undefined;  // labels whose reported value was zero
};

// Aggregates `result` to `level` and compares it with the reference, joined on region code.
// Throws NoOverlap when no reference row matches.
ComparisonReport compare_at_level(const VariableSeries& result, const std::vector<ReferenceRow>& reference,
                                  const RegionHierarchy& h, SpatialLevel level);
ComparisonReport compare_at_level(const AllocationResult& result, const std::vector<ReferenceRow>& reference,
                                  const RegionHierarchy& h, SpatialLevel level);

struct SectorPair {
  std::string sector;
  double value_a = 0.0;
  double value_b = 0.0;
};

// pct = 100 * (a - b) / a per row. Throws UndefinedDeviation on a zero `value_a`.
std::vector<DeviationRow> sector_comparison_report(const std::vector<SectorPair>& pairs);

// Precomputed `label,reported,disaggregated` pairs; zero reported values go to `undefined`.
ComparisonReport compare_pairs(const std::vector<SectorPair>& pairs);
std::vector<SectorPair> load_pairs(const std::filesystem::path& path);

// CSV `label,reported,disaggregated,difference,pct_deviation`; undefined rows carry the token
// UndefinedDeviation in the pct column.
std::string deviation_csv(const ComparisonReport& report);
std::string deviation_markdown(const ComparisonReport& report, const std::string& title, const std::string& unit);

}  // namespace regio
