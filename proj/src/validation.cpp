#include "regio/validation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "regio/csv.hpp"
#include "regio/error.hpp"

namespace regio {

DeviationRow deviation(double reported, double disaggregated, std::string label) {
  if (reported == 0.0) {
    throw Error(ErrorKind::UndefinedDeviation,
                (label.empty() ? std::string("row") : "'" + label + "'") + ": reported value is zero");
  }
  DeviationRow row;
  row.label = std::move(label);
  row.reported = reported;
  row.disaggregated = disaggregated;
  row.difference = reported - disaggregated;
  row.pct_deviation = 100.0 * row.difference / reported;
  return row;
}

namespace {

double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::NonNumericValue, where + ": '" + cell + "' is not a finite number");
  }
  return v;
}

std::optional<std::size_t> column_of(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

std::vector<ReferenceRow> load_reference(const std::filesystem::path& path) {
  auto table = csv::read(path);
  auto region = column_of(table.header, "region");
  auto value = column_of(table.header, "value");
  auto label = column_of(table.header, "label");
  if (!region || !value) throw Error(ErrorKind::MalformedCsv, path.string() + ": reference needs region and value columns");
  std::vector<ReferenceRow> out;
  for (const auto& row : table.rows) {
    const auto where = path.string() + ": line " + std::to_string(row.line);
    ReferenceRow r;
    r.region = row.cells[*region];
    r.value = parse_number(row.cells[*value], where);
    r.label = label && !row.cells[*label].empty() ? row.cells[*label] : r.region;
    out.push_back(std::move(r));
  }
  return out;
}

ComparisonReport compare_at_level(const VariableSeries& result, const std::vector<ReferenceRow>& reference,
                                  const RegionHierarchy& h, SpatialLevel level) {
  if (!finer_than(result.level(), level)) {
    throw Error(ErrorKind::LevelMismatch, "reference level " + std::string(to_string(level)) +
                                              " must be coarser than result level " +
                                              std::string(to_string(result.level())));
  }
  const auto agg = aggregate(result, h, level);
  ComparisonReport report;
  for (const auto& ref : reference) {
    if (ref.region.empty() || !agg.contains(ref.region)) {
      report.unmatched.push_back(ref.label);
      continue;
    }
    try {
      report.rows.push_back(deviation(ref.value, *agg.at(ref.region).value, ref.label));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedDeviation) throw;
      report.undefined.push_back(ref.label);
    }
  }
  if (report.rows.empty() && report.undefined.empty()) {
    throw Error(ErrorKind::NoOverlap, "no reference region overlaps result '" + result.id() + "' at " +
                                          std::string(to_string(level)));
  }
  return report;
}

ComparisonReport compare_at_level(const AllocationResult& result, const std::vector<ReferenceRow>& reference,
                                  const RegionHierarchy& h, SpatialLevel level) {
  return compare_at_level(result.series, reference, h, level);
}

std::vector<DeviationRow> sector_comparison_report(const std::vector<SectorPair>& pairs) {
  std::vector<DeviationRow> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(deviation(p.value_a, p.value_b, p.sector));
  return out;
}

ComparisonReport compare_pairs(const std::vector<SectorPair>& pairs) {
  ComparisonReport report;
  for (const auto& p : pairs) {
    if (p.value_a == 0.0) {
      report.undefined.push_back(p.sector);
      continue;
    }
    report.rows.push_back(deviation(p.value_a, p.value_b, p.sector));
  }
  return report;
}

std::vector<SectorPair> load_pairs(const std::filesystem::path& path) {
  auto table = csv::read(path);
  auto label = column_of(table.header, "label");
  auto reported = column_of(table.header, "reported");
  auto disagg = column_of(table.header, "disaggregated");
  if (!label || !reported || !disagg) {
    throw Error(ErrorKind::MalformedCsv, path.string() + ": needs label,reported,disaggregated columns");
  }
  std::vector<SectorPair> out;
  for (const auto& row : table.rows) {
    const auto where = path.string() + ": line " + std::to_string(row.line);
    out.push_back({row.cells[*label], parse_number(row.cells[*reported], where), parse_number(row.cells[*disagg], where)});
  }
  return out;
}

std::string deviation_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out << "label,reported,disaggregated,difference,pct_deviation\n";
  for (const auto& r : report.rows) {
    out << csv::escape(r.label) << ',' << csv::format_double(r.reported) << ',' << csv::format_double(r.disaggregated)
        << ',' << csv::format_double(r.difference) << ',' << csv::format_double(r.pct_deviation) << '\n';
  }
  for (const auto& l : report.undefined) out << csv::escape(l) << ",0,,,UndefinedDeviation\n";
  return out.str();
}

namespace {

std::string plain(double v) {
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

}  // namespace

std::string deviation_markdown(const ComparisonReport& report, const std::string& title, const std::string& unit) {
  std::ostringstream out;
  out << "## " << title << "\n\n";
  const std::string u = unit.empty() ? "" : " (" + unit + ")";
  out << "| Label | Reported value" << u << " | Disaggregated value" << u << " | Difference" << u
      << " | Percentage deviation (%) |\n";
  out << "|---|---:|---:|---:|---:|\n";
  for (const auto& r : report.rows) {
    out << "| " << r.label << " | " << plain(r.reported) << " | " << plain(r.disaggregated) << " | "
        << plain(r.difference) << " | " << format_2dp(r.pct_deviation) << " |\n";
  }
  for (const auto& l : report.undefined) out << "| " << l << " | 0 | | | UndefinedDeviation |\n";
  if (!report.unmatched.empty()) {
    out << "\nUnmatched reference rows:";
    for (const auto& l : report.unmatched) out << ' ' << l;
    out << '\n';
  }
  return out.str();
}

}  // namespace regio
