#include "regio/data_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "regio/csv.hpp"
#include "regio/error.hpp"

namespace regio {

std::string_view to_string(ConfidenceLevel c) {
  switch (c) {
    case ConfidenceLevel::VERY_LOW: return "VERY_LOW";
    case ConfidenceLevel::LOW: return "LOW";
    case ConfidenceLevel::MEDIUM: return "MEDIUM";
    case ConfidenceLevel::HIGH: return "HIGH";
    case ConfidenceLevel::VERY_HIGH: return "VERY_HIGH";
  }
  return "?";
}

ConfidenceLevel parse_confidence(std::string_view token) {
  for (auto c : {ConfidenceLevel::VERY_LOW, ConfidenceLevel::LOW, ConfidenceLevel::MEDIUM,
                 ConfidenceLevel::HIGH, ConfidenceLevel::VERY_HIGH}) {
    if (to_string(c) == token) return c;
  }
  throw Error(ErrorKind::ConfigError, "unknown confidence token '" + std::string(token) + "'");
}

const Observation& VariableSeries::at(std::string_view region) const {
  auto it = observations.find(std::string(region));
  if (it == observations.end()) {
    throw Error(ErrorKind::UnknownRegion,
                "series '" + meta.variable_id + "' has no row for region '" + std::string(region) + "'");
  }
  return it->second;
}

bool VariableSeries::complete() const { return missing_count() == 0; }

std::size_t VariableSeries::missing_count() const {
  return static_cast<std::size_t>(
      std::count_if(observations.begin(), observations.end(), [](const auto& kv) { return kv.second.missing(); }));
}

std::vector<std::string> VariableSeries::regions() const {
  std::vector<std::string> out;
  out.reserve(observations.size());
  for (const auto& [r, _] : observations) out.push_back(r);
  return out;
}

std::vector<std::string> VariableSeries::missing_regions() const {
  std::vector<std::string> out;
  for (const auto& [r, o] : observations) {
    if (o.missing()) out.push_back(r);
  }
  return out;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // Nudge by a few ulps so values like 4.325 stored as 4.32499999... still round up.
  const double scaled = std::abs(value) * scale;
  const double rounded = std::floor(scaled + 0.5 + scaled * 4 * std::numeric_limits<double>::epsilon());
  return std::copysign(rounded / scale, value);
}

std::string format_2dp(double value) {
  double r = round_half_up(value, 2);
  if (r == 0.0) r = 0.0;  // drop negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", r);
  return buf;
}

std::vector<std::string> scope_regions(const RegionHierarchy& h, const SeriesMeta& meta) {
  if (meta.country_scope == kAllCountries) return h.regions_at(meta.level);
  return h.regions_at(meta.level, meta.country_scope);
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_value(const std::string& raw, const std::string& where) {
  auto cell = trim(raw);
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec == std::errc::result_out_of_range) {
    throw Error(ErrorKind::NonFiniteValue, where + ": value '" + cell + "' is out of range");
  }
  if (ec != std::errc{} || ptr != last) {
    throw Error(ErrorKind::NonNumericValue, where + ": value '" + cell + "' is not a number");
  }
  if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteValue, where + ": value '" + cell + "' is not finite");
  return v;
}

void check_region(const RegionHierarchy& h, const SeriesMeta& meta, const std::string& region,
                  const std::string& where) {
  if (!h.contains(region)) {
    throw Error(ErrorKind::UnknownRegion, where + ": region '" + region + "' is not in the hierarchy");
  }
  const auto& n = h.node(region);
  if (n.level != meta.level) {
    throw Error(ErrorKind::LevelMismatch, where + ": region '" + region + "' is " +
                                              std::string(to_string(n.level)) + ", series '" +
                                              meta.variable_id + "' is declared " +
                                              std::string(to_string(meta.level)));
  }
  if (meta.country_scope != kAllCountries && n.country != meta.country_scope) {
    throw Error(ErrorKind::CountryMismatch, where + ": region '" + region + "' lies outside country scope " +
                                                meta.country_scope);
  }
}

void fill_absent(VariableSeries& s, const RegionHierarchy& h) {
  for (const auto& r : scope_regions(h, s.meta)) {
    if (!s.observations.contains(r)) s.observations.emplace(r, Observation{std::nullopt, ConfidenceLevel::VERY_HIGH});
  }
}

}  // namespace

VariableSeries ingest_rows(const std::vector<std::pair<std::string, std::string>>& rows,
                           const SeriesMeta& meta, const RegionHierarchy& h, const std::string& source) {
  VariableSeries s{meta, {}};
  std::size_t i = 0;
  for (const auto& [region_raw, value_raw] : rows) {
    const auto where = source + ": row " + std::to_string(++i);
    auto region = trim(region_raw);
    check_region(h, meta, region, where);
    auto value = parse_value(value_raw, where);
    if (!s.observations.emplace(region, Observation{value, ConfidenceLevel::VERY_HIGH}).second) {
      throw Error(ErrorKind::DuplicateRegion, where + ": duplicate row for region '" + region + "'");
    }
  }
  fill_absent(s, h);
  return s;
}

VariableSeries ingest_series(const std::filesystem::path& path, const SeriesMeta& meta,
                             const RegionHierarchy& h) {
  auto table = csv::read(path);
  if (table.header.size() != 2 || trim(table.header[0]) != "region" || trim(table.header[1]) != "value") {
    throw Error(ErrorKind::MalformedCsv, path.string() + ": header must be region,value");
  }
  VariableSeries s{meta, {}};
  for (const auto& row : table.rows) {
    const auto where = path.string() + ": line " + std::to_string(row.line);
    auto region = trim(row.cells[0]);
    check_region(h, meta, region, where);
    auto value = parse_value(row.cells[1], where);
    if (!s.observations.emplace(region, Observation{value, ConfidenceLevel::VERY_HIGH}).second) {
      throw Error(ErrorKind::DuplicateRegion, where + ": duplicate row for region '" + region + "'");
    }
  }
  fill_absent(s, h);
  return s;
}

VariableSeries read_series_csv(const std::filesystem::path& path, const SeriesMeta& meta,
                               const RegionHierarchy& h) {
  auto table = csv::read(path);
  const std::vector<std::string> expected{"region", "value", "confidence"};
  if (table.header != expected) {
    throw Error(ErrorKind::MalformedCsv, path.string() + ": header must be region,value,confidence");
  }
  VariableSeries s{meta, {}};
  for (const auto& row : table.rows) {
    const auto where = path.string() + ": line " + std::to_string(row.line);
    check_region(h, meta, row.cells[0], where);
    Observation o{parse_value(row.cells[1], where), ConfidenceLevel::VERY_HIGH};
    if (!row.cells[2].empty()) o.confidence = parse_confidence(row.cells[2]);
    if (!s.observations.emplace(row.cells[0], o).second) {
      throw Error(ErrorKind::DuplicateRegion, where + ": duplicate row for region '" + row.cells[0] + "'");
    }
  }
  fill_absent(s, h);
  return s;
}

void write_series_csv(const std::filesystem::path& path, const VariableSeries& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "region,value,confidence\n";
  for (const auto& [region, o] : s.observations) {
    out << csv::escape(region) << ',';
    if (o.value) out << csv::format_double(*o.value) << ',' << to_string(o.confidence);
    else out << ',';
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

MissingReport missing_report(const VariableSeries& s) {
  MissingReport r;
  r.variable_id = s.meta.variable_id;
  r.total = s.observations.size();
  r.missing = s.missing_count();
  r.pct = r.total == 0 ? 0.0 : 100.0 * static_cast<double>(r.missing) / static_cast<double>(r.total);
  return r;
}

VariableSeries aggregate(const VariableSeries& s, const RegionHierarchy& h, SpatialLevel target,
                         bool allow_partial) {
  if (!coarser_than(target, s.level())) {
    throw Error(ErrorKind::LevelMismatch, "aggregate target " + std::string(to_string(target)) +
                                              " must be coarser than " + std::string(to_string(s.level())));
  }
  if (!allow_partial && !s.complete()) {
    throw Error(ErrorKind::MissingValues, "series '" + s.id() + "' has " + std::to_string(s.missing_count()) +
                                              " missing values");
  }
  struct Acc {
    double sum = 0.0;
    ConfidenceLevel conf = ConfidenceLevel::VERY_HIGH;
    bool any = false;
  };
  std::map<std::string, Acc> acc;
  for (const auto& [region, o] : s.observations) {
    auto& a = acc[h.ancestor(region, target)];
    if (o.missing()) continue;
    a.sum += *o.value;
    a.conf = std::min(a.conf, o.confidence);
    a.any = true;
  }
  VariableSeries out{s.meta, {}};
  out.meta.level = target;
  for (const auto& [region, a] : acc) {
    out.observations.emplace(region, a.any ? Observation{a.sum, a.conf} : Observation{std::nullopt, a.conf});
  }
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "pearson: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorKind::TooFewValues, "pearson needs at least 2 values");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace regio
