#include "regio/project.hpp"

#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "regio/csv.hpp"
#include "regio/error.hpp"
#include "regio/validation.hpp"

namespace fs = std::filesystem;

namespace regio {

namespace {

// Raised when an output cannot be written; maps to exit code 3.
struct WriteFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw WriteFailure("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteFailure("cannot write " + path.string());
  out << text;
  if (!out) throw WriteFailure("write failed for " + path.string());
}

void write_series(const fs::path& path, const VariableSeries& s) {
  try {
    write_series_csv(path, s);
  } catch (const Error& e) {
    throw WriteFailure(e.what());
  }
}

VariableRole parse_role(const std::string& s, const std::string& where) {
  if (s == "proxy") return VariableRole::Proxy;
  if (s == "target") return VariableRole::Target;
  throw Error(ErrorKind::ConfigError, where + ": role must be proxy or target, got '" + s + "'");
}

}  // namespace

std::vector<RegistryEntry> load_registry(const fs::path& path) {
  auto table = csv::read(path);
  const std::vector<std::string> expected{"variable_id", "name", "unit", "level", "country_scope", "role", "file"};
  if (table.header != expected) {
    throw Error(ErrorKind::MalformedCsv,
                path.string() + ": header must be variable_id,name,unit,level,country_scope,role,file");
  }
  std::vector<RegistryEntry> out;
  std::set<std::pair<std::string, SpatialLevel>> seen;
  for (const auto& row : table.rows) {
    const auto where = path.string() + ": line " + std::to_string(row.line);
    RegistryEntry e;
    e.line = row.line;
    e.meta.variable_id = row.cells[0];
    e.meta.description = row.cells[1];
    e.meta.unit = row.cells[2];
    try {
      e.meta.level = parse_level(row.cells[3]);
    } catch (const Error& err) {
      throw Error(err.kind(), where + ": " + err.detail());
    }
    e.meta.country_scope = row.cells[4].empty() ? std::string(kAllCountries) : row.cells[4];
    e.role = parse_role(row.cells[5], where);
    e.file = row.cells[6];
    if (!seen.emplace(e.meta.variable_id, e.meta.level).second) {
      throw Error(ErrorKind::DuplicateCode, where + ": variable '" + e.meta.variable_id + "' registered twice at " +
                                                std::string(to_string(e.meta.level)));
    }
    try {
      parse(e.meta.variable_id);
    } catch (const Error&) {
      throw Error(ErrorKind::ConfigError, where + ": variable id '" + e.meta.variable_id + "' is not snake_case");
    }
    out.push_back(std::move(e));
  }
  return out;
}

ProjectConfig load_project_config(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  ProjectConfig cfg;
  cfg.config_path = path;
  const auto base = path.parent_path();
  auto rel = [&](const std::string& p) { return (base / p).lexically_normal(); };
  try {
    cfg.hierarchy = rel(doc.at("hierarchy").get<std::string>());
    cfg.registry = rel(doc.at("registry").get<std::string>());
    cfg.series_dir = rel(doc.value("series_dir", std::string(".")));
    if (doc.contains("proxy_assignments") && !doc["proxy_assignments"].is_null()) {
      cfg.proxy_assignments = rel(doc["proxy_assignments"].get<std::string>());
    }
    cfg.pipeline = rel(doc.at("pipeline").get<std::string>());
    cfg.reference_dir = rel(doc.value("reference_dir", std::string(".")));
    cfg.output_dir = rel(doc.value("output_dir", std::string("out")));
    cfg.seed = doc.value("seed", std::uint64_t{42});
    if (doc.contains("flags")) {
      const auto& f = doc["flags"];
      cfg.weights_on_raw = f.value("weights_on_raw", false);
      const auto scope = f.value("normalize_scope", std::string("country"));
      if (scope == "country") cfg.normalize_scope = NormalizeScope::Country;
      else if (scope == "parent") cfg.normalize_scope = NormalizeScope::Parent;
      else throw Error(ErrorKind::ConfigError, path.string() + ": normalize_scope must be country or parent");
    }
    if (doc.contains("imputation")) {
      const auto& im = doc["imputation"];
      if (im.contains("thresholds")) cfg.imputation.thresholds = im["thresholds"].get<std::vector<double>>();
      if (im.contains("grid")) {
        const auto& g = im["grid"];
        cfg.imputation.grid = make_grid(g.at("n_estimators").get<std::vector<int>>(),
                                        g.at("learning_rate").get<std::vector<double>>(),
                                        g.at("max_depth").get<std::vector<int>>());
      }
      cfg.imputation.folds = im.value("folds", std::size_t{5});
      cfg.imputation.holdout_fraction = im.value("holdout_fraction", 0.1);
    }
    for (const auto& c : doc.value("comparisons", nlohmann::json::array())) {
      Comparison cmp;
      cmp.name = c.at("name").get<std::string>();
      const auto kind = c.at("kind").get<std::string>();
      if (kind == "aggregate") {
        cmp.kind = Comparison::Kind::Aggregate;
        cmp.target_id = c.at("target_id").get<std::string>();
        cmp.level = parse_level(c.at("level").get<std::string>());
        cmp.file = c.at("reference").get<std::string>();
      } else if (kind == "pairs") {
        cmp.kind = Comparison::Kind::Pairs;
        cmp.file = c.at("file").get<std::string>();
      } else {
        throw Error(ErrorKind::ConfigError, path.string() + ": comparison kind must be aggregate or pairs");
      }
      cmp.unit = c.value("unit", std::string());
      cfg.comparisons.push_back(std::move(cmp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  cfg.imputation.seed = cfg.seed;
  return cfg;
}

namespace {

struct Loaded {
  RegionHierarchy hierarchy;
  std::vector<RegistryEntry> registry;
  std::vector<VariableSeries> raw;  // registry order
};

Loaded load_inputs(const ProjectConfig& cfg) {
  Loaded l;
  l.hierarchy = load_hierarchy(cfg.hierarchy);
  l.registry = load_registry(cfg.registry);
  for (const auto& e : l.registry) l.raw.push_back(ingest_series(cfg.series_dir / e.file, e.meta, l.hierarchy));
  return l;
}

PipelineConfig load_resolved_pipeline(const ProjectConfig& cfg) {
  auto pipeline = load_pipeline_config(cfg.pipeline);
  std::vector<ProxyAssignment> assignments;
  if (cfg.proxy_assignments) assignments = load_proxy_assignments(*cfg.proxy_assignments);
  resolve_tasks(pipeline, assignments);
  return pipeline;
}

fs::path imputed_path(const ProjectConfig& cfg, const SeriesMeta& m) {
  return cfg.output_dir / "imputed" / (m.variable_id + "_" + std::string(to_string(m.level)) + ".csv");
}

// Candidate predictors for a target: complete same-level series covering its regions, plus
// complete LAU series summed to NUTS3 for NUTS3 targets.
std::vector<VariableSeries> imputation_candidates(const VariableSeries& target, const Loaded& l) {
  auto covers = [&](const VariableSeries& c) {
    for (const auto& [r, _] : target.observations) {
      auto it = c.observations.find(r);
      if (it == c.observations.end() || it->second.missing()) return false;
    }
    return true;
  };
  std::vector<VariableSeries> out;
  for (std::size_t i = 0; i < l.raw.size(); ++i) {
    const auto& c = l.raw[i];
    if (l.registry[i].role != VariableRole::Proxy || c.id() == target.id()) continue;
    if (c.level() == target.level() && covers(c)) out.push_back(c);
  }
  if (target.level() == SpatialLevel::NUTS3) {
    for (std::size_t i = 0; i < l.raw.size(); ++i) {
      const auto& c = l.raw[i];
      if (l.registry[i].role != VariableRole::Proxy || c.level() != SpatialLevel::LAU || !c.complete()) continue;
      auto agg = aggregate(c, l.hierarchy, SpatialLevel::NUTS3);
      agg.meta.variable_id = c.id() + "__lau";
      if (covers(agg)) out.push_back(std::move(agg));
    }
  }
  return out;
}

int report_error(std::ostream& out, const std::exception& e) {
  out << "error: " << e.what() << '\n';
  return kExitInvalid;
}

}  // namespace

int cmd_check(const ProjectConfig& cfg, std::ostream& out) {
  std::vector<std::string> findings;
  auto guard = [&](auto&& fn) {
    try {
      fn();
      return true;
    } catch (const std::exception& e) {
      findings.push_back(e.what());
      return false;
    }
  };

  std::optional<RegionHierarchy> h;
  guard([&] { h = load_hierarchy(cfg.hierarchy); });
  std::vector<RegistryEntry> registry;
  guard([&] { registry = load_registry(cfg.registry); });

  std::set<std::string> lau_ids;
  std::set<std::pair<std::string, SpatialLevel>> known;
  for (const auto& e : registry) {
    known.emplace(e.meta.variable_id, e.meta.level);
    if (e.meta.level == SpatialLevel::LAU) lau_ids.insert(e.meta.variable_id);
    const auto file = cfg.series_dir / e.file;
    if (!fs::exists(file)) {
      findings.push_back(cfg.registry.string() + ": line " + std::to_string(e.line) + ": series file " +
                         file.string() + " does not exist");
      continue;
    }
    if (h) guard([&] { ingest_series(file, e.meta, *h); });
  }

  guard([&] {
    auto pipeline = load_resolved_pipeline(cfg);
    for (const auto& st : pipeline.stages) {
      for (const auto& t : st.tasks) {
        if (!known.contains({t.target_id, t.source_level})) {
          findings.push_back(cfg.pipeline.string() + ": task '" + t.target_id + "' has no registered " +
                             std::string(to_string(t.source_level)) + " source series");
        }
      }
    }
    plan_stages(pipeline, lau_ids);
  });

  for (const auto& c : cfg.comparisons) {
    const auto file = cfg.reference_dir / c.file;
    if (!fs::exists(file)) findings.push_back(cfg.config_path.string() + ": comparison '" + c.name +
                                              "' reference " + file.string() + " does not exist");
  }

  for (const auto& f : findings) out << "error: " << f << '\n';
  out << findings.size() << " errors\n";
  return findings.empty() ? kExitOk : kExitInvalid;
}

int cmd_impute(const ProjectConfig& cfg, std::ostream& out) {
  Loaded l;
  try {
    l = load_inputs(cfg);
  } catch (const std::exception& e) {
    return report_error(out, e);
  }
  try {
    const auto dir = cfg.output_dir / "imputed";
    ensure_dir(dir);
    for (const auto& entry : fs::directory_iterator(dir)) fs::remove(entry.path());
    nlohmann::json summary{{"seed", cfg.seed}, {"imputations", nlohmann::json::array()}};
    std::size_t imputed_series = 0;
    auto config = cfg.imputation;
    config.seed = cfg.seed;
    config.jobs = cfg.jobs;
    for (std::size_t i = 0; i < l.raw.size(); ++i) {
      const auto& s = l.raw[i];
      if (l.registry[i].role != VariableRole::Proxy || s.complete()) continue;
      auto result = impute_series(s, imputation_candidates(s, l), config);
      const auto path = imputed_path(cfg, s.meta);
      write_series(path, result.series);
      auto report = to_json(result.report);
      report["level"] = std::string(to_string(s.level()));
      write_text(fs::path(path).replace_extension(".report.json"), report.dump(2) + "\n");
      summary["imputations"].push_back(report);
      ++imputed_series;
      out << "imputed " << s.id() << " (" << to_string(s.level()) << "): " << result.report.n_imputed << " values, "
          << to_string(result.report.method) << ", " << to_string(result.report.confidence) << '\n';
    }
    summary["n_imputed_series"] = imputed_series;
    write_text(cfg.output_dir / "imputation_summary.json", summary.dump(2) + "\n");
    out << imputed_series << " series imputed\n";
  } catch (const WriteFailure& e) {
    out << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    out << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    return report_error(out, e);
  }
  return kExitOk;
}

int cmd_disaggregate(const ProjectConfig& cfg, std::ostream& out) {
  Loaded l;
  PipelineConfig pipeline;
  std::vector<VariableSeries> store;
  try {
    l = load_inputs(cfg);
    pipeline = load_resolved_pipeline(cfg);
    for (std::size_t i = 0; i < l.raw.size(); ++i) {
      const auto& e = l.registry[i];
      auto s = l.raw[i];
      if (e.role == VariableRole::Proxy && !s.complete()) {
        const auto path = imputed_path(cfg, e.meta);
        if (!fs::exists(path)) {
          throw Error(ErrorKind::MissingValues, "proxy '" + s.id() + "' has " + std::to_string(s.missing_count()) +
                                                    " missing values and no imputed output; run `regio impute` first");
        }
        s = read_series_csv(path, e.meta, l.hierarchy);
        if (!s.complete()) throw Error(ErrorKind::MissingValues, path.string() + " is incomplete");
      }
      store.push_back(std::move(s));
    }
  } catch (const std::exception& e) {
    return report_error(out, e);
  }

  PipelineResult result;
  try {
    DisaggregationOptions options;
    options.normalize_scope = cfg.normalize_scope;
    options.eval.weights_on_raw = cfg.weights_on_raw;
    result = run_pipeline(pipeline, l.hierarchy, store, options, cfg.jobs);
  } catch (const std::exception& e) {
    return report_error(out, e);
  }

  try {
    const auto dir = cfg.output_dir / "disaggregated";
    ensure_dir(dir);
    for (const auto& entry : fs::directory_iterator(dir)) fs::remove(entry.path());
    for (const auto& [id, r] : result.outputs) write_series(dir / (id + ".csv"), r.series);
    write_text(cfg.output_dir / "run_report.json", to_json(result).dump(2) + "\n");
  } catch (const WriteFailure& e) {
    out << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    out << "error: " << e.what() << '\n';
    return kExitIo;
  }
  std::size_t skipped = 0;
  double worst = 0.0;
  for (const auto& t : result.tasks) {
    if (t.status == "skipped") {
      ++skipped;
      out << "skipped " << t.target_id << ": " << t.reason << '\n';
    } else {
      worst = std::max(worst, t.max_relative_residual);
    }
  }
  out << result.outputs.size() << " outputs, " << skipped << " skipped, max relative residual "
      << csv::format_double(worst) << '\n';
  return kExitOk;
}

int cmd_validate(const ProjectConfig& cfg, std::ostream& out) {
  if (cfg.comparisons.empty()) {
    out << "no comparisons\n";
    return kExitOk;
  }
  RegionHierarchy h;
  std::vector<std::pair<const Comparison*, ComparisonReport>> reports;
  try {
    h = load_hierarchy(cfg.hierarchy);
    for (const auto& c : cfg.comparisons) {
      const auto ref_path = cfg.reference_dir / c.file;
      if (c.kind == Comparison::Kind::Pairs) {
        reports.emplace_back(&c, compare_pairs(load_pairs(ref_path)));
        continue;
      }
      const auto result_path = cfg.output_dir / "disaggregated" / (c.target_id + ".csv");
      if (!fs::exists(result_path)) {
        throw Error(ErrorKind::IoError, "comparison '" + c.name + "': " + result_path.string() +
                                            " does not exist; run `regio disaggregate` first");
      }
      SeriesMeta meta;
      meta.variable_id = c.target_id;
      meta.level = SpatialLevel::LAU;
      auto series = read_series_csv(result_path, meta, h);
      // Only the regions written by the run are part of the result.
      std::erase_if(series.observations, [](const auto& kv) { return kv.second.missing(); });
      reports.emplace_back(&c, compare_at_level(series, load_reference(ref_path), h, c.level));
    }
  } catch (const std::exception& e) {
    return report_error(out, e);
  }

  try {
    const auto dir = cfg.output_dir / "validation";
    ensure_dir(dir);
    for (const auto& [c, report] : reports) {
      write_text(dir / (c->name + ".csv"), deviation_csv(report));
      write_text(dir / (c->name + ".md"), deviation_markdown(report, c->name, c->unit));
      out << c->name << ": " << report.rows.size() << " rows";
      if (!report.undefined.empty()) out << ", " << report.undefined.size() << " UndefinedDeviation";
      if (!report.unmatched.empty()) out << ", " << report.unmatched.size() << " unmatched";
      out << '\n';
    }
  } catch (const WriteFailure& e) {
    out << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

int cmd_run(const ProjectConfig& cfg, std::ostream& out) {
  for (auto* step : {&cmd_check, &cmd_impute, &cmd_disaggregate, &cmd_validate}) {
    if (int rc = step(cfg, out); rc != kExitOk) return rc;
  }
  return kExitOk;
}

}  // namespace regio
