#include "regio/disaggregation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "regio/error.hpp"
#include "regio/parallel.hpp"

namespace regio {

Allocation allocate(double parent_value, const std::map<std::string, double>& weights) {
  if (weights.empty()) throw Error(ErrorKind::EmptyChildSet, "allocation with no children");
  double total = 0.0;
  for (const auto& [child, w] : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorKind::InvalidWeight, "weight of '" + child + "' must be finite and >= 0");
    }
    total += w;
  }
  Allocation out;
  if (total == 0.0) {
    out.fallback = true;
    const double each = parent_value / static_cast<double>(weights.size());
    for (const auto& [child, _] : weights) out.values[child] = each;
    return out;
  }
  for (const auto& [child, w] : weights) out.values[child] = parent_value * (w / total);
  return out;
}

AllocationResult disaggregate(const DisaggregationTask& task, const RegionHierarchy& h, const SeriesEnv& env,
                              const DisaggregationOptions& options) {
  if (!finer_than(task.output_level, task.source.level())) {
    throw Error(ErrorKind::InvalidTask, "task '" + task.target_id + "': output level must be finer than source level");
  }
  if (task.mode == AllocationMode::Allocate && !task.formula) {
    throw Error(ErrorKind::InvalidTask, "task '" + task.target_id + "' has no formula");
  }
  if (const auto missing = task.source.missing_regions(); !missing.empty()) {
    throw Error(ErrorKind::MissingSourceValue, "task '" + task.target_id + "': source value missing for '" +
                                                   missing.front() + "'");
  }

  AllocationResult result;
  result.series.meta = task.source.meta;
  result.series.meta.variable_id = task.target_id;
  result.series.meta.level = task.output_level;

  std::map<std::string, VariableSeries> country_proxy;
  auto proxy_for = [&](const std::string& parent, const std::vector<std::string>& children) -> VariableSeries {
    if (options.normalize_scope == NormalizeScope::Parent) {
      return evaluate(*task.formula, env, children, options.eval);
    }
    const auto& country = h.node(parent).country;
    auto it = country_proxy.find(country);
    if (it == country_proxy.end()) {
      it = country_proxy
               .emplace(country, evaluate(*task.formula, env, h.regions_at(task.output_level, country), options.eval))
               .first;
    }
    return it->second;
  };

  for (const auto& [parent, obs] : task.source.observations) {
    const double parent_value = *obs.value;
    const auto children = h.descendants(parent, task.output_level);
    if (children.empty()) {
      throw Error(ErrorKind::EmptyChildSet, "task '" + task.target_id + "': region '" + parent + "' has no " +
                                                std::string(to_string(task.output_level)) + " descendants");
    }
    const auto ceiling = std::min(task.assignment_confidence, obs.confidence);

    if (task.mode == AllocationMode::Replicate) {
      for (const auto& c : children) {
        result.series.observations[c] = Observation{parent_value, ceiling};
        result.provenance[c] = Provenance{parent, 1.0, false};
      }
      continue;
    }

    const auto proxy = proxy_for(parent, children);
    std::map<std::string, double> weights;
    for (const auto& c : children) weights[c] = *proxy.at(c).value;
    const auto alloc = allocate(parent_value, weights);
    double total_w = 0.0;
    for (const auto& [_, w] : weights) total_w += w;

    double sum = 0.0;
    for (const auto& [c, v] : alloc.values) {
      sum += v;
      const auto conf = alloc.fallback ? ConfidenceLevel::VERY_LOW : std::min(ceiling, proxy.at(c).confidence);
      result.series.observations[c] = Observation{v, conf};
      const double share = alloc.fallback ? 1.0 / static_cast<double>(children.size()) : weights.at(c) / total_w;
      result.provenance[c] = Provenance{parent, share, alloc.fallback};
    }
    if (alloc.fallback) ++result.fallback_parents;
    const double residual = parent_value == 0.0 ? std::abs(sum) : std::abs(sum - parent_value) / std::abs(parent_value);
    result.max_relative_residual = std::max(result.max_relative_residual, residual);
  }
  return result;
}

namespace {

AllocationMode parse_mode(const std::string& s) {
  if (s == "allocate") return AllocationMode::Allocate;
  if (s == "replicate") return AllocationMode::Replicate;
  throw Error(ErrorKind::ConfigError, "unknown mode '" + s + "' (allocate|replicate)");
}

}  // namespace

PipelineConfig parse_pipeline_config(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("pipeline config: ") + e.what());
  }
  PipelineConfig cfg;
  try {
    for (const auto& st : doc.at("stages")) {
      StageSpec stage;
      stage.stage = st.at("stage").get<int>();
      if (stage.stage < 1 || stage.stage > 3) {
        throw Error(ErrorKind::ConfigError, "stage must be 1, 2 or 3 (got " + std::to_string(stage.stage) + ")");
      }
      for (const auto& t : st.value("tasks", nlohmann::json::array())) {
        TaskSpec task;
        task.target_id = t.at("target_id").get<std::string>();
        task.source_level = parse_level(t.at("source_level").get<std::string>());
        task.mode = parse_mode(t.value("mode", std::string("allocate")));
        if (t.contains("formula") && !t["formula"].is_null()) {
          task.formula = t["formula"].get<std::string>();
          try {
            task.expr = parse(*task.formula);
          } catch (const Error& e) {
            throw Error(e.kind(), "formula of '" + task.target_id + "': " + e.detail());
          }
        }
        if (t.contains("assignment_confidence") && !t["assignment_confidence"].is_null()) {
          task.assignment_confidence = parse_confidence(t["assignment_confidence"].get<std::string>());
        }
        stage.tasks.push_back(std::move(task));
      }
      cfg.stages.push_back(std::move(stage));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("pipeline config: ") + e.what());
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_pipeline_config(buf.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

void resolve_tasks(PipelineConfig& config, const std::vector<ProxyAssignment>& assignments) {
  for (auto& stage : config.stages) {
    for (auto& t : stage.tasks) {
      auto it = std::find_if(assignments.begin(), assignments.end(), [&](const ProxyAssignment& a) {
        return a.target_id == t.target_id && a.source_level == t.source_level;
      });
      if (t.mode == AllocationMode::Allocate && !t.expr) {
        if (it == assignments.end()) {
          throw Error(ErrorKind::InvalidTask, "task '" + t.target_id + "' has no formula and no proxy assignment");
        }
        t.formula = it->formula;
        t.expr = it->expr;
      }
      if (!t.assignment_confidence) {
        if (it == assignments.end()) {
          throw Error(ErrorKind::InvalidTask, "task '" + t.target_id + "' has no assignment_confidence");
        }
        t.assignment_confidence = it->assignment_confidence;
      }
      if (*t.assignment_confidence == ConfidenceLevel::VERY_HIGH) {
        throw Error(ErrorKind::InvalidTask, "task '" + t.target_id + "': VERY_HIGH is reserved for observed data");
      }
      if (t.source_level == SpatialLevel::LAU) {
        throw Error(ErrorKind::InvalidTask, "task '" + t.target_id + "': source level must be coarser than LAU");
      }
    }
  }
}

std::vector<StagePlan> plan_stages(const PipelineConfig& config, const std::set<std::string>& available) {
  std::map<int, std::vector<const TaskSpec*>> by_stage;
  for (const auto& st : config.stages) {
    for (const auto& t : st.tasks) by_stage[st.stage].push_back(&t);
  }
  std::map<std::string, int> producer_stage;
  for (const auto& [stage, tasks] : by_stage) {
    for (const auto* t : tasks) {
      if (available.contains(t->target_id)) {
        throw Error(ErrorKind::DuplicateOutput,
                    "task '" + t->target_id + "' would overwrite an existing LAU series of the same id");
      }
      if (!producer_stage.emplace(t->target_id, stage).second) {
        throw Error(ErrorKind::DuplicateOutput, "target '" + t->target_id + "' is produced twice");
      }
    }
  }

  std::set<std::string> known = available;
  std::vector<StagePlan> plans;
  for (const auto& [stage, tasks] : by_stage) {
    StagePlan plan;
    plan.stage = stage;
    std::set<std::string> stage_outputs;
    for (const auto* t : tasks) stage_outputs.insert(t->target_id);

    std::map<const TaskSpec*, std::set<std::string>> pending;
    for (const auto* t : tasks) {
      std::set<std::string> deps;
      if (t->expr) {
        for (const auto& v : variables(*t->expr)) {
          if (known.contains(v)) continue;
          if (stage_outputs.contains(v)) {
            deps.insert(v);
            continue;
          }
          auto it = producer_stage.find(v);
          if (it != producer_stage.end()) {
            throw Error(ErrorKind::UnresolvedDependency, "stage " + std::to_string(stage) + " task '" + t->target_id +
                                                             "' references '" + v + "', produced only in stage " +
                                                             std::to_string(it->second));
          }
          throw Error(ErrorKind::UnresolvedDependency, "stage " + std::to_string(stage) + " task '" + t->target_id +
                                                           "' references '" + v + "', which no LAU series or task provides");
        }
      }
      pending.emplace(t, std::move(deps));
    }
    // Kahn's algorithm over same-stage dependencies, preserving config order within a wave.
    while (!pending.empty()) {
      std::vector<const TaskSpec*> wave;
      for (const auto* t : tasks) {
        auto it = pending.find(t);
        if (it == pending.end()) continue;
        if (std::all_of(it->second.begin(), it->second.end(), [&](const auto& d) { return known.contains(d); })) {
          wave.push_back(t);
        }
      }
      if (wave.empty()) {
        std::string names;
        for (const auto& [t, _] : pending) names += (names.empty() ? "" : ", ") + t->target_id;
        throw Error(ErrorKind::DependencyCycle, "stage " + std::to_string(stage) + " formulas form a cycle: " + names);
      }
      for (const auto* t : wave) {
        pending.erase(t);
        known.insert(t->target_id);
      }
      plan.waves.push_back(std::move(wave));
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

PipelineResult run_pipeline(const PipelineConfig& config, const RegionHierarchy& h,
                            const std::vector<VariableSeries>& store, const DisaggregationOptions& options,
                            unsigned jobs) {
  SeriesEnv env;
  for (const auto& s : store) {
    if (s.level() != SpatialLevel::LAU) continue;
    if (!env.emplace(s.id(), s).second) {
      throw Error(ErrorKind::DuplicateOutput, "two LAU series share the id '" + s.id() + "'");
    }
  }
  std::set<std::string> available;
  for (const auto& [id, _] : env) available.insert(id);
  const auto plans = plan_stages(config, available);

  PipelineResult result;
  std::set<std::string> skipped;
  const int last_stage = plans.empty() ? 0 : plans.back().stage;

  for (const auto& plan : plans) {
    for (const auto& wave : plan.waves) {
      std::vector<TaskReport> reports(wave.size());
      std::vector<std::optional<AllocationResult>> outputs(wave.size());
      parallel_for(wave.size(), jobs, [&](std::size_t i) {
        const auto& t = *wave[i];
        auto& rep = reports[i];
        rep.stage = plan.stage;
        rep.target_id = t.target_id;
        if (t.expr) {
          for (const auto& v : variables(*t.expr)) {
            if (skipped.contains(v)) {
              rep.status = "skipped";
              rep.reason = "depends on skipped task '" + v + "'";
              return;
            }
          }
        }
        auto src = std::find_if(store.begin(), store.end(), [&](const VariableSeries& s) {
          return s.id() == t.target_id && s.level() == t.source_level;
        });
        if (src == store.end()) {
          throw Error(ErrorKind::InvalidTask, "task '" + t.target_id + "': no " +
                                                  std::string(to_string(t.source_level)) + " source series");
        }
        DisaggregationTask task;
        task.target_id = t.target_id;
        task.source = *src;
        task.formula = t.expr;
        task.mode = t.mode;
        task.assignment_confidence = t.assignment_confidence.value_or(ConfidenceLevel::VERY_LOW);
        try {
          auto out = disaggregate(task, h, env, options);
          rep.status = "done";
          rep.max_relative_residual = out.max_relative_residual;
          rep.fallback_parents = out.fallback_parents;
          rep.fallback_children = static_cast<std::size_t>(std::count_if(
              out.provenance.begin(), out.provenance.end(), [](const auto& kv) { return kv.second.fallback; }));
          rep.n_outputs = out.series.observations.size();
          outputs[i] = std::move(out);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::MissingSourceValue) throw;
          rep.status = "skipped";
          rep.reason = e.what();
        }
      });
      for (std::size_t i = 0; i < wave.size(); ++i) {
        const auto& id = wave[i]->target_id;
        if (outputs[i]) {
          env.emplace(id, outputs[i]->series);
          if (plan.stage == last_stage) result.final_targets.push_back(id);
          result.outputs.emplace(id, std::move(*outputs[i]));
        } else {
          skipped.insert(id);
        }
        result.tasks.push_back(std::move(reports[i]));
      }
    }
  }
  return result;
}

nlohmann::json to_json(const PipelineResult& r) {
  nlohmann::json tasks = nlohmann::json::array();
  nlohmann::json skipped = nlohmann::json::array();
  double worst = 0.0;
  for (const auto& t : r.tasks) {
    nlohmann::json j{{"stage", t.stage}, {"target_id", t.target_id}, {"status", t.status}};
    if (t.status == "done") {
      j["max_relative_residual"] = t.max_relative_residual;
      j["fallback_parents"] = t.fallback_parents;
      j["fallback_children"] = t.fallback_children;
      j["n_outputs"] = t.n_outputs;
      worst = std::max(worst, t.max_relative_residual);
    } else {
      j["reason"] = t.reason;
      skipped.push_back({{"stage", t.stage}, {"target_id", t.target_id}, {"reason", t.reason}});
    }
    tasks.push_back(std::move(j));
  }
  return {{"tasks", tasks},
          {"skipped", skipped},
          {"final_targets", r.final_targets},
          {"max_relative_residual", worst}};
}

}  // namespace regio
