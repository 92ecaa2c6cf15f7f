#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "regio/data_store.hpp"
#include "regio/proxy_expr.hpp"
#include "regio/region_model.hpp"

namespace regio {

struct Allocation {
  std::map<std::string, double> values;
  bool fallback = false;  // proxy sum was zero; mass split uniformly
};

// child = parent * w / sum(w); uniform split when sum(w) == 0.
Allocation allocate(double parent_value, const std::map<std::string, double>& weights);

enum class AllocationMode { Allocate, Replicate };
enum class NormalizeScope { Country, Parent };

struct DisaggregationTask {
  std::string target_id;
  VariableSeries source;            // NUTS0, NUTS2 or NUTS3
  std::optional<ProxyExpr> formula; // nullopt with Replicate
  AllocationMode mode = AllocationMode::Allocate;
  ConfidenceLevel assignment_confidence = ConfidenceLevel::LOW;
  SpatialLevel output_level = SpatialLevel::LAU;
};

struct Provenance {
  std::string source_region;
  double share = 0.0;
  bool fallback = false;
};

struct AllocationResult {
  VariableSeries series;
  std::map<std::string, Provenance> provenance;
  double max_relative_residual = 0.0;  // over source regions
  std::size_t fallback_parents = 0;
};

struct DisaggregationOptions {
  NormalizeScope normalize_scope = NormalizeScope::Country;
  EvalOptions eval;
};

// Allocates every source region onto its output-level descendants. `env` supplies the formula's
// variables at the output level. Child confidence is the minimum of the assignment confidence,
// the proxy confidence at the child and the source observation's confidence; fallback children
// are VERY_LOW. Throws MissingSourceValue when a source observation is missing.
AllocationResult disaggregate(const DisaggregationTask& task, const RegionHierarchy& h, const SeriesEnv& env,
                              const DisaggregationOptions& options = {});

struct TaskSpec {
  std::string target_id;
  SpatialLevel source_level = SpatialLevel::NUTS3;
  std::optional<std::string> formula;  // resolved from proxy assignments when absent
  std::optional<ProxyExpr> expr;
  AllocationMode mode = AllocationMode::Allocate;
  std::optional<ConfidenceLevel> assignment_confidence;
};

struct StageSpec {
  int stage = 1;
  std::vector<TaskSpec> tasks;
};

struct PipelineConfig {
  std::vector<StageSpec> stages;
};

// {"stages": [{"stage": 1|2|3, "tasks": [{target_id, source_level, formula, assignment_confidence, mode}]}]}
PipelineConfig parse_pipeline_config(std::string_view json_text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Fills missing formula/confidence from proxy assignments and checks each task.
void resolve_tasks(PipelineConfig& config, const std::vector<ProxyAssignment>& assignments);

struct TaskReport {
  int stage = 0;
  std::string target_id;
  std::string status;  // "done" | "skipped"
  std::string reason;
  double max_relative_residual = 0.0;
  std::size_t fallback_parents = 0;
  std::size_t fallback_children = 0;
  std::size_t n_outputs = 0;
};

struct PipelineResult {
  std::map<std::string, AllocationResult> outputs;  // every produced target, all stages
  std::vector<std::string> final_targets;           // stage-3 target ids
  std::vector<TaskReport> tasks;
};

nlohmann::json to_json(const PipelineResult& r);

struct StagePlan {
  int stage = 0;
  // Tasks grouped into waves; a wave only depends on earlier waves and stages.
  std::vector<std::vector<const TaskSpec*>> waves;
};

// Dependency check without running anything. Every formula variable must be in `available`
// (output-level store series), an earlier stage's output, or a same-stage output (ordered into
// waves). Throws UnresolvedDependency, DependencyCycle or DuplicateOutput.
std::vector<StagePlan> plan_stages(const PipelineConfig& config, const std::set<std::string>& available);

// `store` holds every ingested (already imputed) series; those at LAU form the initial proxy
// environment and task sources are looked up by (target_id, source_level). Stages run in
// ascending order and register their outputs for later stages.
PipelineResult run_pipeline(const PipelineConfig& config, const RegionHierarchy& h,
                            const std::vector<VariableSeries>& store, const DisaggregationOptions& options = {},
                            unsigned jobs = 1);

}  // namespace regio
