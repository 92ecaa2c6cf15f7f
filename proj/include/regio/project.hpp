#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "regio/data_store.hpp"
#include "regio/disaggregation.hpp"
#include "regio/imputation.hpp"

namespace regio {

enum class VariableRole { Proxy, Target };

struct RegistryEntry {
  SeriesMeta meta;  // meta.description holds the human-readable name
  VariableRole role = VariableRole::Proxy;
  std::string file;  // relative to the series directory
  std::size_t line = 0;
};

// CSV `variable_id,name,unit,level,country_scope,role,file`.
std::vector<RegistryEntry> load_registry(const std::filesystem::path& path);

struct Comparison {
  enum class Kind { Aggregate, Pairs };
  std::string name;
  Kind kind = Kind::Pairs;
  std::string target_id;        // Aggregate
  SpatialLevel level = SpatialLevel::NUTS2;
  std::string file;             // reference or pairs CSV, relative to reference_dir
  std::string unit;
};

struct ProjectConfig {
  std::filesystem::path config_path;
  std::filesystem::path hierarchy;
  std::filesystem::path registry;
  std::filesystem::path series_dir;
  std::optional<std::filesystem::path> proxy_assignments;
  std::filesystem::path pipeline;
  std::filesystem::path reference_dir;
  std::filesystem::path output_dir;
  std::uint64_t seed = 42;
  bool weights_on_raw = false;
  NormalizeScope normalize_scope = NormalizeScope::Country;
  ImputationConfig imputation;
  std::vector<Comparison> comparisons;
  unsigned jobs = 1;
};

// Paths in the document are resolved against the config file's directory.
ProjectConfig load_project_config(const std::filesystem::path& path);

enum ExitCode : int { kExitOk = 0, kExitInvalid = 2, kExitIo = 3 };

int cmd_check(const ProjectConfig& cfg, std::ostream& out);
int cmd_impute(const ProjectConfig& cfg, std::ostream& out);
int cmd_disaggregate(const ProjectConfig& cfg, std::ostream& out);
int cmd_validate(const ProjectConfig& cfg, std::ostream& out);
int cmd_run(const ProjectConfig& cfg, std::ostream& out);

}  // namespace regio
