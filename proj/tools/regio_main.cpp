// regio: batch driver for ingest -> impute -> disaggregate -> validate over a project directory.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "regio/error.hpp"
#include "regio/project.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Proxy-based spatial disaggregation of national energy and emission totals"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;

  const std::map<std::string, int (*)(const regio::ProjectConfig&, std::ostream&)> commands{
      {"check", &regio::cmd_check},
      {"impute", &regio::cmd_impute},
      {"disaggregate", &regio::cmd_disaggregate},
      {"validate", &regio::cmd_validate},
      {"run", &regio::cmd_run},
  };
  const std::map<std::string, std::string> help{
      {"check", "Validate hierarchy, series, formulas and stage ordering"},
      {"impute", "Fill missing proxy values and write imputation reports"},
      {"disaggregate", "Run the staged disaggregation down to LAU"},
      {"validate", "Write deviation reports against reference inventories"},
      {"run", "check, impute, disaggregate and validate in order"},
  };
  for (const auto& [name, _] : commands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "Project config JSON")->required();
    sub->add_option("--seed", seed, "Override the configured seed (takes precedence over REGIO_SEED)");
    sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  }

  CLI11_PARSE(app, argc, argv);

  regio::ProjectConfig cfg;
  try {
    cfg = regio::load_project_config(config_path);
  } catch (const regio::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return regio::kExitInvalid;
  }
  if (const char* env = std::getenv("REGIO_SEED"); env && *env) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "error: REGIO_SEED must be a non-negative integer\n";
      return regio::kExitInvalid;
    }
  }
  if (seed) cfg.seed = *seed;
  cfg.imputation.seed = cfg.seed;
  cfg.jobs = jobs;

  for (const auto& [name, fn] : commands) {
    if (app.got_subcommand(name)) return fn(cfg, std::cout);
  }
  return regio::kExitInvalid;
}
