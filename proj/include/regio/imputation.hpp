#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "regio/data_store.hpp"
#include "regio/proxy_expr.hpp"

namespace regio {

struct HyperParams {
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 4;

  void validate() const;  // throws InvalidHyperParams
  bool operator==(const HyperParams&) const = default;
};

// n_estimators x learning_rate x max_depth lattice.
std::vector<HyperParams> make_grid(const std::vector<int>& n_estimators, const std::vector<double>& learning_rates,
                                   const std::vector<int>& max_depths);
// {50,100,200} x {0.05,0.1,0.3} x {2,4,6}
std::vector<HyperParams> default_grid();

// Row-major feature matrix with a target column.
struct Dataset {
  std::vector<std::string> feature_ids;
  std::vector<std::vector<double>> features;
  std::vector<double> target;

  std::size_t size() const { return target.size(); }
  std::size_t n_features() const { return feature_ids.size(); }
  Dataset subset(std::span<const std::size_t> rows) const;
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool leaf() const { return feature < 0; }
  };

  RegressionTree() = default;
  explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  // Samples with x[feature] <= threshold go left.
  double predict(std::span<const double> x) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  int depth() const;

 private:
  std::vector<Node> nodes_;
};

// Greedy least-squares tree on `residuals`: best split by squared-error reduction, candidate
// thresholds at midpoints of consecutive distinct values, at least one sample per leaf.
RegressionTree fit_tree(const Dataset& data, std::span<const double> residuals, int max_depth);

struct TrainedEnsemble {
  double base_prediction = 0.0;
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  std::vector<std::string> feature_ids;
  HyperParams params;

  // base_prediction + learning_rate * sum of tree outputs
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Dataset& data) const;
};

TrainedEnsemble fit_gbrt(const Dataset& train, const HyperParams& hp);

double rmse(std::span<const double> pred, std::span<const double> actual);
// 1 - SSE/SST; throws UndefinedR2 when `actual` is constant.
double r2(std::span<const double> pred, std::span<const double> actual);

// R^2 > 0.8 HIGH, > 0.5 MEDIUM, > 0.2 LOW, otherwise VERY_LOW.
ConfidenceLevel rate_confidence(double r2_val);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Seeded Fisher-Yates permutation of 0..n-1 over mt19937_64.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// ceil(fraction * n) rows to validation. Throws InsufficientData below 10 rows.
HoldoutSplit split_holdout(std::size_t n, double fraction, std::uint64_t seed);

// Fold index per row: position in the seeded permutation modulo k.
std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t k, std::uint64_t seed);

struct GridSearchResult {
  HyperParams best;
  double best_cv_rmse = 0.0;
  std::vector<std::pair<HyperParams, double>> scores;  // grid order
};

// Mean held-fold RMSE per grid point; ties go to smaller n_estimators, then max_depth, then
// learning_rate. `jobs` > 1 evaluates grid points concurrently.
GridSearchResult grid_search_cv(const Dataset& train, const std::vector<HyperParams>& grid, std::size_t k,
                                std::uint64_t seed, unsigned jobs = 1);

// Constant removal, |r| >= 0.9 deduplication in id order, then |corr with target| >= threshold on
// target-present rows. Result ordered by descending |corr|, ties by id. Throws NoPredictors.
std::vector<std::string> select_predictors(const VariableSeries& target, const std::vector<VariableSeries>& candidates,
                                           double threshold);

enum class ImputationMethod { ENSEMBLE, MEAN_FALLBACK };
std::string_view to_string(ImputationMethod m);

struct ImputationConfig {
  std::vector<double> thresholds{0.1, 0.5};
  std::vector<HyperParams> grid = default_grid();
  std::uint64_t seed = 42;
  std::size_t folds = 5;
  double holdout_fraction = 0.1;
  unsigned jobs = 1;
};

// One threshold setup's outcome.
struct SetupResult {
  double threshold = 0.0;
  std::vector<std::string> predictors;
  std::optional<HyperParams> best_hyperparams;
  std::optional<double> cv_rmse;
  std::optional<double> rmse_train, r2_train, rmse_val, r2_val;
  std::string failure;  // empty when the setup produced a model
};

struct ImputationReport {
  std::string variable_id;
  std::optional<double> threshold_used;
  std::vector<std::string> selected_predictors;
  std::optional<HyperParams> best_hyperparams;
  std::optional<double> rmse_train, r2_train, rmse_val, r2_val;
  ImputationMethod method = ImputationMethod::ENSEMBLE;
  ConfidenceLevel confidence = ConfidenceLevel::VERY_HIGH;
  std::size_t n_imputed = 0;
  std::string fallback_reason;
  std::vector<std::string> excluded_candidates;
  std::vector<SetupResult> setups;
};

nlohmann::json to_json(const ImputationReport& r);

struct ImputationResult {
  VariableSeries series;
  ImputationReport report;
  std::optional<TrainedEnsemble> model;
};

// Fills the target's missing observations. Candidates incomplete on the target's regions are
// excluded. Learner failures fall back to the present-value mean at LOW confidence.
ImputationResult impute_series(const VariableSeries& target, const std::vector<VariableSeries>& candidates,
                               const ImputationConfig& config = {});

// Applies a trained model to another country's feature series. Outputs are VERY_LOW until
// graded against external references. Throws MissingFeature.
VariableSeries cross_country_predict(const TrainedEnsemble& model, const SeriesEnv& foreign,
                                     const std::vector<std::string>& regions, const SeriesMeta& meta);

}  // namespace regio
