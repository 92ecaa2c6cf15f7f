#include "regio/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "regio/error.hpp"
#include "regio/parallel.hpp"

namespace regio {

void HyperParams::validate() const {
  if (n_estimators < 0) throw Error(ErrorKind::InvalidHyperParams, "n_estimators must be >= 0");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw Error(ErrorKind::InvalidHyperParams, "learning_rate must lie in (0, 1]");
  }
  if (max_depth < 1) throw Error(ErrorKind::InvalidHyperParams, "max_depth must be >= 1");
}

std::vector<HyperParams> make_grid(const std::vector<int>& n_estimators, const std::vector<double>& learning_rates,
                                   const std::vector<int>& max_depths) {
  std::vector<HyperParams> grid;
  for (int n : n_estimators) {
    for (double lr : learning_rates) {
      for (int d : max_depths) {
        HyperParams hp{n, lr, d};
        hp.validate();
        grid.push_back(hp);
      }
    }
  }
  return grid;
}

std::vector<HyperParams> default_grid() { return make_grid({50, 100, 200}, {0.05, 0.1, 0.3}, {2, 4, 6}); }

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.feature_ids = feature_ids;
  out.features.reserve(rows.size());
  out.target.reserve(rows.size());
  for (auto r : rows) {
    out.features.push_back(features.at(r));
    out.target.push_back(target.at(r));
  }
  return out;
}

double RegressionTree::predict(std::span<const double> x) const {
  if (nodes_.empty()) return 0.0;
  int i = 0;
  while (!nodes_[i].leaf()) {
    const auto& n = nodes_[i];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[i].value;
}

int RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    best = std::max(best, d[i]);
    if (!n.leaf()) {
      d[static_cast<std::size_t>(n.left)] = d[i] + 1;
      d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

struct SplitCandidate {
  double score = -std::numeric_limits<double>::infinity();  // sL^2/nL + sR^2/nR
  int feature = -1;
  double threshold = 0.0;
};

// Sample order per feature, ascending by value then index.
std::vector<std::vector<std::size_t>> presort(const Dataset& data) {
  std::vector<std::vector<std::size_t>> order(data.n_features());
  for (std::size_t f = 0; f < data.n_features(); ++f) {
    auto& idx = order[f];
    idx.resize(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return data.features[a][f] < data.features[b][f]; });
  }
  return order;
}

// Level-wise exact greedy growth: one pass over each presorted feature column per level.
RegressionTree grow(const Dataset& data, const std::vector<std::vector<std::size_t>>& order,
                    std::span<const double> residuals, int max_depth) {
  const std::size_t n = data.size();
  std::vector<RegressionTree::Node> nodes;
  if (n == 0) return RegressionTree({RegressionTree::Node{}});

  struct Stats {
    double sum = 0.0;
    double sumsq = 0.0;
    std::size_t count = 0;
  };

  std::vector<int> node_of(n, 0);
  nodes.push_back({});
  std::vector<int> active{0};
  std::vector<Stats> stats(1);
  for (std::size_t i = 0; i < n; ++i) {
    stats[0].sum += residuals[i];
    stats[0].sumsq += residuals[i] * residuals[i];
    ++stats[0].count;
  }

  for (int depth = 0; depth < max_depth && !active.empty(); ++depth) {
    // slot per node id; only active ones are used
    std::vector<int> slot(nodes.size(), -1);
    for (std::size_t a = 0; a < active.size(); ++a) slot[static_cast<std::size_t>(active[a])] = static_cast<int>(a);

    std::vector<SplitCandidate> best(active.size());
    struct Running {
      double sum = 0.0;
      std::size_t count = 0;
      double last = 0.0;
    };
    for (std::size_t f = 0; f < data.n_features(); ++f) {
      std::vector<Running> run(active.size());
      for (std::size_t i : order[f]) {
        const int s = slot[static_cast<std::size_t>(node_of[i])];
        if (s < 0) continue;
        auto& r = run[static_cast<std::size_t>(s)];
        const double x = data.features[i][f];
        if (r.count > 0 && x > r.last) {
          const auto& tot = stats[static_cast<std::size_t>(active[static_cast<std::size_t>(s)])];
          const double nl = static_cast<double>(r.count);
          const double nr = static_cast<double>(tot.count - r.count);
          const double sr = tot.sum - r.sum;
          const double score = r.sum * r.sum / nl + sr * sr / nr;
          auto& b = best[static_cast<std::size_t>(s)];
          if (score > b.score) {
            double mid = r.last + (x - r.last) / 2.0;
            if (!(mid < x)) mid = r.last;
            b = {score, static_cast<int>(f), mid};
          }
        }
        r.sum += residuals[i];
        ++r.count;
        r.last = x;
      }
    }

    std::vector<int> next_active;
    std::vector<int> left_of(nodes.size(), -1);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const int id = active[a];
      const auto& tot = stats[static_cast<std::size_t>(id)];
      const auto& b = best[a];
      const double cnt = static_cast<double>(tot.count);
      const double node_sse = std::max(0.0, tot.sumsq - tot.sum * tot.sum / cnt);
      const double gain = b.score - tot.sum * tot.sum / cnt;
      if (b.feature < 0 || node_sse <= 0.0 || !(gain > 1e-12 * node_sse)) continue;
      auto& node = nodes[static_cast<std::size_t>(id)];
      node.feature = b.feature;
      node.threshold = b.threshold;
      node.left = static_cast<int>(nodes.size());
      node.right = node.left + 1;
      left_of[static_cast<std::size_t>(id)] = node.left;
      nodes.push_back({});
      nodes.push_back({});
      stats.resize(nodes.size());
      next_active.push_back(node.left);
      next_active.push_back(node.right);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int id = node_of[i];
      if (left_of[static_cast<std::size_t>(id)] < 0) continue;
      const auto& node = nodes[static_cast<std::size_t>(id)];
      const int child = data.features[i][static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
      node_of[i] = child;
      auto& st = stats[static_cast<std::size_t>(child)];
      st.sum += residuals[i];
      st.sumsq += residuals[i] * residuals[i];
      ++st.count;
    }
    active = std::move(next_active);
  }

  // Leaf means, computed directly from membership for accuracy.
  std::vector<double> sum(nodes.size(), 0.0);
  std::vector<std::size_t> count(nodes.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[static_cast<std::size_t>(node_of[i])] += residuals[i];
    ++count[static_cast<std::size_t>(node_of[i])];
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].leaf() && count[k] > 0) nodes[k].value = sum[k] / static_cast<double>(count[k]);
  }
  return RegressionTree(std::move(nodes));
}

}  // namespace

RegressionTree fit_tree(const Dataset& data, std::span<const double> residuals, int max_depth) {
  if (residuals.size() != data.size()) throw Error(ErrorKind::LengthMismatch, "residuals do not match rows");
  return grow(data, presort(data), residuals, max_depth);
}

double TrainedEnsemble::predict(std::span<const double> x) const {
  double acc = 0.0;
  for (const auto& t : trees) acc += t.predict(x);
  return base_prediction + learning_rate * acc;
}

std::vector<double> TrainedEnsemble::predict(const Dataset& data) const {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& row : data.features) out.push_back(predict(row));
  return out;
}

TrainedEnsemble fit_gbrt(const Dataset& train, const HyperParams& hp) {
  hp.validate();
  if (train.size() == 0) throw Error(ErrorKind::InsufficientData, "empty training set");
  TrainedEnsemble model;
  model.learning_rate = hp.learning_rate;
  model.feature_ids = train.feature_ids;
  model.params = hp;
  model.base_prediction =
      std::accumulate(train.target.begin(), train.target.end(), 0.0) / static_cast<double>(train.size());

  const auto order = presort(train);
  std::vector<double> pred(train.size(), model.base_prediction);
  std::vector<double> residuals(train.size());
  model.trees.reserve(static_cast<std::size_t>(hp.n_estimators));
  for (int m = 0; m < hp.n_estimators; ++m) {
    for (std::size_t i = 0; i < train.size(); ++i) residuals[i] = train.target[i] - pred[i];
    auto tree = grow(train, order, residuals, hp.max_depth);
    for (std::size_t i = 0; i < train.size(); ++i) pred[i] += hp.learning_rate * tree.predict(train.features[i]);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double rmse(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) throw Error(ErrorKind::LengthMismatch, "rmse: length mismatch");
  if (pred.empty()) throw Error(ErrorKind::TooFewValues, "rmse of empty vectors");
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sse += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return std::sqrt(sse / static_cast<double>(pred.size()));
}

double r2(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) throw Error(ErrorKind::LengthMismatch, "r2: length mismatch");
  if (pred.empty()) throw Error(ErrorKind::TooFewValues, "r2 of empty vectors");
  if (std::all_of(actual.begin(), actual.end(), [&](double v) { return v == actual.front(); })) {
    throw Error(ErrorKind::UndefinedR2, "actual values are constant");
  }
  const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(actual.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sse += (pred[i] - actual[i]) * (pred[i] - actual[i]);
    sst += (actual[i] - mean) * (actual[i] - mean);
  }
  return 1.0 - sse / sst;
}

ConfidenceLevel rate_confidence(double r2_val) {
  if (r2_val > 0.8) return ConfidenceLevel::HIGH;
  if (r2_val > 0.5) return ConfidenceLevel::MEDIUM;
  if (r2_val > 0.2) return ConfidenceLevel::LOW;
  return ConfidenceLevel::VERY_LOW;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

HoldoutSplit split_holdout(std::size_t n, double fraction, std::uint64_t seed) {
  if (n < 10) throw Error(ErrorKind::InsufficientData, std::to_string(n) + " complete rows (need >= 10)");
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorKind::ConfigError, "holdout fraction must lie in (0,1)");
  const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  auto perm = seeded_permutation(n, seed);
  HoldoutSplit s;
  s.validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<std::size_t> kfold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::ConfigError, "k-fold needs k >= 2");
  if (n < k) throw Error(ErrorKind::InsufficientData, std::to_string(n) + " rows for " + std::to_string(k) + " folds");
  auto perm = seeded_permutation(n, seed);
  std::vector<std::size_t> fold(n);
  for (std::size_t p = 0; p < n; ++p) fold[perm[p]] = p % k;
  return fold;
}

GridSearchResult grid_search_cv(const Dataset& train, const std::vector<HyperParams>& grid, std::size_t k,
                                std::uint64_t seed, unsigned jobs) {
  if (grid.empty()) throw Error(ErrorKind::ConfigError, "empty hyperparameter grid");
  const auto fold = kfold_assignment(train.size(), k, seed);
  std::vector<Dataset> fit_sets(k), held_sets(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < train.size(); ++i) (fold[i] == f ? out : in).push_back(i);
    fit_sets[f] = train.subset(in);
    held_sets[f] = train.subset(out);
  }

  std::vector<double> scores(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t g) {
    double total = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      auto model = fit_gbrt(fit_sets[f], grid[g]);
      total += rmse(model.predict(held_sets[f]), held_sets[f].target);
    }
    scores[g] = total / static_cast<double>(k);
  });

  GridSearchResult result;
  std::size_t best = 0;
  auto key = [&](std::size_t g) {
    return std::make_tuple(scores[g], grid[g].n_estimators, grid[g].max_depth, grid[g].learning_rate);
  };
  for (std::size_t g = 0; g < grid.size(); ++g) {
    result.scores.emplace_back(grid[g], scores[g]);
    if (key(g) < key(best)) best = g;
  }
  result.best = grid[best];
  result.best_cv_rmse = scores[best];
  return result;
}

namespace {

std::vector<double> column(const VariableSeries& s, const std::vector<std::string>& regions) {
  std::vector<double> out;
  out.reserve(regions.size());
  for (const auto& r : regions) {
    auto it = s.observations.find(r);
    if (it == s.observations.end() || it->second.missing()) {
      throw Error(ErrorKind::MissingValues, "series '" + s.id() + "' has no value for region '" + r + "'");
    }
    out.push_back(*it->second.value);
  }
  return out;
}

}  // namespace

std::vector<std::string> select_predictors(const VariableSeries& target, const std::vector<VariableSeries>& candidates,
                                           double threshold) {
  const auto all_rows = target.regions();
  std::vector<std::string> present;
  for (const auto& [r, o] : target.observations) {
    if (!o.missing()) present.push_back(r);
  }
  if (present.size() < 2) throw Error(ErrorKind::InsufficientData, "fewer than 2 present target values");

  std::vector<const VariableSeries*> sorted;
  for (const auto& c : candidates) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id() < b->id(); });

  // 1. non-informative
  std::vector<std::pair<const VariableSeries*, std::vector<double>>> informative;
  for (auto* c : sorted) {
    auto values = column(*c, all_rows);
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) continue;
    informative.emplace_back(c, std::move(values));
  }

  // 2. near-duplicates: keep the earlier id
  std::vector<std::pair<const VariableSeries*, std::vector<double>>> kept;
  for (auto& cand : informative) {
    bool duplicate = false;
    for (const auto& k : kept) {
      if (std::abs(pearson(cand.second, k.second).value_or(0.0)) >= 0.9) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(std::move(cand));
  }

  // 3. relevance to the target
  const auto y = column(target, present);
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [c, _] : kept) {
    const double corr = std::abs(pearson(column(*c, present), y).value_or(0.0));
    if (corr >= threshold) ranked.emplace_back(corr, c->id());
  }
  if (ranked.empty()) {
    throw Error(ErrorKind::NoPredictors, "no candidate for '" + target.id() + "' reaches |r| >= " +
                                             std::to_string(threshold));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& [_, id] : ranked) out.push_back(std::move(id));
  return out;
}

std::string_view to_string(ImputationMethod m) {
  return m == ImputationMethod::ENSEMBLE ? "ENSEMBLE" : "MEAN_FALLBACK";
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json hp_json(const std::optional<HyperParams>& hp) {
  if (!hp) return nullptr;
  return {{"n_estimators", hp->n_estimators}, {"learning_rate", hp->learning_rate}, {"max_depth", hp->max_depth}};
}

}  // namespace

nlohmann::json to_json(const ImputationReport& r) {
  nlohmann::json setups = nlohmann::json::array();
  for (const auto& s : r.setups) {
    setups.push_back({{"threshold", s.threshold},
                      {"predictors", s.predictors},
                      {"best_hyperparams", hp_json(s.best_hyperparams)},
                      {"cv_rmse", opt(s.cv_rmse)},
                      {"rmse_train", opt(s.rmse_train)},
                      {"r2_train", opt(s.r2_train)},
                      {"rmse_val", opt(s.rmse_val)},
                      {"r2_val", opt(s.r2_val)},
                      {"failure", s.failure.empty() ? nlohmann::json(nullptr) : nlohmann::json(s.failure)}});
  }
  return {{"variable_id", r.variable_id},
          {"threshold_used", opt(r.threshold_used)},
          {"selected_predictors", r.selected_predictors},
          {"best_hyperparams", hp_json(r.best_hyperparams)},
          {"rmse_train", opt(r.rmse_train)},
          {"r2_train", opt(r.r2_train)},
          {"rmse_val", opt(r.rmse_val)},
          {"r2_val", opt(r.r2_val)},
          {"method", std::string(to_string(r.method))},
          {"confidence", std::string(to_string(r.confidence))},
          {"n_imputed", r.n_imputed},
          {"fallback_reason", r.fallback_reason.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.fallback_reason)},
          {"excluded_candidates", r.excluded_candidates},
          {"setups", setups}};
}

namespace {

Dataset make_dataset(const std::vector<std::string>& predictors, const std::map<std::string, const VariableSeries*>& by_id,
                     const VariableSeries* target, const std::vector<std::string>& regions) {
  Dataset d;
  d.feature_ids = predictors;
  std::vector<std::vector<double>> cols;
  for (const auto& p : predictors) cols.push_back(column(*by_id.at(p), regions));
  d.features.assign(regions.size(), std::vector<double>(predictors.size()));
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (std::size_t j = 0; j < predictors.size(); ++j) d.features[i][j] = cols[j][i];
  }
  if (target) d.target = column(*target, regions);
  return d;
}

struct Setup {
  SetupResult result;
  std::optional<TrainedEnsemble> model;
};

Setup run_setup(double threshold, const VariableSeries& target, const std::vector<VariableSeries>& candidates,
                const std::map<std::string, const VariableSeries*>& by_id, const std::vector<std::string>& train_rows,
                const std::vector<std::string>& val_rows, const ImputationConfig& config) {
  Setup s;
  s.result.threshold = threshold;
  try {
    s.result.predictors = select_predictors(target, candidates, threshold);
    const auto train = make_dataset(s.result.predictors, by_id, &target, train_rows);
    const auto val = make_dataset(s.result.predictors, by_id, &target, val_rows);
    auto search = grid_search_cv(train, config.grid, config.folds, config.seed, config.jobs);
    s.result.best_hyperparams = search.best;
    s.result.cv_rmse = search.best_cv_rmse;
    auto model = fit_gbrt(train, search.best);
    const auto p_train = model.predict(train);
    const auto p_val = model.predict(val);
    s.result.rmse_train = rmse(p_train, train.target);
    s.result.r2_train = r2(p_train, train.target);
    s.result.rmse_val = rmse(p_val, val.target);
    s.result.r2_val = r2(p_val, val.target);
    s.model = std::move(model);
  } catch (const Error& e) {
    s.result.failure = e.what();
    s.model.reset();
  }
  return s;
}

}  // namespace

ImputationResult impute_series(const VariableSeries& target, const std::vector<VariableSeries>& candidates,
                               const ImputationConfig& config) {
  ImputationResult out{target, {}, std::nullopt};
  auto& report = out.report;
  report.variable_id = target.id();
  const auto missing = target.missing_regions();
  if (missing.empty()) return out;

  std::vector<VariableSeries> usable;
  for (const auto& c : candidates) {
    if (c.id() == target.id()) continue;
    const bool complete = std::all_of(target.observations.begin(), target.observations.end(), [&](const auto& kv) {
      auto it = c.observations.find(kv.first);
      return it != c.observations.end() && !it->second.missing();
    });
    if (complete) usable.push_back(c);
    else report.excluded_candidates.push_back(c.id());
  }
  std::map<std::string, const VariableSeries*> by_id;
  for (const auto& c : usable) by_id[c.id()] = &c;

  std::vector<std::string> present;
  std::vector<double> present_values;
  for (const auto& [r, o] : target.observations) {
    if (!o.missing()) {
      present.push_back(r);
      present_values.push_back(*o.value);
    }
  }

  std::optional<Setup> winner;
  try {
    const auto split = split_holdout(present.size(), config.holdout_fraction, config.seed);
    std::vector<std::string> train_rows, val_rows;
    for (auto i : split.train) train_rows.push_back(present[i]);
    for (auto i : split.validation) val_rows.push_back(present[i]);
    for (double threshold : config.thresholds) {
      auto s = run_setup(threshold, target, usable, by_id, train_rows, val_rows, config);
      report.setups.push_back(s.result);
      if (!s.model) continue;
      const auto& r = s.result;
      if (!winner || *r.r2_val > *winner->result.r2_val ||
          (*r.r2_val == *winner->result.r2_val && *r.rmse_val < *winner->result.rmse_val)) {
        winner = std::move(s);
      }
    }
    if (!winner) {
      report.fallback_reason = report.setups.empty() ? "no threshold setups configured"
                                                     : "no setup produced a model: " + report.setups.front().failure;
    }
  } catch (const Error& e) {
    report.fallback_reason = e.what();
  }

  if (winner) {
    const auto& r = winner->result;
    report.threshold_used = r.threshold;
    report.selected_predictors = r.predictors;
    report.best_hyperparams = r.best_hyperparams;
    report.rmse_train = r.rmse_train;
    report.r2_train = r.r2_train;
    report.rmse_val = r.rmse_val;
    report.r2_val = r.r2_val;
    if (*r.r2_val <= 0.0) report.fallback_reason = "best validation R2 <= 0";
  }

  const bool nonnegative = std::all_of(present_values.begin(), present_values.end(), [](double v) { return v >= 0.0; });
  if (!report.fallback_reason.empty()) {
    report.method = ImputationMethod::MEAN_FALLBACK;
    report.confidence = ConfidenceLevel::LOW;
    const double mean = present_values.empty()
                            ? 0.0
                            : std::accumulate(present_values.begin(), present_values.end(), 0.0) /
                                  static_cast<double>(present_values.size());
    for (const auto& r : missing) out.series.observations[r] = Observation{mean, ConfidenceLevel::LOW};
  } else {
    report.method = ImputationMethod::ENSEMBLE;
    report.confidence = rate_confidence(*report.r2_val);
    const auto rows = make_dataset(winner->result.predictors, by_id, nullptr, missing);
    for (std::size_t i = 0; i < missing.size(); ++i) {
      double v = winner->model->predict(rows.features[i]);
      if (nonnegative) v = std::max(v, 0.0);
      out.series.observations[missing[i]] = Observation{v, report.confidence};
    }
    out.model = std::move(winner->model);
  }
  report.n_imputed = missing.size();
  return out;
}

VariableSeries cross_country_predict(const TrainedEnsemble& model, const SeriesEnv& foreign,
                                     const std::vector<std::string>& regions, const SeriesMeta& meta) {
  std::vector<const VariableSeries*> cols;
  for (const auto& f : model.feature_ids) {
    auto it = foreign.find(f);
    if (it == foreign.end()) throw Error(ErrorKind::MissingFeature, "feature '" + f + "' is not provided");
    cols.push_back(&it->second);
  }
  VariableSeries out{meta, {}};
  std::vector<double> x(cols.size());
  for (const auto& r : regions) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& o = cols[j]->at(r);
      if (o.missing()) {
        throw Error(ErrorKind::MissingFeature, "feature '" + cols[j]->id() + "' is missing at '" + r + "'");
      }
      x[j] = *o.value;
    }
    out.observations[r] = Observation{model.predict(x), ConfidenceLevel::VERY_LOW};
  }
  return out;
}

}  // namespace regio
