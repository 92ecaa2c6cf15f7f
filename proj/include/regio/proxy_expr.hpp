#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "regio/data_store.hpp"

namespace regio {

// Composite proxy formula: weighted sums and products of max-normalized variables.
struct ProxyExpr {
  enum class Kind { Var, Const, Sum, Prod };

  Kind kind = Kind::Var;
  std::string name;                // Var
  double value = 0.0;              // Const
  std::vector<ProxyExpr> operands; // Sum, Prod (>= 2)

  static ProxyExpr var(std::string id);
  static ProxyExpr constant(double v);
  static ProxyExpr sum(std::vector<ProxyExpr> ops);
  static ProxyExpr prod(std::vector<ProxyExpr> ops);

  bool operator==(const ProxyExpr&) const = default;
};

// Grammar: expr := term ('+' term)* ; term := factor ('*' factor)* ;
//          factor := NUMBER | IDENT | '(' expr ')'
// Nested sums/products are flattened. Throws Error(SyntaxError) with a 1-based column.
ProxyExpr parse(std::string_view text);

// Fully parenthesized rendering; parse(print(e)) == e for any parsed e.
std::string print(const ProxyExpr& e);

// Referenced variable ids, sorted.
std::set<std::string> variables(const ProxyExpr& e);

using SeriesEnv = std::map<std::string, VariableSeries, std::less<>>;

struct EvalOptions {
  // Evaluate on raw values and max-normalize only the final composite.
  bool weights_on_raw = false;
};

// Divides by the maximum over all observations; zeros stay zero, all-zero stays all-zero.
VariableSeries normalize_series(const VariableSeries& s);

// Evaluates over `scope` (regions of one level). Each variable is max-normalized over the scope
// first. Result confidence per region is the minimum over the referenced variables.
VariableSeries evaluate(const ProxyExpr& e, const SeriesEnv& env, const std::vector<std::string>& scope,
                        const EvalOptions& options = {});

// Diesel passenger-car pollutant caps in g/km.
struct EmissionCaps {
  std::string tier;
  double co = 0.0;
  double hc_nox = 0.0;
  double pm = 0.0;
};

struct EmissionStandardWeights {
  std::string tier;
  double co_cap = 0.0;
  double hc_nox_cap = 0.0;
  double pm_cap = 0.0;
  double total = 0.0;
};

// The Euro 1 .. Euro 6e cap table.
std::vector<EmissionCaps> standard_euro_caps();

// Sums caps per tier in exact decimal arithmetic (micro-g/km). Fleet aliases are appended when
// absent: `euro_other` takes Euro 1's caps and `euro_5` takes the more lenient Euro 5a.
std::vector<EmissionStandardWeights> euro_weight_table(const std::vector<EmissionCaps>& caps);

// "w1 * <prefix>euro_1 + w2 * <prefix>euro_2 + ..." for the given fleet tiers.
std::string euro_fleet_formula(const std::vector<EmissionStandardWeights>& weights,
                               const std::vector<std::string>& fleet_tiers, std::string_view prefix);

struct ProxyAssignment {
  std::string target_id;
  SpatialLevel source_level = SpatialLevel::NUTS3;
  std::string formula;
  ProxyExpr expr;
  ConfidenceLevel assignment_confidence = ConfidenceLevel::LOW;
};

// JSON document: {"assignments": [{target_id, source_level, formula, assignment_confidence}]}
// or a bare array of the same objects.
std::vector<ProxyAssignment> parse_proxy_assignments(std::string_view json_text);
std::vector<ProxyAssignment> load_proxy_assignments(const std::filesystem::path& path);

}  // namespace regio
