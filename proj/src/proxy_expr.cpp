#include "regio/proxy_expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "regio/error.hpp"

namespace regio {

ProxyExpr ProxyExpr::var(std::string id) {
  ProxyExpr e;
  e.kind = Kind::Var;
  e.name = std::move(id);
  return e;
}

ProxyExpr ProxyExpr::constant(double v) {
  ProxyExpr e;
  e.kind = Kind::Const;
  e.value = v;
  return e;
}

ProxyExpr ProxyExpr::sum(std::vector<ProxyExpr> ops) {
  ProxyExpr e;
  e.kind = Kind::Sum;
  e.operands = std::move(ops);
  return e;
}

ProxyExpr ProxyExpr::prod(std::vector<ProxyExpr> ops) {
  ProxyExpr e;
  e.kind = Kind::Prod;
  e.operands = std::move(ops);
  return e;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ProxyExpr run() {
    skip_ws();
    if (pos_ == text_.size()) fail("empty formula");
    auto e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    if (e.kind == ProxyExpr::Kind::Const) fail_at(0, "a bare number is not a proxy (weight without a variable)");
    check_weights(e);
    return e;
  }

 private:
  [[noreturn]] void fail_at(std::size_t pos, const std::string& what) const {
    throw Error(ErrorKind::SyntaxError, "column " + std::to_string(pos + 1) + ": " + what);
  }
  [[noreturn]] void fail(const std::string& what) const { fail_at(pos_, what); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  ProxyExpr expr() {
    std::vector<ProxyExpr> ops;
    append_flat(ops, term(), ProxyExpr::Kind::Sum);
    while (eat('+')) append_flat(ops, term(), ProxyExpr::Kind::Sum);
    return ops.size() == 1 ? std::move(ops.front()) : ProxyExpr::sum(std::move(ops));
  }

  ProxyExpr term() {
    std::vector<ProxyExpr> ops;
    append_flat(ops, factor(), ProxyExpr::Kind::Prod);
    while (eat('*')) append_flat(ops, factor(), ProxyExpr::Kind::Prod);
    return ops.size() == 1 ? std::move(ops.front()) : ProxyExpr::prod(std::move(ops));
  }

  static void append_flat(std::vector<ProxyExpr>& ops, ProxyExpr e, ProxyExpr::Kind kind) {
    if (e.kind == kind) {
      for (auto& o : e.operands) ops.push_back(std::move(o));
    } else {
      ops.push_back(std::move(e));
    }
  }

  ProxyExpr factor() {
    skip_ws();
    if (pos_ == text_.size()) fail("unexpected end of formula");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto e = expr();
      if (!eat(')')) {
        skip_ws();
        fail(pos_ == text_.size() ? "missing ')'" : "expected ')'");
      }
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::islower(static_cast<unsigned char>(c)) || c == '_') return ident();
    if (std::isupper(static_cast<unsigned char>(c))) fail("identifiers must be snake_case");
    fail("unexpected '" + std::string(1, c) + "'");
  }

  ProxyExpr number() {
    const auto start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      const auto frac = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == frac) fail_at(start, "malformed number");
    }
    if (pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      fail("malformed number");
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc{} || !std::isfinite(v)) fail_at(start, "malformed number");
    return ProxyExpr::constant(v);
  }

  ProxyExpr ident() {
    const auto start = pos_;
    while (pos_ < text_.size()) {
      const auto ch = static_cast<unsigned char>(text_[pos_]);
      if (std::islower(ch) || std::isdigit(ch) || ch == '_') {
        ++pos_;
      } else if (std::isupper(ch)) {
        fail("identifiers must be snake_case");
      } else {
        break;
      }
    }
    return ProxyExpr::var(std::string(text_.substr(start, pos_ - start)));
  }

  // Constants are scalar weights: only legal inside a product that also holds a non-constant.
  void check_weights(const ProxyExpr& e) const {
    if (e.kind == ProxyExpr::Kind::Sum) {
      for (const auto& o : e.operands) {
        if (o.kind == ProxyExpr::Kind::Const) fail_at(0, "a bare number cannot be a sum operand");
        check_weights(o);
      }
    } else if (e.kind == ProxyExpr::Kind::Prod) {
      bool has_var = false;
      for (const auto& o : e.operands) {
        if (o.kind != ProxyExpr::Kind::Const) has_var = true;
        check_weights(o);
      }
      if (!has_var) fail_at(0, "a product of numbers has no variable");
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string shortest(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  std::string s = buf;
  // The grammar has no exponent form.
  if (s.find('e') != std::string::npos) {
    std::snprintf(buf, sizeof buf, "%.17f", v);
    s = buf;
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

void collect(const ProxyExpr& e, std::set<std::string>& out) {
  if (e.kind == ProxyExpr::Kind::Var) out.insert(e.name);
  for (const auto& o : e.operands) collect(o, out);
}

}  // namespace

ProxyExpr parse(std::string_view text) { return Parser(text).run(); }

std::string print(const ProxyExpr& e) {
  switch (e.kind) {
    case ProxyExpr::Kind::Var: return e.name;
    case ProxyExpr::Kind::Const: return shortest(e.value);
    case ProxyExpr::Kind::Sum:
    case ProxyExpr::Kind::Prod: {
      const char* sep = e.kind == ProxyExpr::Kind::Sum ? " + " : " * ";
      std::string out = "(";
      for (std::size_t i = 0; i < e.operands.size(); ++i) {
        if (i) out += sep;
        out += print(e.operands[i]);
      }
      return out + ")";
    }
  }
  return {};
}

std::set<std::string> variables(const ProxyExpr& e) {
  std::set<std::string> out;
  collect(e, out);
  return out;
}

VariableSeries normalize_series(const VariableSeries& s) {
  double max = 0.0;
  for (const auto& [region, o] : s.observations) {
    if (o.missing()) {
      throw Error(ErrorKind::MissingValues, "series '" + s.id() + "' is missing region '" + region + "'");
    }
    if (*o.value < 0.0) {
      throw Error(ErrorKind::NegativeProxyValue, "series '" + s.id() + "' has negative value at '" + region + "'");
    }
    max = std::max(max, *o.value);
  }
  VariableSeries out = s;
  out.meta.unit = "1";
  for (auto& [_, o] : out.observations) o.value = max > 0.0 ? *o.value / max : 0.0;
  return out;
}

namespace {

struct Column {
  std::vector<double> values;  // aligned with scope
  const VariableSeries* series = nullptr;
};

std::vector<double> eval_node(const ProxyExpr& e, const std::map<std::string, Column>& cols, std::size_t n) {
  switch (e.kind) {
    case ProxyExpr::Kind::Var: return cols.at(e.name).values;
    case ProxyExpr::Kind::Const: return std::vector<double>(n, e.value);
    case ProxyExpr::Kind::Sum: {
      std::vector<double> acc(n, 0.0);
      for (const auto& o : e.operands) {
        auto v = eval_node(o, cols, n);
        for (std::size_t i = 0; i < n; ++i) acc[i] += v[i];
      }
      return acc;
    }
    case ProxyExpr::Kind::Prod: {
      std::vector<double> acc(n, 1.0);
      for (const auto& o : e.operands) {
        auto v = eval_node(o, cols, n);
        for (std::size_t i = 0; i < n; ++i) acc[i] *= v[i];
      }
      return acc;
    }
  }
  return {};
}

}  // namespace

VariableSeries evaluate(const ProxyExpr& e, const SeriesEnv& env, const std::vector<std::string>& scope,
                        const EvalOptions& options) {
  const auto ids = variables(e);
  std::map<std::string, Column> cols;
  std::optional<SpatialLevel> level;
  for (const auto& id : ids) {
    auto it = env.find(id);
    if (it == env.end()) throw Error(ErrorKind::UnresolvedVariable, "unknown proxy variable '" + id + "'");
    const auto& s = it->second;
    if (level && *level != s.level()) {
      throw Error(ErrorKind::LevelMismatch, "proxy variables mix levels " + std::string(to_string(*level)) +
                                                " and " + std::string(to_string(s.level())) + " ('" + id + "')");
    }
    level = s.level();
    Column col;
    col.series = &s;
    col.values.reserve(scope.size());
    double max = 0.0;
    for (const auto& region : scope) {
      auto ot = s.observations.find(region);
      if (ot == s.observations.end() || ot->second.missing()) {
        throw Error(ErrorKind::MissingValues, "proxy '" + id + "' has no value for region '" + region + "'");
      }
      const double v = *ot->second.value;
      if (v < 0.0) {
        throw Error(ErrorKind::NegativeProxyValue, "proxy '" + id + "' is negative at region '" + region + "'");
      }
      max = std::max(max, v);
      col.values.push_back(v);
    }
    if (!options.weights_on_raw) {
      for (auto& v : col.values) v = max > 0.0 ? v / max : 0.0;
    }
    cols.emplace(id, std::move(col));
  }

  auto values = eval_node(e, cols, scope.size());
  if (options.weights_on_raw) {
    const double max = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
    for (auto& v : values) v = max > 0.0 ? v / max : 0.0;
  }

  VariableSeries out;
  out.meta.variable_id = print(e);
  out.meta.unit = "1";
  out.meta.level = level.value_or(SpatialLevel::LAU);
  for (std::size_t i = 0; i < scope.size(); ++i) {
    auto conf = ConfidenceLevel::VERY_HIGH;
    for (const auto& [_, col] : cols) conf = std::min(conf, col.series->at(scope[i]).confidence);
    out.observations[scope[i]] = Observation{values[i], conf};
  }
  return out;
}

std::vector<EmissionCaps> standard_euro_caps() {
  return {
      {"euro_1", 2.72, 0.97, 0.14},       {"euro_2", 1.0, 0.7, 0.08},
      {"euro_3", 0.66, 0.56, 0.05},       {"euro_4", 0.50, 0.30, 0.025},
      {"euro_5a", 0.50, 0.230, 0.005},    {"euro_5b", 0.50, 0.230, 0.0045},
      {"euro_6b", 0.50, 0.170, 0.0045},   {"euro_6c", 0.50, 0.170, 0.0045},
      {"euro_6d_temp", 0.50, 0.170, 0.0045}, {"euro_6d", 0.50, 0.170, 0.0045},
      {"euro_6e", 0.50, 0.170, 0.0045},
  };
}

namespace {

constexpr double kMicro = 1e6;

long long to_micro(double v, const std::string& tier) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw Error(ErrorKind::NegativeCap, "tier '" + tier + "' has a negative or non-finite cap");
  }
  return std::llround(v * kMicro);
}

EmissionStandardWeights weigh(const EmissionCaps& c, std::string tier) {
  const long long total = to_micro(c.co, c.tier) + to_micro(c.hc_nox, c.tier) + to_micro(c.pm, c.tier);
  return {std::move(tier), c.co, c.hc_nox, c.pm, static_cast<double>(total) / kMicro};
}

}  // namespace

std::vector<EmissionStandardWeights> euro_weight_table(const std::vector<EmissionCaps>& caps) {
  std::vector<EmissionStandardWeights> out;
  auto find = [&](std::string_view tier) -> const EmissionCaps* {
    auto it = std::find_if(caps.begin(), caps.end(), [&](const auto& c) { return c.tier == tier; });
    return it == caps.end() ? nullptr : &*it;
  };
  for (const auto& c : caps) out.push_back(weigh(c, c.tier));
  if (const auto* e1 = find("euro_1"); e1 && !find("euro_other")) out.push_back(weigh(*e1, "euro_other"));
  if (const auto* e5a = find("euro_5a"); e5a && !find("euro_5")) out.push_back(weigh(*e5a, "euro_5"));
  return out;
}

std::string euro_fleet_formula(const std::vector<EmissionStandardWeights>& weights,
                               const std::vector<std::string>& fleet_tiers, std::string_view prefix) {
  std::string out;
  for (const auto& tier : fleet_tiers) {
    auto it = std::find_if(weights.begin(), weights.end(), [&](const auto& w) { return w.tier == tier; });
    if (it == weights.end()) throw Error(ErrorKind::ConfigError, "no emission weight for tier '" + tier + "'");
    if (!out.empty()) out += " + ";
    out += shortest(it->total) + " * " + std::string(prefix) + tier;
  }
  return out;
}

std::vector<ProxyAssignment> parse_proxy_assignments(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("proxy assignments: ") + e.what());
  }
  const auto& list = doc.is_object() && doc.contains("assignments") ? doc["assignments"] : doc;
  if (!list.is_array()) throw Error(ErrorKind::ConfigError, "proxy assignments must be an array");
  std::vector<ProxyAssignment> out;
  for (const auto& item : list) {
    try {
      ProxyAssignment a;
      a.target_id = item.at("target_id").get<std::string>();
      a.source_level = parse_level(item.at("source_level").get<std::string>());
      a.formula = item.at("formula").get<std::string>();
      a.assignment_confidence = parse_confidence(item.at("assignment_confidence").get<std::string>());
      if (a.assignment_confidence == ConfidenceLevel::VERY_HIGH) {
        throw Error(ErrorKind::ConfigError, "assignment_confidence VERY_HIGH is reserved for observed data");
      }
      try {
        a.expr = parse(a.formula);
      } catch (const Error& e) {
        throw Error(e.kind(), "formula of '" + a.target_id + "': " + e.detail());
      }
      out.push_back(std::move(a));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError, std::string("proxy assignment entry: ") + e.what());
    }
  }
  return out;
}

std::vector<ProxyAssignment> load_proxy_assignments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_proxy_assignments(buf.str());
}

}  // namespace regio
