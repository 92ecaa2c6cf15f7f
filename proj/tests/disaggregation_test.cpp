#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "regio/disaggregation.hpp"

using namespace regio;
using regio::testing::kind_of;
using regio::testing::make_series;
using regio::testing::node;
using L = SpatialLevel;
using C = ConfidenceLevel;

namespace {

// DE -> DE1 -> DE11 -> DE111 -> DE_0001..DE_0004, DE112 -> DE_0005..DE_0006
RegionHierarchy two_nuts3() {
  return RegionHierarchy::build({
      node("DE", L::NUTS0, "", "DE"),
      node("DE1", L::NUTS1, "DE", "DE"),
      node("DE11", L::NUTS2, "DE1", "DE"),
      node("DE111", L::NUTS3, "DE11", "DE"),
      node("DE112", L::NUTS3, "DE11", "DE"),
      node("DE_0001", L::LAU, "DE111", "DE"),
      node("DE_0002", L::LAU, "DE111", "DE"),
      node("DE_0003", L::LAU, "DE111", "DE"),
      node("DE_0004", L::LAU, "DE111", "DE"),
      node("DE_0005", L::LAU, "DE112", "DE"),
      node("DE_0006", L::LAU, "DE112", "DE"),
  });
}

VariableSeries lau(const std::string& id, std::vector<double> v, C conf = C::VERY_HIGH) {
  std::vector<std::pair<std::string, std::optional<double>>> rows;
  for (std::size_t i = 0; i < v.size(); ++i) rows.emplace_back("DE_000" + std::to_string(i + 1), v[i]);
  return make_series(id, L::LAU, rows, conf);
}

double sum_values(const VariableSeries& s) {
  double t = 0;
  for (const auto& [_, o] : s.observations) t += *o.value;
  return t;
}

}  // namespace

TEST_CASE("allocate") {
  auto a = allocate(100, {{"a", 1}, {"b", 1}});
  CHECK(a.values.at("a") == 50);
  CHECK(a.values.at("b") == 50);
  CHECK_FALSE(a.fallback);
  CHECK(allocate(100, {{"a", 0.3}}).values.at("a") == 100);
  auto p = allocate(60, {{"a", 1}, {"b", 2}, {"c", 3}});
  CHECK(p.values.at("a") == 10);
  CHECK(p.values.at("b") == 20);
  CHECK(p.values.at("c") == 30);
  auto z = allocate(90, {{"a", 0}, {"b", 0}, {"c", 0}});
  CHECK(z.fallback);
  CHECK(z.values.at("b") == 30);
  CHECK(kind_of([] { allocate(1, {}); }) == ErrorKind::EmptyChildSet);
  CHECK(kind_of([] { allocate(1, {{"a", -1}}); }) == ErrorKind::InvalidWeight);
  CHECK(kind_of([] { allocate(1, {{"a", std::nan("")}}); }) == ErrorKind::InvalidWeight);
}

TEST_CASE("disaggregate") {
  const auto h = two_nuts3();
  SeriesEnv env;
  env.emplace("x", lau("x", {1, 1, 1, 1, 2, 6}, C::HIGH));
  env.emplace("zero", lau("zero", {0, 0, 0, 0, 1, 3}));

  SUBCASE("replicate copies the parent value") {
    DisaggregationTask t{"hdd", make_series("hdd", L::NUTS3, {{"DE111", 3000.0}, {"DE112", 2800.0}}), std::nullopt,
                         AllocationMode::Replicate, C::MEDIUM};
    const auto r = disaggregate(t, h, env);
    for (const char* c : {"DE_0001", "DE_0002", "DE_0003", "DE_0004"}) {
      CHECK(*r.series.at(c).value == 3000);
      CHECK(r.series.at(c).confidence == C::MEDIUM);
    }
    CHECK(*r.series.at("DE_0006").value == 2800);
  }
  SUBCASE("equal proxy gives an equal split, confidence is the minimum") {
    DisaggregationTask t{"emp", make_series("emp", L::NUTS3, {{"DE111", 400.0}, {"DE112", 80.0}}, C::VERY_HIGH),
                         parse("x"), AllocationMode::Allocate, C::MEDIUM};
    const auto r = disaggregate(t, h, env);
    for (const char* c : {"DE_0001", "DE_0002", "DE_0003", "DE_0004"}) CHECK(*r.series.at(c).value == 100);
    CHECK(*r.series.at("DE_0005").value == 20);
    CHECK(*r.series.at("DE_0006").value == 60);
    CHECK(r.series.at("DE_0005").confidence == C::MEDIUM);
    CHECK(r.provenance.at("DE_0006").source_region == "DE112");
    CHECK(r.provenance.at("DE_0006").share == doctest::Approx(0.75));
    CHECK(r.series.meta.level == L::LAU);
    CHECK(r.max_relative_residual <= 1e-12);

    t.assignment_confidence = C::HIGH;
    t.source.observations["DE111"].confidence = C::LOW;
    const auto r2 = disaggregate(t, h, env);
    CHECK(r2.series.at("DE_0001").confidence == C::LOW);
    CHECK(r2.series.at("DE_0005").confidence == C::HIGH);
  }
  SUBCASE("all-zero proxy under one parent falls back uniformly at VERY_LOW") {
    DisaggregationTask t{"v", make_series("v", L::NUTS3, {{"DE111", 40.0}, {"DE112", 8.0}}), parse("zero"),
                         AllocationMode::Allocate, C::HIGH};
    const auto r = disaggregate(t, h, env);
    CHECK(r.fallback_parents == 1);
    for (const char* c : {"DE_0001", "DE_0002", "DE_0003", "DE_0004"}) {
      CHECK(*r.series.at(c).value == 10);
      CHECK(r.series.at(c).confidence == C::VERY_LOW);
      CHECK(r.provenance.at(c).fallback);
    }
    CHECK(*r.series.at("DE_0006").value == 6);
    CHECK(r.series.at("DE_0006").confidence == C::HIGH);
  }
  SUBCASE("NUTS0 source reaches every LAU") {
    DisaggregationTask t{"fec", make_series("fec", L::NUTS0, {{"DE", 1200.0}}), parse("x"), AllocationMode::Allocate,
                         C::LOW};
    const auto r = disaggregate(t, h, env);
    CHECK(r.series.observations.size() == 6);
    CHECK(sum_values(r.series) == doctest::Approx(1200));
    CHECK(*r.series.at("DE_0006").value == doctest::Approx(1200.0 * 6 / 12));
  }
  SUBCASE("normalization scope only matters for composite formulas") {
    env.emplace("y", lau("y", {4, 3, 2, 1, 10, 30}));
    DisaggregationTask t{"v", make_series("v", L::NUTS3, {{"DE111", 100.0}, {"DE112", 100.0}}), parse("x + y"),
                         AllocationMode::Allocate, C::LOW};
    const auto country = disaggregate(t, h, env);
    const auto parent = disaggregate(t, h, env, {NormalizeScope::Parent, {}});
    // DE111: country scope x/6 + y/30, parent scope x/1 + y/4
    CHECK(*country.series.at("DE_0001").value == doctest::Approx(100.0 * (1.0 / 6 + 4.0 / 30) / (4.0 / 6 + 10.0 / 30)));
    CHECK(*parent.series.at("DE_0001").value == doctest::Approx(100.0 * (1.0 + 1.0) / (4.0 + 10.0 / 4)));
    DisaggregationTask single{"w", t.source, parse("y"), AllocationMode::Allocate, C::LOW};
    const auto a = disaggregate(single, h, env);
    const auto b = disaggregate(single, h, env, {NormalizeScope::Parent, {}});
    for (const auto& [r, o] : a.series.observations) CHECK(*o.value == doctest::Approx(*b.series.at(r).value));
  }
  SUBCASE("errors") {
    DisaggregationTask t{"v", make_series("v", L::NUTS3, {{"DE111", std::nullopt}, {"DE112", 1.0}}), parse("x"),
                         AllocationMode::Allocate, C::LOW};
    CHECK(kind_of([&] { disaggregate(t, h, env); }) == ErrorKind::MissingSourceValue);
    t.source = make_series("v", L::NUTS3, {{"DE111", 1.0}, {"DE112", 1.0}});
    t.formula = parse("nope");
    CHECK(kind_of([&] { disaggregate(t, h, env); }) == ErrorKind::UnresolvedVariable);
    env["x"].observations["DE_0002"].value = std::nullopt;
    t.formula = parse("x");
    CHECK(kind_of([&] { disaggregate(t, h, env); }) == ErrorKind::MissingValues);
  }
}

TEST_CASE("property: conservation, non-negativity, scale and label invariance, confidence ceiling") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  std::uniform_real_distribution<double> k(1e-4, 1e4);
  for (int trial = 0; trial < 40; ++trial) {
    const auto h = regio::testing::random_hierarchy(rng, 2, 12);
    const auto laus = h.regions_at(L::LAU);
    SeriesEnv env;
    for (const char* id : {"p", "q"}) {
      VariableSeries s;
      s.meta = {id, "", "", L::LAU, std::string(kAllCountries)};
      for (const auto& r : laus) s.observations[r] = Observation{std::floor(u(rng)), C::HIGH};
      env.emplace(id, s);
    }
    VariableSeries src;
    src.meta = {"t", "", "", L::NUTS0, std::string(kAllCountries)};
    double total = 0;
    for (const auto& c : h.regions_at(L::NUTS0)) {
      src.observations[c] = Observation{u(rng) * 1e6};
      total += *src.observations[c].value;
    }
    const auto assign = trial % 2 ? C::LOW : C::MEDIUM;
    DisaggregationTask t{"t", src, parse("2 * p + q"), AllocationMode::Allocate, assign};
    const auto r = disaggregate(t, h, env);
    CHECK(std::abs(sum_values(r.series) - total) / total <= 1e-9);
    CHECK(r.max_relative_residual <= 1e-9);
    for (const auto& [region, o] : r.series.observations) {
      CHECK(*o.value >= 0.0);
      CHECK(o.confidence <= assign);
    }

    auto scaled = env;
    const double f = k(rng);
    for (auto& [_, o] : scaled.at("q").observations) o.value = *o.value * f;
    const auto rs = disaggregate(t, h, scaled);
    for (const auto& [region, o] : r.series.observations) {
      CHECK(*rs.series.at(region).value == doctest::Approx(*o.value).epsilon(1e-9));
    }

    // swapping two children's proxy values swaps their allocations
    const auto first_country = h.regions_at(L::NUTS3).front();
    auto kids = h.children(first_country);
    if (kids.size() >= 2) {
      auto swapped = env;
      for (const char* id : {"p", "q"}) {
        auto& obs = swapped.at(id).observations;
        std::swap(obs.at(kids[0]), obs.at(kids[1]));
      }
      const auto rw = disaggregate(t, h, swapped);
      CHECK(*rw.series.at(kids[0]).value == doctest::Approx(*r.series.at(kids[1]).value).epsilon(1e-12));
      CHECK(*rw.series.at(kids[1]).value == doctest::Approx(*r.series.at(kids[0]).value).epsilon(1e-12));
    }
  }
}

TEST_CASE("pipeline config parsing and resolution") {
  auto cfg = parse_pipeline_config(R"({"stages": [
    {"stage": 1, "tasks": [{"target_id": "emp", "source_level": "NUTS3"},
                           {"target_id": "hdd", "source_level": "NUTS3", "mode": "replicate", "assignment_confidence": "HIGH"}]},
    {"stage": 3, "tasks": []}]})");
  REQUIRE(cfg.stages.size() == 2);
  CHECK(cfg.stages[0].tasks[1].mode == AllocationMode::Replicate);
  CHECK_FALSE(cfg.stages[0].tasks[0].expr);
  CHECK(kind_of([&] { resolve_tasks(cfg, {}); }) == ErrorKind::InvalidTask);
  resolve_tasks(cfg, parse_proxy_assignments(
                         R"([{"target_id": "emp", "source_level": "NUTS3", "formula": "x", "assignment_confidence": "MEDIUM"}])"));
  CHECK(*cfg.stages[0].tasks[0].expr == parse("x"));
  CHECK(*cfg.stages[0].tasks[0].assignment_confidence == C::MEDIUM);

  CHECK(kind_of([] { parse_pipeline_config(R"({"stages": [{"stage": 4}]})"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_pipeline_config(R"({"stages": [{"stage": 1, "tasks": [{"target_id": "a", "source_level": "NUTS3", "mode": "copy"}]}]})"); }) ==
        ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_pipeline_config("{"); }) == ErrorKind::ConfigError);
  auto bad = parse_pipeline_config(
      R"({"stages": [{"stage": 1, "tasks": [{"target_id": "a", "source_level": "NUTS3", "formula": "x", "assignment_confidence": "VERY_HIGH"}]}]})");
  CHECK(kind_of([&] { resolve_tasks(bad, {}); }) == ErrorKind::InvalidTask);
  auto lau_src = parse_pipeline_config(
      R"({"stages": [{"stage": 1, "tasks": [{"target_id": "a", "source_level": "LAU", "formula": "x", "assignment_confidence": "LOW"}]}]})");
  CHECK(kind_of([&] { resolve_tasks(lau_src, {}); }) == ErrorKind::InvalidTask);
}

namespace {

TaskSpec task(std::string id, L level, std::string formula, C conf = C::MEDIUM) {
  TaskSpec t;
  t.target_id = std::move(id);
  t.source_level = level;
  if (formula.empty()) {
    t.mode = AllocationMode::Replicate;
  } else {
    t.formula = formula;
    t.expr = parse(formula);
  }
  t.assignment_confidence = conf;
  return t;
}

}  // namespace

TEST_CASE("stage planning") {
  const std::set<std::string> lau_ids{"pop", "area"};
  SUBCASE("empty") {
    CHECK(plan_stages({}, lau_ids).empty());
  }
  SUBCASE("within-stage ordering") {
    PipelineConfig cfg{{{1, {task("b", L::NUTS3, "a + pop"), task("a", L::NUTS3, "area"), task("c", L::NUTS3, "pop")}}}};
    const auto plan = plan_stages(cfg, lau_ids);
    REQUIRE(plan.size() == 1);
    REQUIRE(plan[0].waves.size() == 2);
    CHECK(plan[0].waves[0].size() == 2);
    CHECK(plan[0].waves[0][0]->target_id == "a");
    CHECK(plan[0].waves[1][0]->target_id == "b");
  }
  SUBCASE("later-stage reference") {
    PipelineConfig cfg{{{2, {task("m", L::NUTS2, "fec")}}, {3, {task("fec", L::NUTS0, "pop")}}}};
    try {
      plan_stages(cfg, lau_ids);
      FAIL("expected UnresolvedDependency");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnresolvedDependency);
      CHECK(std::string(e.what()).find("stage 3") != std::string::npos);
    }
    PipelineConfig unknown{{{1, {task("m", L::NUTS3, "ghost")}}}};
    CHECK(kind_of([&] { plan_stages(unknown, lau_ids); }) == ErrorKind::UnresolvedDependency);
  }
  SUBCASE("cycle") {
    PipelineConfig cfg{{{1, {task("a", L::NUTS3, "b"), task("b", L::NUTS3, "a")}}}};
    CHECK(kind_of([&] { plan_stages(cfg, lau_ids); }) == ErrorKind::DependencyCycle);
  }
  SUBCASE("duplicates") {
    PipelineConfig twice{{{1, {task("a", L::NUTS3, "pop")}}, {2, {task("a", L::NUTS2, "pop")}}}};
    CHECK(kind_of([&] { plan_stages(twice, lau_ids); }) == ErrorKind::DuplicateOutput);
    PipelineConfig shadow{{{1, {task("pop", L::NUTS3, "area")}}}};
    CHECK(kind_of([&] { plan_stages(shadow, lau_ids); }) == ErrorKind::DuplicateOutput);
  }
}

TEST_CASE("run_pipeline") {
  const auto h = two_nuts3();
  std::vector<VariableSeries> store{
      lau("pop", {10, 20, 30, 40, 50, 50}),
      lau("area", {1, 0, 1, 0, 1, 1}, C::HIGH),
      make_series("emp", L::NUTS3, {{"DE111", 1000.0}, {"DE112", 500.0}}),
      make_series("hdd", L::NUTS3, {{"DE111", 3000.0}, {"DE112", 3100.0}}),
      make_series("moto", L::NUTS2, {{"DE11", 700.0}}),
      make_series("fec", L::NUTS0, {{"DE", 1e6}}),
      make_series("ghg", L::NUTS0, {{"DE", 5e5}}),
      make_series("chem", L::NUTS0, {{"DE", std::nullopt}}),
  };
  PipelineConfig cfg{{
      {3, {task("fec", L::NUTS0, "emp", C::LOW), task("ghg", L::NUTS0, "pop * hdd", C::MEDIUM),
           task("chem", L::NUTS0, "emp", C::LOW), task("chem_share", L::NUTS0, "chem", C::LOW)}},
      {1, {task("emp", L::NUTS3, "area + pop", C::HIGH), task("hdd", L::NUTS3, "", C::HIGH)}},
      {2, {task("moto", L::NUTS2, "pop + emp", C::MEDIUM)}},
  }};
  // chem_share's source must exist for the config to be valid
  store.push_back(make_series("chem_share", L::NUTS0, {{"DE", 1.0}}));

  const auto result = run_pipeline(cfg, h, store);
  CHECK(result.final_targets == std::vector<std::string>{"fec", "ghg"});
  REQUIRE(result.outputs.contains("fec"));
  CHECK(sum_values(result.outputs.at("fec").series) == doctest::Approx(1e6).epsilon(1e-12));
  CHECK(sum_values(result.outputs.at("ghg").series) == doctest::Approx(5e5).epsilon(1e-12));
  CHECK(sum_values(result.outputs.at("moto").series) == doctest::Approx(700).epsilon(1e-12));
  CHECK(*result.outputs.at("hdd").series.at("DE_0002").value == 3000);
  CHECK_FALSE(result.outputs.contains("chem"));
  CHECK_FALSE(result.outputs.contains("chem_share"));
  // emp (HIGH) feeds fec (LOW)
  CHECK(result.outputs.at("emp").series.at("DE_0001").confidence == C::HIGH);
  CHECK(result.outputs.at("fec").series.at("DE_0001").confidence == C::LOW);

  const auto j = to_json(result);
  CHECK(j.at("skipped").size() == 2);
  CHECK(j.at("final_targets").size() == 2);
  int done = 0;
  for (const auto& t : result.tasks) done += t.status == "done";
  CHECK(done == 5);

  SUBCASE("job count does not change results") {
    const auto par = run_pipeline(cfg, h, store, {}, 4);
    for (const auto& [id, out] : result.outputs) {
      for (const auto& [r, o] : out.series.observations) CHECK(*par.outputs.at(id).series.at(r).value == *o.value);
    }
  }
  SUBCASE("missing source series") {
    PipelineConfig c{{{1, {task("nope", L::NUTS3, "pop")}}}};
    CHECK(kind_of([&] { run_pipeline(c, h, store); }) == ErrorKind::InvalidTask);
  }
  SUBCASE("empty config") {
    const auto r = run_pipeline({}, h, store);
    CHECK(r.outputs.empty());
    CHECK(r.final_targets.empty());
  }
}
