#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "regio/validation.hpp"

using namespace regio;
using regio::testing::kind_of;
using regio::testing::make_series;
using L = SpatialLevel;

namespace {

double pct2(double reported, double disaggregated) {
  return round_half_up(deviation(reported, disaggregated).pct_deviation, 2);
}

}  // namespace

TEST_CASE("deviation") {
  const auto b = deviation(9822750, 8841562, "Barcelona");
  CHECK(b.difference == 981188);
  CHECK(format_2dp(b.pct_deviation) == "9.99");
  CHECK(format_2dp(deviation(1078192.20, 2166460.60).pct_deviation) == "-100.93");
  const auto same = deviation(42.5, 42.5);
  CHECK(same.difference == 0.0);
  CHECK(format_2dp(same.pct_deviation) == "0.00");
  CHECK(kind_of([] { deviation(0.0, 5.0, "x"); }) == ErrorKind::UndefinedDeviation);
}

TEST_CASE("building-sector city rows") {
  CHECK(pct2(21644328, 21892150) == -1.14);
  CHECK(pct2(3102478.65, 3238758) == -4.39);
  CHECK(pct2(1703105.56, 1970336) == -15.69);
  CHECK(pct2(1819780, 1592324) == 12.50);
  CHECK(pct2(5768598.63, 3670931) == 36.36);
  CHECK(pct2(813, 806.18) == 0.84);
  CHECK(pct2(2130.89, 1975.78) == 7.28);
  CHECK(pct2(303.94, 298.26) == 1.87);
  CHECK(pct2(259.25, 179.05) == 30.94);
  CHECK(pct2(900.42, 333.74) == 62.94);
  CHECK(pct2(127.83, 198.01) == -54.90);
}

TEST_CASE("sector comparison") {
  const auto rows = sector_comparison_report({{"Transport DE", 143.38, 147.27}, {"Transport ES", 83.51, 90.21}, {"same", 3, 3}});
  CHECK(format_2dp(rows[0].pct_deviation) == "-2.71");
  CHECK(format_2dp(rows[1].pct_deviation) == "-8.02");
  CHECK(format_2dp(rows[2].pct_deviation) == "0.00");
  CHECK(kind_of([] { sector_comparison_report({{"zero", 0.0, 1.0}}); }) == ErrorKind::UndefinedDeviation);
  const auto pairs = compare_pairs({{"zero", 0.0, 1.0}, {"ok", 2.0, 1.0}});
  CHECK(pairs.undefined == std::vector<std::string>{"zero"});
  REQUIRE(pairs.rows.size() == 1);
  CHECK(pairs.rows[0].pct_deviation == 50.0);
}

TEST_CASE("property: sign of deviation and rounding stability") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1e7);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), b = u(rng);
    const auto d = deviation(a, b);
    CHECK((d.pct_deviation > 0) == (a > b));
    CHECK(d.difference == a - b);
    CHECK(format_2dp(100.0 * d.difference / d.reported) == format_2dp(d.pct_deviation));
  }
}

TEST_CASE("compare_at_level") {
  const auto h = regio::testing::small_de();
  const auto result = make_series("v", L::LAU, {{"DE_0001", 1.0}, {"DE_0002", 2.0}, {"DE_0003", 0.0}, {"DE_0004", 5.0}});

  SUBCASE("aggregation then deviation") {
    const auto r = compare_at_level(result, {{"A", "DE111", 4.0}}, h, L::NUTS3);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].disaggregated == 3.0);
    CHECK(format_2dp(r.rows[0].pct_deviation) == "25.00");
  }
  SUBCASE("identity reference") {
    std::vector<ReferenceRow> ref;
    const auto agg = aggregate(result, h, L::NUTS3);
    for (const auto& [region, o] : agg.observations) ref.push_back({region, region, *o.value});
    const auto r = compare_at_level(result, ref, h, L::NUTS3);
    CHECK(r.rows.size() == 2);
    for (const auto& row : r.rows) CHECK(row.pct_deviation == 0.0);
  }
  SUBCASE("unmatched and undefined rows") {
    const auto r = compare_at_level(result, {{"x", "DE111", 3.0}, {"Elsewhere", "", 5.0}, {"FR1", "FR1", 1.0}, {"z", "DE112", 0.0}}, h, L::NUTS3);
    CHECK(r.rows.size() == 1);
    CHECK(r.unmatched == std::vector<std::string>{"Elsewhere", "FR1"});
    CHECK(r.undefined == std::vector<std::string>{"z"});
    const auto text = deviation_csv(r);
    CHECK(text == "label,reported,disaggregated,difference,pct_deviation\nx,3,3,0,0\nz,0,,,UndefinedDeviation\n");
    const auto md = deviation_markdown(r, "Check", "MWh");
    CHECK(md.find("| x | 3 | 3 | 0 | 0.00 |") != std::string::npos);
    CHECK(md.find("Unmatched reference rows: Elsewhere FR1") != std::string::npos);
  }
  SUBCASE("errors") {
    CHECK(kind_of([&] { compare_at_level(result, {{"FR", "FR1", 1.0}}, h, L::NUTS3); }) == ErrorKind::NoOverlap);
    CHECK(kind_of([&] { compare_at_level(result, {{"x", "DE_0001", 1.0}}, h, L::LAU); }) == ErrorKind::LevelMismatch);
    auto partial = result;
    partial.observations["DE_0004"].value = std::nullopt;
    CHECK(kind_of([&] { compare_at_level(partial, {{"x", "DE112", 1.0}}, h, L::NUTS3); }) == ErrorKind::MissingValues);
  }
}

TEST_CASE("reference and pair files") {
  const auto dir = regio::testing::temp_dir("validation");
  regio::testing::write_file(dir / "ref.csv", "label,region,value\nMadrid,ES300,10.5\n\"Vitoria, Gasteiz\",,2\n");
  const auto ref = load_reference(dir / "ref.csv");
  REQUIRE(ref.size() == 2);
  CHECK(ref[0].region == "ES300");
  CHECK(ref[1].label == "Vitoria, Gasteiz");
  CHECK(ref[1].region.empty());
  regio::testing::write_file(dir / "noregion.csv", "label,value\na,1\n");
  CHECK(kind_of([&] { load_reference(dir / "noregion.csv"); }) == ErrorKind::MalformedCsv);
  regio::testing::write_file(dir / "bad.csv", "region,value\nA,abc\n");
  CHECK(kind_of([&] { load_reference(dir / "bad.csv"); }) == ErrorKind::NonNumericValue);

  regio::testing::write_file(dir / "pairs.csv", "label,reported,disaggregated\nBarcelona,9822750,8841562\n");
  const auto pairs = load_pairs(dir / "pairs.csv");
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].value_b == 8841562);
  std::filesystem::remove_all(dir);
}
