#include <doctest.h>

#include <array>

#include "ineq/data_model.hpp"
#include "ineq/errors.hpp"

using namespace ineq;

namespace {

HouseholdRecord basic_household(const std::string& id) {
  HouseholdRecord h;
  h.id = id;
  h.weight = 10.0;
  h.holdings = HoldingsVector({true, true, true, true, true}, 5);
  for (int l = 0; l < 5; ++l) h.covariates[static_cast<std::size_t>(l)] = {1.0, 0.3};
  for (int l = 0; l < 5; ++l) {
    h.evidence.component_bounds[static_cast<std::size_t>(l)] = Interval{100.0, 200.0};
  }
  return h;
}

}  // namespace

TEST_SUITE("data_model") {

TEST_CASE("holdings round-trip through the pattern index") {
  for (int cc : {4, 5}) {
    const int np = pattern_count(cc);
    CHECK(np == (cc == 5 ? 8 : 4));
    for (int p = 1; p <= np; ++p) {
      const HoldingsVector hv = HoldingsVector::from_pattern(p, cc);
      CHECK(hv.pattern() == p);
      CHECK(hv.component_count() == cc);
      CHECK(hv.holds(0));
      CHECK(hv.holds(cc - 1));
      const HoldingsVector back(hv.flags(), cc);
      CHECK(back == hv);
      CHECK(back.pattern() == p);
      // ranks enumerate held components in ascending component order
      int r = 0;
      for (int l = 0; l < cc; ++l) {
        if (hv.holds(l)) {
          CHECK(hv.held_rank(l) == r);
          CHECK(hv.held_component(r) == l);
          ++r;
        } else {
          CHECK(hv.held_rank(l) == -1);
        }
      }
      CHECK(r == hv.held_count());
    }
  }
}

TEST_CASE("complete portfolio is pattern one, sparsest is last") {
  const HoldingsVector full = HoldingsVector({true, true, true, true, true}, 5);
  CHECK(full.pattern() == 1);
  const HoldingsVector sparse = HoldingsVector({true, false, false, false, true}, 5);
  CHECK(sparse.pattern() == 8);
  CHECK(sparse.held_count() == 2);
}

TEST_CASE("invalid holdings are rejected") {
  CHECK_THROWS_AS(HoldingsVector({false, true, true, true, true}, 5), ValidationError);
  CHECK_THROWS_AS(HoldingsVector({true, true, true, true, false}, 5), ValidationError);
  CHECK_THROWS_AS(HoldingsVector::from_pattern(0, 5), ValidationError);
  CHECK_THROWS_AS(HoldingsVector::from_pattern(9, 5), ValidationError);
  CHECK_THROWS_AS(HoldingsVector::from_pattern(5, 4), ValidationError);
}

TEST_CASE("total wealth applies the residence share to held components only") {
  const HoldingsVector hv({true, true, false, false, true}, 5);
  const std::array<double, 5> share{1.0, 0.5, 1.0, 1.0, 1.0};
  const std::array<double, 5> wealth{100.0, 300.0, 999.0, 999.0, 50.0};
  CHECK(total_wealth(hv, share, wealth) == doctest::Approx(100.0 + 150.0 + 50.0));
}

TEST_CASE("design kind names round trip") {
  for (DesignKind k : {DesignKind::Srswor, DesignKind::StratifiedSrs,
                       DesignKind::UnequalProbFixedSize, DesignKind::TwoStageCluster})
    CHECK(design_kind_from_name(design_kind_name(k)) == k);
  CHECK_THROWS_AS(design_kind_from_name("bogus"), ValidationError);
}

TEST_CASE("dataset validation catches structural faults") {
  Dataset ds;
  ds.households.push_back(basic_household("a"));
  ds.households.push_back(basic_household("b"));
  CHECK_NOTHROW(validate_dataset(ds));

  SUBCASE("duplicate id") {
    ds.households[1].id = "a";
    CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
  }
  SUBCASE("non-positive weight") {
    ds.households[0].weight = 0.0;
    CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
  }
  SUBCASE("covariates must start with the constant") {
    ds.households[0].covariates[2] = {0.0, 1.0};
    CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
  }
  SUBCASE("missing covariates on a held component") {
    ds.households[0].covariates[3].clear();
    CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
  }
  SUBCASE("residence share outside (0, 1]") {
    ds.households[0].share[1] = 0.0;
    CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
    ds.households[0].share[1] = 1.2;
    CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
  }
  SUBCASE("bracket on an unheld component") {
    ds.households[0].holdings = HoldingsVector({true, false, true, true, true}, 5);
    ds.households[0].covariates[1].clear();
    CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
  }
  SUBCASE("auxiliaries must align with declared totals") {
    ds.calibration_totals = std::vector<double>{1000.0, 50.0};
    ds.households[0].aux = {1.0, 2.0};
    ds.households[1].aux = {1.0};
    CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
    ds.households[1].aux = {1.0, 3.0};
    CHECK_NOTHROW(validate_dataset(ds));
  }
}

}  // TEST_SUITE
