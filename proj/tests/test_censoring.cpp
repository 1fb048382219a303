#include <doctest.h>

#include <array>
#include <cmath>
#include <string>

#include "ineq/censoring.hpp"
#include "ineq/errors.hpp"
#include "ineq/variates.hpp"

using namespace ineq;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::array<bool, 5> kAllHeld{true, true, true, true, true};
const std::array<double, 5> kUnitShare{1.0, 1.0, 1.0, 1.0, 1.0};

std::string infeasible_message(const CensoringEvidence& ev,
                               const std::array<bool, 5>& held,
                               const std::array<double, 5>& share, int cc) {
  try {
    build_domain(ev, held, share, cc);
  } catch (const InfeasibleError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("censoring") {

TEST_CASE("capped terms saturate") {
  MonotoneConstraint c;
  c.sense = ConstraintSense::AtLeast;
  c.threshold = 100.0;
  c.offset = -5.0;
  c.terms = {{0, 1.0, kInf}, {1, 0.5, 40.0}};
  const std::array<double, 5> w{50.0, 100.0, 0.0, 0.0, 0.0};
  CHECK(c.evaluate(w) == doctest::Approx(-5.0 + 50.0 + 0.5 * 40.0));
  std::array<Interval, 5> box{};
  box[0] = {10.0, 60.0};
  box[1] = {20.0, 200.0};
  CHECK(c.sup_over(box) == doctest::Approx(-5.0 + 60.0 + 20.0));
  CHECK(c.inf_over(box) == doctest::Approx(-5.0 + 10.0 + 10.0));
}

TEST_CASE("boxes are floored, capped and validated") {
  CensoringEvidence ev;
  ev.component_bounds[0] = Interval{0.0, 500.0};
  ev.component_bounds[1] = Interval{100.0, kInf};
  const CensoringDomain d = build_domain(ev, kAllHeld, kUnitShare, 5, 720000.0, 1e7);
  CHECK(d.box(0).lo == 1.0);
  CHECK(d.box(0).hi == 500.0);
  CHECK(d.box(1).lo == 100.0);
  CHECK(d.box(1).hi == 1e7);
  CHECK(d.box(2).lo == 1.0);  // unbracketed held component
  CHECK(d.box(2).hi == 1e7);

  CensoringEvidence bad;
  bad.component_bounds[0] = Interval{300.0, 200.0};
  CHECK_THROWS_AS(build_domain(bad, kAllHeld, kUnitShare, 5), ValidationError);

  CensoringEvidence unheld;
  unheld.component_bounds[1] = Interval{1.0, 2.0};
  std::array<bool, 5> held = kAllHeld;
  held[1] = false;
  CHECK_THROWS_AS(build_domain(unheld, held, kUnitShare, 5), ValidationError);

  std::array<double, 5> share = kUnitShare;
  share[1] = 1.5;
  CHECK_THROWS_AS(build_domain({}, kAllHeld, share, 5), ValidationError);
}

TEST_CASE("total bracket slices apply the residence share") {
  CensoringEvidence ev;
  for (int l : {0, 1, 4}) ev.component_bounds[static_cast<std::size_t>(l)] = Interval{100.0, 400.0};
  ev.total_bracket = Interval{500.0, 700.0};
  const std::array<bool, 5> held{true, true, false, false, true};
  std::array<double, 5> share = kUnitShare;
  share[1] = 0.5;
  const CensoringDomain d = build_domain(ev, held, share, 5);
  REQUIRE(d.constraints().size() == 2);

  // fixed w0 = 200, w4 = 150: share-weighted rest is 350
  std::array<double, 5> w{200.0, 0.0, 0.0, 0.0, 150.0};
  const auto slice = d.conditional_interval(1, w);
  REQUIRE(slice.has_value());
  // 0.5 w1 must lift the total from 350 into [500, 700]
  CHECK(slice->lo == doctest::Approx(300.0));
  CHECK(slice->hi == doctest::Approx(400.0));  // box cap binds before 700

  w[0] = 350.0;
  w[4] = 300.0;  // rest 650: the box floor is the only admissible value
  const auto tight = d.conditional_interval(1, w);
  REQUIRE(tight.has_value());
  CHECK(tight->lo == doctest::Approx(100.0));
  CHECK(tight->hi == doctest::Approx(100.0).epsilon(1e-6));

  w[0] = 400.0;
  w[4] = 400.0;  // rest 800 already violates the upper bracket
  CHECK_FALSE(d.conditional_interval(1, w).has_value());
}

TEST_CASE("tax liability constraint uses the generous valuation") {
  CensoringEvidence ev;
  WealthTaxEvidence tax;
  tax.pays_tax = true;
  tax.debt = 10000.0;
  tax.maybe_nondeductible = true;
  tax.nd_min = 0.0;
  tax.nd_max = 50000.0;
  ev.tax = tax;
  std::array<double, 5> share = kUnitShare;
  share[1] = 0.8;
  const CensoringDomain d = build_domain(ev, kAllHeld, share, 5, 720000.0);
  REQUIRE(d.constraints().size() == 1);
  const MonotoneConstraint& c = d.constraints().front();
  CHECK(c.sense == ConstraintSense::AtLeast);
  CHECK(c.threshold == 720000.0);
  CHECK(c.offset == doctest::Approx(-10000.0));
  REQUIRE(c.terms.size() == 5);
  CHECK(c.terms[0].coef == doctest::Approx(1.0));
  CHECK(c.terms[1].coef == doctest::Approx(0.8 * 0.64));
  CHECK(c.terms[2].coef == doctest::Approx(1.0));
  CHECK(c.terms[3].cap == doctest::Approx(50000.0));
  CHECK(c.terms[4].coef == doctest::Approx(1.0));

  // professional wealth can only contribute up to nd_max
  std::array<double, 5> w{600000.0, 0.0, 1.0, 0.0, 1.0};
  w[1] = 100000.0;  // contributes 0.512 * 1e5 = 51200
  // rest = 600000 + 51200 + 1 + 1 - 10000 = 641202; need = 78798 > nd_max
  CHECK_FALSE(d.conditional_interval(3, w).has_value());

  w[0] = 680000.0;  // rest = 721202, constraint already satisfied
  auto loose = d.conditional_interval(3, w);
  REQUIRE(loose.has_value());
  CHECK(loose->lo == 1.0);

  w[0] = 650000.0;  // rest = 691202; need = 28798 within the cap
  auto slice = d.conditional_interval(3, w);
  REQUIRE(slice.has_value());
  CHECK(slice->lo == doctest::Approx(28798.0).epsilon(1e-9));
}

TEST_CASE("absence of liability bounds the conservative valuation") {
  CensoringEvidence ev;
  WealthTaxEvidence tax;
  tax.pays_tax = false;
  tax.debt = 5000.0;
  tax.maybe_nondeductible = true;
  tax.nd_min = 20000.0;
  tax.nd_max = 90000.0;
  ev.tax = tax;
  const CensoringDomain d = build_domain(ev, kAllHeld, kUnitShare, 5, 720000.0);
  REQUIRE(d.constraints().size() == 1);
  const MonotoneConstraint& c = d.constraints().front();
  CHECK(c.sense == ConstraintSense::AtMost);
  CHECK(c.offset == doctest::Approx(20000.0 - 5000.0));
  // only financial, residence and other real estate enter
  REQUIRE(c.terms.size() == 3);
  CHECK(c.terms[0].component == 0);
  CHECK(c.terms[1].component == 1);
  CHECK(c.terms[1].coef == doctest::Approx(0.8));
  CHECK(c.terms[2].component == 2);

  // remainder wealth is unconstrained by this evidence
  std::array<double, 5> w{100000.0, 50000.0, 10000.0, 1.0, 1.0};
  const auto slice = d.conditional_interval(4, w);
  REQUIRE(slice.has_value());
  CHECK(slice->hi == doctest::Approx(kDefaultCap));

  // financial wealth is capped by the threshold
  const auto fin = d.conditional_interval(0, w);
  REQUIRE(fin.has_value());
  // w0 <= 720000 - 15000 - 0.8*50000 - 10000
  CHECK(fin->hi == doctest::Approx(720000.0 - 15000.0 - 40000.0 - 10000.0));

  w[0] = 900000.0;
  CHECK_FALSE(d.conditional_interval(4, w).has_value());
}

TEST_CASE("four-component tax forms") {
  CensoringEvidence ev;
  WealthTaxEvidence tax;
  tax.pays_tax = true;
  tax.maybe_nondeductible = true;
  tax.nd_min = 0.0;
  tax.nd_max = 30000.0;
  ev.tax = tax;
  const std::array<bool, 5> held{true, true, true, true, false};
  const CensoringDomain d = build_domain(ev, held, kUnitShare, 4, 300000.0);
  const MonotoneConstraint& c = d.constraints().front();
  REQUIRE(c.terms.size() == 4);
  CHECK(c.terms[1].coef == doctest::Approx(1.0));  // aggregated real estate, full
  CHECK(c.terms[2].component == 2);                // professional slot
  CHECK(c.terms[2].cap == doctest::Approx(30000.0));

  CensoringEvidence ev2;
  WealthTaxEvidence no;
  no.pays_tax = false;
  ev2.tax = no;
  const CensoringDomain d2 = build_domain(ev2, held, kUnitShare, 4, 300000.0);
  const MonotoneConstraint& c2 = d2.constraints().front();
  REQUIRE(c2.terms.size() == 2);
  CHECK(c2.terms[1].coef == doctest::Approx(0.8));
}

TEST_CASE("impossible evidence is rejected with the violated constraint named") {
  CensoringEvidence pays;
  WealthTaxEvidence tax;
  tax.pays_tax = true;
  pays.tax = tax;
  for (int l = 0; l < 5; ++l)
    pays.component_bounds[static_cast<std::size_t>(l)] = Interval{1.0, 10.0};
  const std::string m1 = infeasible_message(pays, kAllHeld, kUnitShare, 5);
  CHECK(m1.find("taxable-wealth-reaches-threshold") != std::string::npos);

  CensoringEvidence rich;
  WealthTaxEvidence no;
  no.pays_tax = false;
  rich.tax = no;
  rich.component_bounds[0] = Interval{1e6, 2e6};
  const std::string m2 = infeasible_message(rich, kAllHeld, kUnitShare, 5);
  CHECK(m2.find("taxable-wealth-below-threshold") != std::string::npos);

  CensoringEvidence total;
  for (int l = 0; l < 5; ++l)
    total.component_bounds[static_cast<std::size_t>(l)] = Interval{1000.0, 2000.0};
  total.total_bracket = Interval{0.0, 3000.0};
  const std::string m3 = infeasible_message(total, kAllHeld, kUnitShare, 5);
  CHECK(m3.find("total-wealth-bracket-upper") != std::string::npos);
}

TEST_CASE("non-deductible evidence is tied to professional wealth") {
  CensoringEvidence ev;
  WealthTaxEvidence tax;
  tax.pays_tax = true;
  tax.maybe_nondeductible = true;
  tax.nd_max = 100.0;
  ev.tax = tax;
  std::array<bool, 5> held = kAllHeld;
  held[3] = false;
  CHECK_THROWS_AS(build_domain(ev, held, kUnitShare, 5), ValidationError);

  WealthTaxEvidence loose;
  loose.pays_tax = true;
  loose.nd_min = 5.0;
  loose.nd_max = 10.0;
  CensoringEvidence ev2;
  ev2.tax = loose;
  CHECK_THROWS_AS(build_domain(ev2, kAllHeld, kUnitShare, 5), ValidationError);

  WealthTaxEvidence inverted;
  inverted.pays_tax = true;
  inverted.maybe_nondeductible = true;
  inverted.nd_min = 10.0;
  inverted.nd_max = 5.0;
  CensoringEvidence ev3;
  ev3.tax = inverted;
  CHECK_THROWS_AS(build_domain(ev3, kAllHeld, kUnitShare, 5), ValidationError);
}

TEST_CASE("membership tolerates boundary roundoff") {
  CensoringEvidence ev;
  ev.component_bounds[0] = Interval{100.0, 200.0};
  const CensoringDomain d = build_domain(ev, kAllHeld, kUnitShare, 5);
  std::array<double, 5> w{200.0 * (1.0 + 1e-12), 1.0, 1.0, 1.0, 1.0};
  CHECK(d.contains(w));
  w[0] = 200.0 * 1.001;
  CHECK_FALSE(d.contains(w));
}

TEST_CASE("conditional slices invert membership on random domains") {
  RngStream rng(77, 0);
  int checked = 0;
  for (int rep = 0; rep < 60; ++rep) {
    std::array<bool, 5> held{true, false, false, false, true};
    for (int l = 1; l <= 3; ++l) held[static_cast<std::size_t>(l)] = uniform_open(rng) < 0.6;
    std::array<double, 5> share = kUnitShare;
    if (held[1] && uniform_open(rng) < 0.5) share[1] = 0.4 + 0.6 * uniform_open(rng);

    std::array<double, 5> truth{};
    CensoringEvidence ev;
    double total = 0.0;
    for (int l = 0; l < 5; ++l) {
      if (!held[static_cast<std::size_t>(l)]) continue;
      const double v = std::floor(std::pow(10.0, 1.0 + 5.0 * uniform_open(rng))) + 1.0;
      truth[static_cast<std::size_t>(l)] = v;
      total += share[static_cast<std::size_t>(l)] * v;
      const double u = uniform_open(rng);
      if (u < 0.6) {
        ev.component_bounds[static_cast<std::size_t>(l)] =
            Interval{v * (0.3 + 0.5 * uniform_open(rng)), v * (1.1 + uniform_open(rng))};
      } else if (u < 0.75) {
        ev.component_bounds[static_cast<std::size_t>(l)] = Interval{v, v};
      }
    }
    if (uniform_open(rng) < 0.6)
      ev.total_bracket = Interval{total * 0.8, total * 1.3};
    double theta = kDefaultTaxThreshold;
    if (uniform_open(rng) < 0.5) {
      WealthTaxEvidence tax;
      tax.debt = std::floor(total * 0.1 * uniform_open(rng));
      if (held[3] && uniform_open(rng) < 0.5) {
        tax.maybe_nondeductible = true;
        const double nd = truth[3] * uniform_open(rng);
        tax.nd_min = std::floor(nd * 0.5);
        tax.nd_max = std::ceil(nd * 1.5) + 1.0;
      }
      const double s2 = share[1] * share[1];
      double generous = -tax.debt, conservative = tax.nd_min - tax.debt;
      if (held[0]) generous += truth[0], conservative += truth[0];
      if (held[1]) generous += 0.8 * s2 * truth[1], conservative += 0.8 * s2 * truth[1];
      if (held[2]) generous += truth[2], conservative += truth[2];
      if (tax.maybe_nondeductible) generous += std::min(truth[3], tax.nd_max);
      if (held[4]) generous += truth[4];
      if (uniform_open(rng) < 0.5 && generous > 2.0) {
        tax.pays_tax = true;
        theta = std::max(1.0, generous * 0.7);
      } else {
        tax.pays_tax = false;
        theta = std::max(10.0, conservative * 1.2 + 10.0);
      }
      ev.tax = tax;
    }
    const CensoringDomain d = build_domain(ev, held, share, 5, theta);
    REQUIRE(d.contains(truth));
    if (d.feasible_point()) CHECK(d.contains(*d.feasible_point()));

    for (int l = 0; l < 5; ++l) {
      if (!held[static_cast<std::size_t>(l)]) continue;
      const auto slice = d.conditional_interval(l, truth);
      REQUIRE(slice.has_value());
      const double tol = 1e-8 * std::max({1.0, slice->lo, slice->hi});
      CHECK(truth[static_cast<std::size_t>(l)] >= slice->lo - tol);
      CHECK(truth[static_cast<std::size_t>(l)] <= slice->hi + tol);

      auto probe = [&](double v, bool expect_inside) {
        std::array<double, 5> w = truth;
        w[static_cast<std::size_t>(l)] = v;
        CHECK(d.contains(w) == expect_inside);
        ++checked;
      };
      probe(0.5 * (slice->lo + std::min(slice->hi, slice->lo * 2.0 + 1.0)), true);
      // Membership tolerances scale with each constraint's threshold, so an
      // outside probe must clear the largest threshold in play, not just the
      // slice bound.
      double cross = 1.0;
      if (ev.total_bracket) cross = std::max(cross, 1.3 * total);
      if (ev.tax) cross = std::max(cross, theta);
      const double lo_gap = 1e-3 * std::max(1.0, slice->lo) + 2e-5 * cross;
      if (slice->lo - lo_gap > 0.0) probe(slice->lo - lo_gap, false);
      if (std::isfinite(slice->hi)) {
        const double hi_gap = 1e-3 * std::max(1.0, slice->hi) + 2e-5 * cross;
        probe(slice->hi + hi_gap, false);
        probe(slice->hi - 1e-12 * std::max(1.0, slice->hi), true);
      }
    }
  }
  CHECK(checked > 300);
}

}  // TEST_SUITE
