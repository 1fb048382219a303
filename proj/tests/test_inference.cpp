#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "ineq/errors.hpp"
#include "ineq/inference.hpp"
#include "ineq/variates.hpp"

using namespace ineq;

namespace {

ChainOutput synthetic_chain(int total, int burn, double vhat, std::uint64_t seed) {
  ChainOutput co;
  co.summaries = {SummarySpec::parse("gini")};
  co.total_sweeps = total;
  co.burn_in = burn;
  RngStream rng(90, seed);
  for (int n = 0; n < total; ++n) {
    co.e.push_back(std_normal(rng));
    co.sweeps.push_back({SweepRecord{static_cast<double>(n), vhat}});
  }
  return co;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("posterior mean and empty-series guards") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  CHECK(posterior_mean(xs) == doctest::Approx(2.5).epsilon(1e-14));
  const std::vector<double> empty;
  CHECK_THROWS_AS(posterior_mean(empty), ValidationError);
  CHECK_THROWS_AS(equal_tailed_region(empty, 0.1), ValidationError);
  CHECK_THROWS_AS(convergence_report(empty, 0), ValidationError);
}

TEST_CASE("equal-tailed region interpolates empirical quantiles") {
  std::vector<double> draws(100);
  std::iota(draws.begin(), draws.end(), 1.0);
  std::reverse(draws.begin(), draws.end());  // order must not matter
  const auto [lo, hi] = equal_tailed_region(draws, 0.1);
  // position (n-1)p: 4.95 -> 5.95, 94.05 -> 95.05
  CHECK(lo == doctest::Approx(5.95).epsilon(1e-12));
  CHECK(hi == doctest::Approx(95.05).epsilon(1e-12));
  const auto [l2, h2] = equal_tailed_region(std::vector<double>{7.0}, 0.5);
  CHECK(l2 == 7.0);
  CHECK(h2 == 7.0);
  CHECK_THROWS_AS(equal_tailed_region(draws, 0.0), ValidationError);
  CHECK_THROWS_AS(equal_tailed_region(draws, 1.0), ValidationError);
}

TEST_CASE("batch-means error matches the iid rate") {
  RngStream rng(91, 4);
  const std::size_t n = 4096;
  std::vector<double> draws(n);
  for (auto& d : draws) d = std_normal(rng);
  const ConvergenceReport r = convergence_report(draws, 0);
  const double iid_se = 1.0 / std::sqrt(static_cast<double>(n));
  CHECK(r.mcse > 0.6 * iid_se);
  CHECK(r.mcse < 1.6 * iid_se);
  CHECK(r.ess > 0.55 * static_cast<double>(n));
  CHECK(r.ess <= static_cast<double>(n));
  CHECK_FALSE(r.drift_flag);
}

TEST_CASE("drift is flagged on a trending series and not on a flat one") {
  const std::size_t n = 2000;
  std::vector<double> trend(n), flat(n, 3.25);
  RngStream rng(92, 1);
  for (std::size_t i = 0; i < n; ++i)
    trend[i] = static_cast<double>(i) / static_cast<double>(n) + 0.05 * std_normal(rng);
  const ConvergenceReport rt = convergence_report(trend, 100);
  CHECK(rt.drift_flag);
  CHECK(rt.split_delta == doctest::Approx(0.5).epsilon(0.05));
  CHECK(rt.tail_slope > 0.0);
  const ConvergenceReport rf = convergence_report(flat, 100);
  CHECK_FALSE(rf.drift_flag);
  CHECK(rf.mcse == 0.0);
  CHECK(rf.ess == doctest::Approx(static_cast<double>(n)));
}

TEST_CASE("running mean is thinned and anchored at the last sweep") {
  std::vector<double> draws(1000);
  std::iota(draws.begin(), draws.end(), 0.0);
  const ConvergenceReport r = convergence_report(draws, 500, 100);
  CHECK(r.running_mean.size() == 100);
  CHECK(r.running_mean.front().first == 509);
  CHECK(r.running_mean.front().second == doctest::Approx(4.5).epsilon(1e-13));
  CHECK(r.running_mean.back().first == 1499);
  CHECK(r.running_mean.back().second == doctest::Approx(499.5).epsilon(1e-13));
}

TEST_CASE("chain summary drops burn-in and recombines the draw components") {
  const ChainOutput co = synthetic_chain(100, 20, 4.0, 11);
  const InferenceResult res = summarize_chain(co, 0.1);
  CHECK(res.n_used == 80);
  CHECK(res.chains == 1);
  REQUIRE(res.rows.size() == 1);
  const SummaryPosterior& row = res.rows[0];
  CHECK(row.prediction == doctest::Approx(59.5).epsilon(1e-13));
  CHECK(row.lower < row.upper);

  std::vector<double> g;
  for (int n = 20; n < 100; ++n) g.push_back(static_cast<double>(n) + 2.0 * co.e[static_cast<std::size_t>(n)]);
  CHECK(row.posterior_sd ==
        doctest::Approx(std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0,
                                                     std::plus<>(),
                                                     [m = posterior_mean(g)](double a, double b) {
                                                       return (a - m) * (b - m);
                                                     }) /
                                  (static_cast<double>(g.size()) - 1.0)))
            .epsilon(1e-12));
  const auto [lo, hi] = equal_tailed_region(g, 0.1);
  CHECK(row.lower == doctest::Approx(lo).epsilon(1e-12));
  CHECK(row.upper == doctest::Approx(hi).epsilon(1e-12));
}

TEST_CASE("multi-chain pooling widens the sample and checks configuration") {
  const ChainOutput a = synthetic_chain(60, 10, 1.0, 21);
  const ChainOutput b = synthetic_chain(60, 10, 1.0, 22);
  const InferenceResult res = summarize_chains({a, b}, 0.2);
  CHECK(res.chains == 2);
  CHECK(res.n_used == 100);
  CHECK(res.rows[0].prediction == doctest::Approx(34.5).epsilon(1e-13));

  ChainOutput c = synthetic_chain(50, 10, 1.0, 23);
  CHECK_THROWS_AS(summarize_chains({a, c}, 0.2), ValidationError);
  CHECK_THROWS_AS(summarize_chains({}, 0.2), ValidationError);
}

}  // TEST_SUITE
