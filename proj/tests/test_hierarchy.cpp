#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "ineq/errors.hpp"
#include "ineq/hierarchy.hpp"
#include "ineq/variates.hpp"

using namespace ineq;

namespace {

Eigen::MatrixXd random_spd(int d, RngStream& rng) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = std_normal(rng);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

HouseholdRecord full_household(const std::string& id, double x, RngStream& rng) {
  HouseholdRecord h;
  h.id = id;
  h.holdings = HoldingsVector({true, true, true, true, true}, 5);
  for (int l = 0; l < 5; ++l) {
    h.covariates[static_cast<std::size_t>(l)] = {1.0, x};
    (void)rng;
  }
  return h;
}

}  // namespace

TEST_SUITE("hierarchy") {

TEST_CASE("covariance and precision parameterizations give the same conditional") {
  RngStream rng(60, 1);
  for (int d : {2, 3, 5}) {
    const Eigen::MatrixXd sigma = random_spd(d, rng);
    const Eigen::MatrixXd q = sigma.inverse();
    for (int r = 0; r < d; ++r) {
      const ConditionalCoeffs a = component_conditional(sigma, r);
      const ConditionalCoeffs b = precision_conditional(q, r);
      REQUIRE(a.w.size() == d - 1);
      REQUIRE(b.w.size() == d - 1);
      for (Eigen::Index j = 0; j < a.w.size(); ++j)
        CHECK(a.w[j] == doctest::Approx(b.w[j]).epsilon(1e-9));
      CHECK(a.sd == doctest::Approx(b.sd).epsilon(1e-9));
    }
  }
}

TEST_CASE("bivariate conditional matches the closed form") {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 4.0, 1.2, 1.2, 0.9;
  LatentVec mu(2), y(2);
  mu << 1.0, -2.0;
  y << 0.0, -1.0;
  const CondNormal c = component_full_conditional(sigma, 0, mu, y);
  CHECK(c.mean == doctest::Approx(1.0 + 1.2 / 0.9 * (-1.0 + 2.0)));
  CHECK(c.sd == doctest::Approx(std::sqrt(4.0 - 1.2 * 1.2 / 0.9)));
}

TEST_CASE("ill-conditioned precision still yields positive conditional scale") {
  Eigen::MatrixXd q(2, 2);
  q << 1e14, -0.9999e14, -0.9999e14, 1e14;  // SPD, near-singular inverse
  const ConditionalCoeffs cc = precision_conditional(q, 0);
  CHECK(cc.sd == doctest::Approx(1e-7).epsilon(1e-9));
  CHECK(cc.w[0] == doctest::Approx(0.9999));

  Eigen::MatrixXd bad(2, 2);
  bad << 0.0, 0.0, 0.0, 1.0;
  CHECK_THROWS_AS(precision_conditional(bad, 0), ChainError);
  CHECK_THROWS_AS(precision_conditional(q, 2), ValidationError);
}

TEST_CASE("log prior is the sum of scaled log determinants") {
  std::vector<Eigen::MatrixXd> sigma(2);
  sigma[0] = Eigen::MatrixXd::Identity(3, 3) * 2.0;
  sigma[1] = Eigen::MatrixXd();  // absent pattern
  const double expect = -0.5 * 4.0 * 3.0 * std::log(2.0);
  CHECK(log_prior(sigma) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("design rejects groups too small for a proper scatter draw") {
  RngStream rng(61, 1);
  std::vector<HouseholdRecord> hs;
  for (int k = 0; k < 5; ++k)
    hs.push_back(full_household("h" + std::to_string(k), uniform_open(rng) * 10.0, rng));
  CHECK_THROWS_WITH_AS(RegressionDesign(hs, 5),
                       doctest::Contains("aggregate sparse patterns"), ValidationError);
  hs.push_back(full_household("h5", 3.0, rng));
  CHECK_NOTHROW(RegressionDesign(hs, 5));
}

TEST_CASE("column layout names covariate blocks and pattern effects") {
  RngStream rng(62, 1);
  std::vector<HouseholdRecord> hs;
  for (int k = 0; k < 10; ++k)
    hs.push_back(full_household("a" + std::to_string(k), uniform_open(rng) * 10.0, rng));
  for (int k = 0; k < 6; ++k) {
    HouseholdRecord h;
    h.id = "b" + std::to_string(k);
    h.holdings = HoldingsVector({true, false, false, false, true}, 5);
    h.covariates[0] = {1.0, uniform_open(rng) * 10.0};
    h.covariates[4] = {1.0, uniform_open(rng) * 10.0};
    hs.push_back(h);
  }
  const RegressionDesign rd(hs, 5);
  CHECK(rd.patterns() == 8);
  CHECK(rd.total_cols() == 12);
  CHECK(rd.group_size(1) == 10);
  CHECK(rd.group_size(8) == 6);
  CHECK(rd.pattern_dim(8) == 2);
  bool saw_effect = false;
  for (int c = 0; c < rd.total_cols(); ++c)
    if (rd.column_label(c) == "comp5:pattern8") saw_effect = true;
  CHECK(saw_effect);
}

TEST_CASE("household means equal raw covariates times unstandardized coefficients") {
  RngStream rng(63, 1);
  std::vector<HouseholdRecord> hs;
  for (int k = 0; k < 12; ++k)
    hs.push_back(full_household("h" + std::to_string(k), 5.0 + 3.0 * std_normal(rng), rng));
  const RegressionDesign rd(hs, 5);
  Eigen::VectorXd coef(rd.total_cols());
  for (Eigen::Index j = 0; j < coef.size(); ++j) coef[j] = std_normal(rng);
  const Eigen::VectorXd raw = rd.unstandardize(coef);
  LatentVec mu;
  for (std::size_t k = 0; k < hs.size(); ++k) {
    rd.household_mean(coef, k, mu);
    for (int r = 0; r < 5; ++r) {
      const double x = hs[k].covariates[static_cast<std::size_t>(r)][1];
      const double expect = raw[2 * r] + raw[2 * r + 1] * x;
      CHECK(mu[r] == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("identity-precision posterior mean is the per-component least squares fit") {
  RngStream rng(64, 2);
  const int m = 30;
  std::vector<HouseholdRecord> hs;
  Eigen::MatrixXd x(m, 2);
  Eigen::MatrixXd ys(m, 5);
  Latent y(m);
  for (int k = 0; k < m; ++k) {
    const double xv = 5.0 + 3.0 * std_normal(rng);
    hs.push_back(full_household("h" + std::to_string(k), xv, rng));
    x(k, 0) = 1.0;
    x(k, 1) = xv;
    y[static_cast<std::size_t>(k)].resize(5);
    for (int r = 0; r < 5; ++r) {
      ys(k, r) = 0.5 * r + 0.3 * xv + std_normal(rng);
      y[static_cast<std::size_t>(k)][r] = ys(k, r);
    }
  }
  const RegressionDesign rd(hs, 5);
  std::vector<Eigen::MatrixXd> precision(8);
  precision[0] = Eigen::MatrixXd::Identity(5, 5);
  const CoefficientPosterior post = rd.coefficient_full_conditional(precision, y);
  const Eigen::VectorXd raw = rd.unstandardize(post.mean);
  const Eigen::MatrixXd xtx = x.transpose() * x;
  for (int r = 0; r < 5; ++r) {
    const Eigen::VectorXd ols = xtx.ldlt().solve(x.transpose() * ys.col(r));
    CHECK(raw[2 * r] == doctest::Approx(ols[0]).epsilon(1e-8));
    CHECK(raw[2 * r + 1] == doctest::Approx(ols[1]).epsilon(1e-8));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(post.covariance);
  CHECK(llt.info() == Eigen::Success);
  CHECK_THROWS_AS(rd.coefficient_full_conditional({}, y), ValidationError);
}

TEST_CASE("scatter conditional accumulates residual outer products") {
  RngStream rng(65, 2);
  std::vector<HouseholdRecord> hs;
  Latent y;
  for (int k = 0; k < 8; ++k) {
    hs.push_back(full_household("h" + std::to_string(k), 1.0, rng));
    LatentVec v(5);
    for (int r = 0; r < 5; ++r) v[r] = std_normal(rng);
    y.push_back(v);
  }
  const RegressionDesign rd(hs, 5);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(rd.total_cols());
  const ScatterConditional sc = rd.scatter_conditional(1, zero, y);
  CHECK(sc.df == 8);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(5, 5);
  for (const auto& v : y) expect += v * v.transpose();
  CHECK((sc.scatter - expect).norm() < 1e-10);
  CHECK_THROWS_AS(rd.scatter_conditional(3, zero, y), ValidationError);
}

}  // TEST_SUITE
