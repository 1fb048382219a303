#include "ineq/hierarchy.hpp"

#include <cmath>
#include <sstream>

#include "ineq/errors.hpp"

namespace ineq {

ConditionalCoeffs component_conditional(const Eigen::MatrixXd& sigma, int r) {
  const Eigen::Index p = sigma.rows();
  if (sigma.cols() != p || r < 0 || r >= p)
    throw ValidationError("conditional coordinate out of range");
  ConditionalCoeffs cc;
  if (p == 1) {
    cc.w.resize(0);
    cc.sd = std::sqrt(sigma(0, 0));
    return cc;
  }
  Eigen::MatrixXd rest(p - 1, p - 1);
  Eigen::VectorXd cross(p - 1);
  Eigen::Index a = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (i == r) continue;
    cross[a] = sigma(i, r);
    Eigen::Index b = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (j == r) continue;
      rest(a, b) = sigma(i, j);
      ++b;
    }
    ++a;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(rest);
  if (llt.info() != Eigen::Success)
    throw ChainError("pattern covariance has a singular principal block");
  const Eigen::VectorXd w = llt.solve(cross);
  const double var = sigma(r, r) - cross.dot(w);
  if (!(var > 0.0))
    throw ChainError("conditional variance is not positive");
  cc.w = w;
  cc.sd = std::sqrt(var);
  return cc;
}

ConditionalCoeffs precision_conditional(const Eigen::MatrixXd& q, int r) {
  const Eigen::Index p = q.rows();
  if (q.cols() != p || r < 0 || r >= p)
    throw ValidationError("conditional coordinate out of range");
  const double qrr = q(r, r);
  if (!(qrr > 0.0) || !std::isfinite(qrr))
    throw ChainError("precision diagonal is not positive");
  ConditionalCoeffs cc;
  cc.w.resize(p - 1);
  Eigen::Index a = 0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (j == r) continue;
    cc.w[a] = -q(r, j) / qrr;
    ++a;
  }
  cc.sd = 1.0 / std::sqrt(qrr);
  return cc;
}

CondNormal component_full_conditional(const Eigen::MatrixXd& sigma, int r,
                                      const LatentVec& mu, const LatentVec& y) {
  const ConditionalCoeffs cc = component_conditional(sigma, r);
  double m = mu[r];
  Eigen::Index a = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (i == r) continue;
    m += cc.w[a] * (y[i] - mu[i]);
    ++a;
  }
  return {m, cc.sd};
}

double log_prior(const std::vector<Eigen::MatrixXd>& sigma) {
  double lp = 0.0;
  for (const auto& s : sigma) {
    if (s.size() == 0) continue;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
      throw ValidationError("log prior of a non-SPD covariance");
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      logdet += 2.0 * std::log(llt.matrixL()(i, i));
    lp += -0.5 * static_cast<double>(s.rows() + 1) * logdet;
  }
  return lp;
}

RegressionDesign::RegressionDesign(const std::vector<HouseholdRecord>& households,
                                   int component_count)
    : component_count_(component_count) {
  pattern_count_ = ineq::pattern_count(component_count);
  if (households.empty()) throw ValidationError("regression design over an empty sample");
  members_.resize(static_cast<std::size_t>(pattern_count_));
  dims_.resize(static_cast<std::size_t>(pattern_count_));
  cov_dim_.assign(static_cast<std::size_t>(component_count_), 0);
  pattern_of_.reserve(households.size());

  for (std::size_t k = 0; k < households.size(); ++k) {
    const auto& h = households[k];
    if (h.holdings.component_count() != component_count_)
      throw ValidationError("household '" + h.id + "' has the wrong component count");
    const int pat = h.holdings.pattern();
    pattern_of_.push_back(pat);
    members_[static_cast<std::size_t>(pat - 1)].push_back(k);
    for (int l = 0; l < component_count_; ++l) {
      if (!h.holdings.holds(l)) continue;
      const auto li = static_cast<std::size_t>(l);
      const int d = static_cast<int>(h.covariates[li].size());
      if (d == 0)
        throw ValidationError("household '" + h.id + "' holds a component without covariates");
      if (cov_dim_[li] == 0) cov_dim_[li] = d;
      else if (cov_dim_[li] != d)
        throw ValidationError("covariate dimension differs across households for component " +
                              std::to_string(l + 1));
    }
  }
  for (int p = 1; p <= pattern_count_; ++p)
    dims_[static_cast<std::size_t>(p - 1)] =
        HoldingsVector::from_pattern(p, component_count_).held_count();

  // Column layout: covariate blocks, then pattern effects for patterns >= 2.
  block_offset_.assign(static_cast<std::size_t>(component_count_), 0);
  int col = 0;
  for (int l = 0; l < component_count_; ++l) {
    block_offset_[static_cast<std::size_t>(l)] = col;
    if (cov_dim_[static_cast<std::size_t>(l)] == 0)
      throw ValidationError("no household holds component " + std::to_string(l + 1));
    for (int j = 0; j < cov_dim_[static_cast<std::size_t>(l)]; ++j) {
      std::ostringstream os;
      os << "comp" << (l + 1) << ":x" << j;
      labels_.push_back(os.str());
      ++col;
    }
  }
  beta_col_.assign(static_cast<std::size_t>(pattern_count_),
                   std::vector<int>(static_cast<std::size_t>(component_count_), -1));
  for (int p = 2; p <= pattern_count_; ++p) {
    if (members_[static_cast<std::size_t>(p - 1)].empty()) continue;
    const HoldingsVector hv = HoldingsVector::from_pattern(p, component_count_);
    for (int r = 0; r < hv.held_count(); ++r) {
      const int l = hv.held_component(r);
      beta_col_[static_cast<std::size_t>(p - 1)][static_cast<std::size_t>(l)] = col;
      std::ostringstream os;
      os << "comp" << (l + 1) << ":pattern" << p;
      labels_.push_back(os.str());
      ++col;
    }
  }
  total_cols_ = col;

  // Group sizes must leave the per-pattern Wishart proper.
  for (int p = 1; p <= pattern_count_; ++p) {
    const int m = group_size(p);
    if (m == 0) continue;
    const int need = dims_[static_cast<std::size_t>(p - 1)] + 1;
    if (m < need) {
      std::ostringstream os;
      os << "portfolio pattern " << p << " has " << m << " households but needs at least "
         << need << "; aggregate sparse patterns upstream";
      throw ValidationError(os.str());
    }
  }

  // Standardization moments per covariate column (constant column untouched).
  center_.assign(static_cast<std::size_t>(total_cols_), 0.0);
  scale_.assign(static_cast<std::size_t>(total_cols_), 1.0);
  for (int l = 0; l < component_count_; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const int d = cov_dim_[li];
    for (int j = 1; j < d; ++j) {
      double n = 0.0, mean = 0.0;
      for (const auto& h : households) {
        if (!h.holdings.holds(l)) continue;
        mean += h.covariates[li][static_cast<std::size_t>(j)];
        n += 1.0;
      }
      mean /= n;
      double ss = 0.0;
      for (const auto& h : households) {
        if (!h.holdings.holds(l)) continue;
        const double dlt = h.covariates[li][static_cast<std::size_t>(j)] - mean;
        ss += dlt * dlt;
      }
      const double sd = std::sqrt(ss / std::max(n - 1.0, 1.0));
      const auto c = static_cast<std::size_t>(block_offset_[li] + j);
      if (sd > 1e-12 * (1.0 + std::abs(mean))) {
        center_[c] = mean;
        scale_[c] = sd;
      }
    }
  }

  // Shared sparse structure per pattern, values per household, cross moments.
  row_cols_.resize(static_cast<std::size_t>(pattern_count_));
  for (int p = 1; p <= pattern_count_; ++p) {
    if (members_[static_cast<std::size_t>(p - 1)].empty()) continue;
    const HoldingsVector hv = HoldingsVector::from_pattern(p, component_count_);
    auto& rows = row_cols_[static_cast<std::size_t>(p - 1)];
    rows.resize(static_cast<std::size_t>(hv.held_count()));
    for (int r = 0; r < hv.held_count(); ++r) {
      const int l = hv.held_component(r);
      const auto li = static_cast<std::size_t>(l);
      auto& rc = rows[static_cast<std::size_t>(r)].cols;
      for (int j = 0; j < cov_dim_[li]; ++j) rc.push_back(block_offset_[li] + j);
      const int bc = beta_col_[static_cast<std::size_t>(p - 1)][li];
      if (bc >= 0) rc.push_back(bc);
    }
  }

  vals_.resize(households.size());
  for (std::size_t k = 0; k < households.size(); ++k) {
    const auto& h = households[k];
    const int p = pattern_of_[k];
    const auto& rows = row_cols_[static_cast<std::size_t>(p - 1)];
    vals_[k].resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int l = h.holdings.held_component(static_cast<int>(r));
      const auto li = static_cast<std::size_t>(l);
      const auto& rc = rows[r].cols;
      Eigen::VectorXd v(static_cast<Eigen::Index>(rc.size()));
      for (std::size_t a = 0; a < rc.size(); ++a) {
        const int c = rc[a];
        if (c >= block_offset_[li] && c < block_offset_[li] + cov_dim_[li]) {
          const int j = c - block_offset_[li];
          const auto ci = static_cast<std::size_t>(c);
          v[static_cast<Eigen::Index>(a)] =
              (h.covariates[li][static_cast<std::size_t>(j)] - center_[ci]) / scale_[ci];
        } else {
          v[static_cast<Eigen::Index>(a)] = 1.0;  // pattern effect indicator
        }
      }
      vals_[k][r] = std::move(v);
    }
  }

  cross_.resize(static_cast<std::size_t>(pattern_count_));
  for (int p = 1; p <= pattern_count_; ++p) {
    const auto pi = static_cast<std::size_t>(p - 1);
    if (members_[pi].empty()) continue;
    const auto& rows = row_cols_[pi];
    auto& cp = cross_[pi];
    cp.resize(rows.size());
    for (std::size_t r1 = 0; r1 < rows.size(); ++r1) {
      cp[r1].resize(rows.size());
      for (std::size_t r2 = 0; r2 < rows.size(); ++r2)
        cp[r1][r2] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows[r1].cols.size()),
                                           static_cast<Eigen::Index>(rows[r2].cols.size()));
    }
    for (auto k : members_[pi])
      for (std::size_t r1 = 0; r1 < rows.size(); ++r1)
        for (std::size_t r2 = 0; r2 < rows.size(); ++r2)
          cp[r1][r2].noalias() += vals_[k][r1] * vals_[k][r2].transpose();
  }
}

void RegressionDesign::household_mean(const Eigen::VectorXd& coef, std::size_t k,
                                      LatentVec& mu) const {
  const auto& rows = row_cols_[static_cast<std::size_t>(pattern_of_[k] - 1)];
  mu.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& rc = rows[r].cols;
    const auto& v = vals_[k][r];
    double m = 0.0;
    for (std::size_t a = 0; a < rc.size(); ++a)
      m += v[static_cast<Eigen::Index>(a)] * coef[rc[a]];
    mu[static_cast<Eigen::Index>(r)] = m;
  }
}

CoefficientPosterior RegressionDesign::coefficient_full_conditional(
    const std::vector<Eigen::MatrixXd>& precision, const Latent& y) const {
  if (precision.size() != static_cast<std::size_t>(pattern_count_))
    throw ValidationError("one precision matrix per pattern required");
  if (y.size() != vals_.size())
    throw ValidationError("latent state does not align with the design");
  Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(total_cols_, total_cols_);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(total_cols_);
  for (int p = 1; p <= pattern_count_; ++p) {
    const auto pi = static_cast<std::size_t>(p - 1);
    if (members_[pi].empty()) continue;
    const int d = dims_[pi];
    if (precision[pi].rows() != d || precision[pi].cols() != d)
      throw ValidationError("pattern precision has the wrong dimension");
    const Eigen::MatrixXd& q = precision[pi];
    const auto& rows = row_cols_[pi];
    for (int r1 = 0; r1 < d; ++r1) {
      for (int r2 = 0; r2 < d; ++r2) {
        const double qv = q(r1, r2);
        if (qv == 0.0) continue;
        const auto& c1 = rows[static_cast<std::size_t>(r1)].cols;
        const auto& c2 = rows[static_cast<std::size_t>(r2)].cols;
        const Eigen::MatrixXd& cm = cross_[pi][static_cast<std::size_t>(r1)]
                                          [static_cast<std::size_t>(r2)];
        for (std::size_t a = 0; a < c1.size(); ++a)
          for (std::size_t b = 0; b < c2.size(); ++b)
            prec(c1[a], c2[b]) += qv * cm(static_cast<Eigen::Index>(a),
                                          static_cast<Eigen::Index>(b));
      }
    }
    LatentVec v;
    for (auto k : members_[pi]) {
      v.noalias() = q * y[k];
      for (int r = 0; r < d; ++r) {
        const auto& rc = rows[static_cast<std::size_t>(r)].cols;
        const auto& xv = vals_[k][static_cast<std::size_t>(r)];
        for (std::size_t a = 0; a < rc.size(); ++a)
          rhs[rc[a]] += v[r] * xv[static_cast<Eigen::Index>(a)];
      }
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(prec);
    lu.setThreshold(1e-9);
    std::ostringstream os;
    os << "design columns are collinear (rank " << lu.rank() << " of " << total_cols_
       << "); suspect columns:";
    const auto perm = lu.permutationQ().indices();
    for (Eigen::Index j = lu.rank(); j < total_cols_; ++j)
      os << " " << labels_[static_cast<std::size_t>(perm[j])];
    throw ValidationError(os.str());
  }
  CoefficientPosterior post;
  post.mean = llt.solve(rhs);
  post.covariance = llt.solve(Eigen::MatrixXd::Identity(total_cols_, total_cols_));
  return post;
}

ScatterConditional RegressionDesign::scatter_conditional(int pattern,
                                                         const Eigen::VectorXd& coef,
                                                         const Latent& y) const {
  const auto pi = static_cast<std::size_t>(pattern - 1);
  if (pattern < 1 || pattern > pattern_count_ || members_[pi].empty())
    throw ValidationError("scatter requested for an absent pattern");
  const int d = dims_[pi];
  ScatterConditional sc;
  sc.df = static_cast<int>(members_[pi].size());
  sc.scatter = Eigen::MatrixXd::Zero(d, d);
  LatentVec mu, resid;
  for (auto k : members_[pi]) {
    household_mean(coef, k, mu);
    resid = y[k] - mu;
    sc.scatter.noalias() += resid * resid.transpose();
  }
  return sc;
}

Eigen::VectorXd RegressionDesign::unstandardize(const Eigen::VectorXd& coef) const {
  if (coef.size() != total_cols_) throw ValidationError("coefficient length mismatch");
  Eigen::VectorXd out = coef;
  for (int l = 0; l < component_count_; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const int off = block_offset_[li];
    double shift = 0.0;
    for (int j = 1; j < cov_dim_[li]; ++j) {
      const auto c = static_cast<std::size_t>(off + j);
      out[off + j] = coef[off + j] / scale_[c];
      shift += coef[off + j] * center_[c] / scale_[c];
    }
    out[off] = coef[off] - shift;
  }
  return out;
}

}  // namespace ineq
