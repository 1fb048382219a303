#include "ineq/design_variance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "ineq/errors.hpp"

namespace ineq {

namespace {

std::vector<int> strata_of(std::span<const double> w, const DesignView& dv) {
  if (dv.stratum.empty()) return std::vector<int>(w.size(), 0);
  if (dv.stratum.size() != w.size())
    throw ValidationError("stratum labels do not align with the sample");
  return dv.stratum;
}

// Residuals of z on the calibration auxiliaries, weighted least squares.
std::vector<double> calibration_residuals(std::span<const double> z,
                                          std::span<const double> w,
                                          const Eigen::MatrixXd& aux) {
  const auto n = static_cast<Eigen::Index>(z.size());
  if (aux.rows() != n) throw ValidationError("auxiliary matrix does not align with sample");
  const Eigen::Index q = aux.cols();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(q);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto x = aux.row(k).transpose();
    m.noalias() += w[static_cast<std::size_t>(k)] * x * x.transpose();
    r.noalias() += w[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(k)] * x;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-10);
  if (lu.rank() < q) {
    std::ostringstream os;
    os << "calibration auxiliaries are collinear (rank " << lu.rank() << " of " << q
       << "); dependent columns:";
    const auto perm = lu.permutationQ().indices();
    for (Eigen::Index j = lu.rank(); j < q; ++j) os << " " << perm[j];
    throw ValidationError(os.str());
  }
  const Eigen::VectorXd b = lu.solve(r);
  std::vector<double> e(z.size());
  for (Eigen::Index k = 0; k < n; ++k)
    e[static_cast<std::size_t>(k)] = z[static_cast<std::size_t>(k)] - aux.row(k).dot(b);
  return e;
}

VarianceEstimate stratified_expansion(std::span<const double> z,
                                      std::span<const double> w,
                                      const std::vector<int>& stratum) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < z.size(); ++k) groups[stratum[k]].push_back(k);
  VarianceEstimate ve;
  for (const auto& [h, idx] : groups) {
    const auto nh = static_cast<double>(idx.size());
    if (idx.size() < 2) {
      std::ostringstream os;
      os << "stratum " << h << " has a single unit; variance needs at least two";
      throw ValidationError(os.str());
    }
    double wh = 0.0, mean = 0.0;
    for (auto k : idx) wh += w[k];
    for (auto k : idx) mean += z[k];
    mean /= nh;
    double s2 = 0.0;
    for (auto k : idx) s2 += (z[k] - mean) * (z[k] - mean);
    s2 /= (nh - 1.0);
    const double f = std::min(nh / wh, 1.0);
    const double vh = wh * wh * (1.0 - f) * s2 / nh;
    ve.per_stratum.emplace_back(h, vh);
    ve.value += vh;
  }
  return ve;
}

VarianceEstimate unequal_prob_variance(std::span<const double> z,
                                       std::span<const double> w,
                                       const std::vector<int>& stratum) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < z.size(); ++k) groups[stratum[k]].push_back(k);
  VarianceEstimate ve;
  for (const auto& [h, idx] : groups) {
    double d = 0.0;
    for (auto k : idx) {
      if (w[k] < 1.0 - 1e-12)
        throw ValidationError("weight below 1 is not an inverse inclusion probability");
      d += 1.0 - 1.0 / w[k];
    }
    double vh = 0.0;
    if (d > 1e-12) {
      double bhat = 0.0;
      for (auto k : idx) {
        const double pik = 1.0 / w[k];
        bhat += ((1.0 - pik) / d) * (z[k] * w[k]);
      }
      double sum = 0.0, suma2 = 0.0;
      for (auto k : idx) {
        const double pik = 1.0 / w[k];
        const double zk = z[k] * w[k];
        sum += (1.0 - pik) * (zk - bhat) * (zk - bhat);
        const double ak = (1.0 - pik) / d;
        suma2 += ak * ak;
      }
      if (suma2 < 1.0) vh = sum / (1.0 - suma2);
      else vh = sum;
    }
    ve.per_stratum.emplace_back(h, vh);
    ve.value += vh;
  }
  return ve;
}

VarianceEstimate cluster_variance(std::span<const double> z, std::span<const double> w,
                                  const std::vector<int>& stratum,
                                  const std::vector<int>& psu) {
  if (psu.size() != z.size())
    throw ValidationError("psu labels do not align with the sample");
  std::map<int, std::map<int, double>> totals;  // stratum -> psu -> weighted total
  for (std::size_t k = 0; k < z.size(); ++k) totals[stratum[k]][psu[k]] += w[k] * z[k];
  VarianceEstimate ve;
  for (const auto& [h, by_psu] : totals) {
    const auto nh = static_cast<double>(by_psu.size());
    if (by_psu.size() < 2) {
      std::ostringstream os;
      os << "stratum " << h << " has a single PSU; variance needs at least two";
      throw ValidationError(os.str());
    }
    double mean = 0.0;
    for (const auto& [i, t] : by_psu) mean += t;
    mean /= nh;
    double s2 = 0.0;
    for (const auto& [i, t] : by_psu) s2 += (t - mean) * (t - mean);
    const double vh = nh / (nh - 1.0) * s2;
    ve.per_stratum.emplace_back(h, vh);
    ve.value += vh;
  }
  return ve;
}

}  // namespace

double ht_total(std::span<const double> z, std::span<const double> weight) {
  if (z.size() != weight.size()) throw ValidationError("length mismatch in expansion total");
  double t = 0.0, err = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double y = weight[k] * z[k] - err;
    const double s = t + y;
    err = (s - t) - y;
    t = s;
  }
  return t;
}

VarianceEstimate ht_variance(std::span<const double> z, const DesignView& dv) {
  if (z.size() != dv.weight.size())
    throw ValidationError("linearized variable does not align with the design");
  if (z.empty()) throw ValidationError("empty sample");
  const std::vector<int> stratum = strata_of(dv.weight, dv);
  std::vector<double> resid;
  std::span<const double> zz = z;
  if (dv.aux != nullptr) {
    resid = calibration_residuals(z, dv.weight, *dv.aux);
    zz = resid;
  }
  switch (dv.kind) {
    case DesignKind::Srswor:
    case DesignKind::StratifiedSrs:
      return stratified_expansion(zz, dv.weight, stratum);
    case DesignKind::UnequalProbFixedSize:
      return unequal_prob_variance(zz, dv.weight, stratum);
    case DesignKind::TwoStageCluster:
      return cluster_variance(zz, dv.weight, stratum, dv.psu);
  }
  throw ValidationError("unknown design kind");
}

double quantile_bandwidth(const SortedSample& s) {
  const double mean = s.total_wv / s.total_w;
  double var = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j)
    var += s.weight[j] * (s.value[j] - mean) * (s.value[j] - mean);
  var /= s.total_w;
  const double sd = std::sqrt(std::max(var, 0.0));
  const double n = static_cast<double>(s.size());
  const double h = sd * std::pow(n, -0.2);
  return h > 0.0 ? h : 1.0;
}

namespace {

double weighted_cdf(const SortedSample& s, double x) {
  // mass of values <= x
  const auto it = std::upper_bound(s.value.begin(), s.value.end(), x);
  if (it == s.value.begin()) return 0.0;
  const auto j = static_cast<std::size_t>(it - s.value.begin()) - 1;
  return s.cum_w[j] / s.total_w;
}

// z in sorted order for a single quantile.
std::vector<double> quantile_scores(const SortedSample& s, double p) {
  const double q = weighted_quantile(s, p);
  double h = quantile_bandwidth(s);
  double dens = 0.0;
  for (int tries = 0; tries < 60; ++tries) {
    dens = (weighted_cdf(s, q + h) - weighted_cdf(s, q - h)) / (2.0 * h);
    if (dens > 0.0) break;
    h *= 2.0;
  }
  std::vector<double> z(s.size(), 0.0);
  if (dens <= 0.0) return z;  // degenerate distribution: quantile insensitive
  const double denom = s.total_w * dens;
  for (std::size_t j = 0; j < s.size(); ++j)
    z[j] = -(((s.value[j] <= q) ? 1.0 : 0.0) - p) / denom;
  return z;
}

}  // namespace

std::vector<double> linearize(const SummarySpec& spec, const SortedSample& s) {
  const std::size_t n = s.size();
  const double w_tot = s.total_w;
  const double t_tot = s.total_wv;
  std::vector<double> zs(n, 0.0);  // sorted order
  switch (spec.kind) {
    case SummaryKind::Mean: {
      const double mean = t_tot / w_tot;
      for (std::size_t j = 0; j < n; ++j) zs[j] = (s.value[j] - mean) / w_tot;
      break;
    }
    case SummaryKind::Quantile: {
      zs = quantile_scores(s, spec.p);
      break;
    }
    case SummaryKind::QuantileRatio: {
      const std::vector<double> zn = quantile_scores(s, spec.p_num);
      const std::vector<double> zd = quantile_scores(s, spec.p_den);
      const double qn = weighted_quantile(s, spec.p_num);
      const double qd = weighted_quantile(s, spec.p_den);
      if (qd == 0.0) throw ValidationError("quantile ratio with zero denominator");
      for (std::size_t j = 0; j < n; ++j)
        zs[j] = zn[j] / qd - qn / (qd * qd) * zd[j];
      break;
    }
    case SummaryKind::Gini: {
      const double g1 = weighted_gini(s) + 1.0;
      // suffix sum of w v strictly after position j
      double suffix = 0.0;
      std::vector<double> after(n, 0.0);
      for (std::size_t j = n; j-- > 0;) {
        after[j] = suffix;
        suffix += s.weight[j] * s.value[j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        zs[j] = (2.0 * s.cum_w[j] * s.value[j] + 2.0 * after[j]) / (w_tot * t_tot) -
                g1 * (1.0 / w_tot + s.value[j] / t_tot);
      }
      break;
    }
    case SummaryKind::Theil: {
      double hsum = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        hsum += s.weight[j] * s.value[j] * std::log(s.value[j]);
      for (std::size_t j = 0; j < n; ++j) {
        const double v = s.value[j];
        zs[j] = v * std::log(v) / t_tot - hsum * v / (t_tot * t_tot) - v / t_tot +
                1.0 / w_tot;
      }
      break;
    }
    case SummaryKind::Atkinson: {
      if (s.value.front() <= 0.0)
        throw ValidationError("atkinson linearization requires positive values");
      if (spec.epsilon == 1.0) {
        double lsum = 0.0;
        for (std::size_t j = 0; j < n; ++j) lsum += s.weight[j] * std::log(s.value[j]);
        const double lbar = lsum / w_tot;
        const double r = std::exp(lbar) * w_tot / t_tot;
        for (std::size_t j = 0; j < n; ++j)
          zs[j] = -r * ((std::log(s.value[j]) - lbar) / w_tot + 1.0 / w_tot -
                        s.value[j] / t_tot);
      } else {
        const double c = 1.0 - spec.epsilon;
        double psum = 0.0;
        for (std::size_t j = 0; j < n; ++j) psum += s.weight[j] * std::pow(s.value[j], c);
        const double r = std::pow(psum / w_tot, 1.0 / c) * w_tot / t_tot;
        for (std::size_t j = 0; j < n; ++j)
          zs[j] = -r * (std::pow(s.value[j], c) / (c * psum) + (c - 1.0) / (c * w_tot) -
                        s.value[j] / t_tot);
      }
      break;
    }
  }
  std::vector<double> z(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) z[s.orig[j]] = zs[j];
  return z;
}

std::vector<double> linearize(const SummarySpec& spec, const WeightedSample& ws) {
  return linearize(spec, SortedSample::from(ws));
}

VarianceEstimate linearized_variance(const SummarySpec& spec, const SortedSample& s,
                                     const DesignView& dv) {
  return ht_variance(linearize(spec, s), dv);
}

VarianceEstimate jackknife_variance(const SummarySpec& spec, const WeightedSample& ws,
                                    const DesignView& dv) {
  const std::size_t n = ws.values.size();
  if (dv.weight.size() != n) throw ValidationError("design does not align with sample");
  const std::vector<int> stratum = strata_of(dv.weight, dv);
  const bool by_psu = dv.kind == DesignKind::TwoStageCluster;
  if (by_psu && dv.psu.size() != n)
    throw ValidationError("psu labels do not align with the sample");

  // Deletion groups: units, or whole PSUs for the two-stage design.
  std::map<int, std::vector<std::vector<std::size_t>>> groups;
  if (by_psu) {
    std::map<int, std::map<int, std::vector<std::size_t>>> tmp;
    for (std::size_t k = 0; k < n; ++k) tmp[stratum[k]][dv.psu[k]].push_back(k);
    for (auto& [h, psus] : tmp)
      for (auto& [p, idx] : psus) groups[h].push_back(std::move(idx));
  } else {
    for (std::size_t k = 0; k < n; ++k)
      groups[stratum[k]].push_back(std::vector<std::size_t>{k});
  }

  VarianceEstimate ve;
  WeightedSample work;
  for (const auto& [h, units] : groups) {
    const auto nh = static_cast<double>(units.size());
    if (units.size() < 2) {
      std::ostringstream os;
      os << "stratum " << h << " has a single deletion group; jackknife needs at least two";
      throw ValidationError(os.str());
    }
    double wh = 0.0, count_h = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (stratum[k] == h) {
        wh += dv.weight[k];
        count_h += 1.0;
      }
    const double fh = by_psu ? 0.0 : std::min(count_h / wh, 1.0);
    const double scale = nh / (nh - 1.0);
    std::vector<double> thetas;
    thetas.reserve(units.size());
    std::vector<char> drop(n, 0);
    for (const auto& del : units) {
      for (auto k : del) drop[k] = 1;
      work.values.clear();
      work.weights.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (drop[k]) continue;
        const double w =
            stratum[k] == h ? dv.weight[k] * scale : dv.weight[k];
        work.values.push_back(ws.values[k]);
        work.weights.push_back(w);
      }
      thetas.push_back(evaluate_summary(spec, work));
      for (auto k : del) drop[k] = 0;
    }
    double mean = 0.0;
    for (double t : thetas) mean += t;
    mean /= nh;
    double ss = 0.0;
    for (double t : thetas) ss += (t - mean) * (t - mean);
    const double vh = (1.0 - fh) * ((nh - 1.0) / nh) * ss;
    ve.per_stratum.emplace_back(h, vh);
    ve.value += vh;
  }
  return ve;
}

NonresponseResult nonresponse_adjust(std::span<const double> weight,
                                     std::span<const int> stratum,
                                     std::span<const bool> responded) {
  const std::size_t n = weight.size();
  if (stratum.size() != n || responded.size() != n)
    throw ValidationError("nonresponse inputs do not align");
  std::map<int, double> tot, resp;
  for (std::size_t k = 0; k < n; ++k) {
    tot[stratum[k]] += weight[k];
    if (responded[k]) resp[stratum[k]] += weight[k];
  }
  NonresponseResult out;
  for (const auto& [h, t] : tot) {
    const double r = resp.count(h) ? resp.at(h) : 0.0;
    if (!(r > 0.0)) {
      std::ostringstream os;
      os << "stratum " << h << " has no respondents";
      throw ValidationError(os.str());
    }
    out.rates.emplace_back(h, r / t);
  }
  std::map<int, double> rate;
  for (const auto& [h, r] : out.rates) rate[h] = r;
  for (std::size_t k = 0; k < n; ++k) {
    if (!responded[k]) continue;
    out.weights.push_back(weight[k] / rate.at(stratum[k]));
    out.kept.push_back(k);
  }
  return out;
}

std::vector<double> calibrate(std::span<const double> weight, const Eigen::MatrixXd& aux,
                              const Eigen::VectorXd& totals) {
  const auto n = static_cast<Eigen::Index>(weight.size());
  if (aux.rows() != n) throw ValidationError("auxiliary matrix does not align with weights");
  if (aux.cols() != totals.size())
    throw ValidationError("calibration totals do not match auxiliary columns");
  const Eigen::Index q = aux.cols();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd have = Eigen::VectorXd::Zero(q);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto x = aux.row(k).transpose();
    m.noalias() += weight[static_cast<std::size_t>(k)] * x * x.transpose();
    have.noalias() += weight[static_cast<std::size_t>(k)] * x;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-10);
  if (lu.rank() < q) {
    std::ostringstream os;
    os << "calibration auxiliaries are collinear (rank " << lu.rank() << " of " << q
       << "); dependent columns:";
    const auto perm = lu.permutationQ().indices();
    for (Eigen::Index j = lu.rank(); j < q; ++j) os << " " << perm[j];
    throw ValidationError(os.str());
  }
  const Eigen::VectorXd lambda = lu.solve(totals - have);
  std::vector<double> out(weight.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    const double wk =
        weight[static_cast<std::size_t>(k)] * (1.0 + aux.row(k).dot(lambda));
    out[static_cast<std::size_t>(k)] = wk;
  }
  return out;
}

}  // namespace ineq
