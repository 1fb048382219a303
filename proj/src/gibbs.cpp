#include "ineq/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "ineq/errors.hpp"

namespace ineq {

std::string variance_mode_name(VarianceMode m) {
  switch (m) {
    case VarianceMode::Linearization: return "linearization";
    case VarianceMode::Jackknife: return "jackknife";
    case VarianceMode::FastApprox: return "fast_approx";
  }
  throw ValidationError("unknown variance mode");
}

VarianceMode variance_mode_from_name(const std::string& name) {
  if (name == "linearization") return VarianceMode::Linearization;
  if (name == "jackknife") return VarianceMode::Jackknife;
  if (name == "fast_approx") return VarianceMode::FastApprox;
  throw ValidationError("unknown variance mode: " + name);
}

namespace {

std::vector<HouseholdRecord> sorted_households(const Dataset& ds) {
  validate_dataset(ds);
  std::vector<HouseholdRecord> hs = ds.households;
  std::sort(hs.begin(), hs.end(),
            [](const HouseholdRecord& a, const HouseholdRecord& b) { return a.id < b.id; });
  return hs;
}

void check_design_counts(const PreparedDataset& p) {
  std::map<int, int> per_stratum;
  std::map<std::pair<int, int>, int> per_psu;
  std::map<int, std::map<int, int>> psus;
  for (const auto& h : p.households) {
    per_stratum[h.stratum]++;
    psus[h.stratum][h.psu]++;
  }
  if (p.view.kind == DesignKind::TwoStageCluster) {
    for (const auto& [h, m] : psus)
      if (m.size() < 2) {
        std::ostringstream os;
        os << "stratum " << h << " has fewer than two PSUs";
        throw ValidationError(os.str());
      }
  } else {
    for (const auto& [h, n] : per_stratum)
      if (n < 2) {
        std::ostringstream os;
        os << "stratum " << h << " has fewer than two households";
        throw ValidationError(os.str());
      }
  }
  if (p.view.kind == DesignKind::UnequalProbFixedSize)
    for (double w : p.weights)
      if (w < 1.0 - 1e-12)
        throw ValidationError("weight below 1 under an inverse-probability design");
}

}  // namespace

PreparedDataset::PreparedDataset(const Dataset& ds)
    : component_count(ds.component_count),
      cap(ds.cap),
      tax_threshold(ds.tax_threshold),
      households(sorted_households(ds)),
      design(households, ds.component_count) {
  domains.reserve(households.size());
  for (const auto& h : households) {
    try {
      domains.push_back(build_domain(h.evidence, h.holdings.flags(), h.share,
                                     component_count, tax_threshold, cap));
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("household '" + h.id + "': " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("household '" + h.id + "': " + e.what());
    }
  }
  weights.reserve(households.size());
  for (const auto& h : households) weights.push_back(h.weight);
  if (ds.calibration_totals) {
    const auto q = static_cast<Eigen::Index>(ds.calibration_totals->size());
    aux_matrix.resize(static_cast<Eigen::Index>(households.size()), q);
    for (std::size_t k = 0; k < households.size(); ++k)
      for (Eigen::Index j = 0; j < q; ++j)
        aux_matrix(static_cast<Eigen::Index>(k), j) = households[k].aux[static_cast<std::size_t>(j)];
    Eigen::VectorXd totals(q);
    for (Eigen::Index j = 0; j < q; ++j)
      totals[j] = (*ds.calibration_totals)[static_cast<std::size_t>(j)];
    weights = calibrate(weights, aux_matrix, totals);
    for (double w : weights)
      if (!(w > 0.0))
        throw ValidationError(
            "calibration produced a non-positive weight; totals are inconsistent "
            "with the sample");
  }
  view.kind = ds.design.kind;
  view.weight = weights;
  view.stratum.reserve(households.size());
  view.psu.reserve(households.size());
  for (const auto& h : households) {
    view.stratum.push_back(h.stratum);
    view.psu.push_back(h.psu);
  }
  view.aux = ds.calibration_totals ? &aux_matrix : nullptr;
  check_design_counts(*this);
}

double ChainOutput::g_draw(std::size_t n, std::size_t s) const {
  const SweepRecord& r = sweeps[n][s];
  return r.ghat + std::sqrt(std::max(r.vhat, 0.0)) * e[n];
}

GibbsSampler::GibbsSampler(const PreparedDataset& prep, const ChainConfig& cfg)
    : prep_(prep), cfg_(cfg) {
  if (cfg_.total_sweeps < 1) throw ValidationError("total sweeps must be positive");
  if (cfg_.burn_in < 0 || cfg_.burn_in >= cfg_.total_sweeps)
    throw ValidationError("burn-in must be shorter than the chain");
  if (cfg_.fast_approx_stride < 1)
    throw ValidationError("variance stride must be positive");
  summaries_ = cfg_.summaries.empty() ? default_summary_set() : cfg_.summaries;
  param_rng_ = RngStream(cfg_.seed, chain_stream(cfg_.chain_index, kStreamParams));
  error_rng_ = RngStream(cfg_.seed, chain_stream(cfg_.chain_index, kStreamModelError));
  household_rng_.reserve(prep_.households.size());
  for (std::size_t k = 0; k < prep_.households.size(); ++k)
    household_rng_.emplace_back(cfg_.seed, household_stream(cfg_.chain_index, k));
  cond_.resize(static_cast<std::size_t>(prep_.design.patterns()));
  fast_cache_.assign(summaries_.size(), SweepRecord{0.0, -1.0});
}

ChainState GibbsSampler::init_state() {
  const std::size_t n = prep_.households.size();
  ChainState st;
  st.params.coef = Eigen::VectorXd::Zero(prep_.design.total_cols());
  st.params.sigma.resize(static_cast<std::size_t>(prep_.design.patterns()));
  st.params.precision.resize(static_cast<std::size_t>(prep_.design.patterns()));

  // Log-midpoints of the boxes seed both the latent state and the covariance
  // diagonals.
  std::vector<LatentVec> mids(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& h = prep_.households[k];
    const auto& dom = prep_.domains[k];
    mids[k].resize(h.holdings.held_count());
    for (int r = 0; r < h.holdings.held_count(); ++r) {
      const int l = h.holdings.held_component(r);
      const Interval& b = dom.box(l);
      mids[k][r] = 0.5 * (std::log(b.lo) + std::log(b.hi));
    }
  }
  for (int p = 1; p <= prep_.design.patterns(); ++p) {
    const auto pi = static_cast<std::size_t>(p - 1);
    if (prep_.design.group_size(p) == 0) {
      st.params.sigma[pi] = Eigen::MatrixXd();
      st.params.precision[pi] = Eigen::MatrixXd();
      continue;
    }
    const int d = prep_.design.pattern_dim(p);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    const auto& mem = prep_.design.members(p);
    for (auto k : mem) mean += mids[k];
    mean /= static_cast<double>(mem.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (auto k : mem) {
      const LatentVec dlt = mids[k] - mean;
      var += dlt.cwiseProduct(dlt);
    }
    var /= std::max<double>(static_cast<double>(mem.size()) - 1.0, 1.0);
    st.params.sigma[pi] = Eigen::MatrixXd::Zero(d, d);
    st.params.precision[pi] = Eigen::MatrixXd::Zero(d, d);
    for (int r = 0; r < d; ++r) {
      const double v = std::max(var[r], 0.05);
      st.params.sigma[pi](r, r) = v;
      st.params.precision[pi](r, r) = 1.0 / v;
    }
  }

  st.y.resize(n);
  st.w.assign(n, {});
  for (std::size_t k = 0; k < n; ++k) {
    const auto& h = prep_.households[k];
    const auto& dom = prep_.domains[k];
    std::array<double, kMaxComponents> w{};
    bool ok = true;
    for (int r = 0; r < h.holdings.held_count() && ok; ++r) {
      const int l = h.holdings.held_component(r);
      const Interval& b = dom.box(l);
      w[static_cast<std::size_t>(l)] = std::sqrt(b.lo * b.hi);
    }
    // Conditional log-midpoints against the box midpoints, then one repair
    // pass of coordinate projection against the evolving point.
    const std::array<double, kMaxComponents> base = w;
    for (int r = 0; r < h.holdings.held_count() && ok; ++r) {
      const int l = h.holdings.held_component(r);
      const auto slice = dom.conditional_interval(l, base);
      if (!slice) {
        ok = false;
        break;
      }
      w[static_cast<std::size_t>(l)] =
          std::sqrt(std::max(slice->lo, 1.0) * std::max(slice->hi, 1.0));
    }
    for (int r = 0; r < h.holdings.held_count() && ok; ++r) {
      const int l = h.holdings.held_component(r);
      const auto slice = dom.conditional_interval(l, w);
      if (!slice) {
        ok = false;
        break;
      }
      const auto li = static_cast<std::size_t>(l);
      w[li] = std::clamp(w[li], slice->lo, slice->hi);
    }
    if (!ok || !dom.contains(w)) {
      if (dom.feasible_point()) {
        w = *dom.feasible_point();
      } else {
        throw ChainError("household '" + h.id +
                         "': cannot place an initial point inside the domain");
      }
    }
    st.w[k] = w;
    st.y[k].resize(h.holdings.held_count());
    for (int r = 0; r < h.holdings.held_count(); ++r)
      st.y[k][r] = std::log(w[static_cast<std::size_t>(h.holdings.held_component(r))]);
  }
  st.e = 0.0;
  st.sweep = 0;
  return st;
}

void GibbsSampler::draw_params(ChainState& st) {
  const CoefficientPosterior post =
      prep_.design.coefficient_full_conditional(st.params.precision, st.y);
  st.params.coef = mvn_draw(post.mean, post.covariance, param_rng_);
  for (int p = 1; p <= prep_.design.patterns(); ++p) {
    const auto pi = static_cast<std::size_t>(p - 1);
    if (prep_.design.group_size(p) == 0) continue;
    const ScatterConditional sc =
        prep_.design.scatter_conditional(p, st.params.coef, st.y);
    const int d = prep_.design.pattern_dim(p);
    Eigen::MatrixXd scatter = sc.scatter;
    // Spectral floor. A tiny group can drive a precision excursion that pins
    // its latents to a hyperplane and leaves the scatter numerically
    // rank-deficient; the floor caps the next precision draw at roughly
    // df/ridge and keeps every factorization conditioned. It sits about nine
    // orders below the data scale.
    const double ridge = 1e-9 * (1.0 + scatter.trace() / d);
    scatter += ridge * Eigen::MatrixXd::Identity(d, d);
    Eigen::LLT<Eigen::MatrixXd> llt(scatter);
    if (llt.info() != Eigen::Success) {
      scatter += 1e5 * ridge * Eigen::MatrixXd::Identity(d, d);
      llt.compute(scatter);
      if (llt.info() != Eigen::Success)
        throw ChainError("residual scatter is not invertible");
    }
    Eigen::MatrixXd scatter_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
    scatter_inv = 0.5 * (scatter_inv + scatter_inv.transpose()).eval();
    Eigen::MatrixXd prec = wishart_draw(sc.df, scatter_inv, param_rng_);
    prec = 0.5 * (prec + prec.transpose()).eval();
    st.params.precision[pi] = prec;
    // Covariance kept on the side for reporting; an extreme draw may be
    // numerically singular, which the engine no longer cares about.
    Eigen::LLT<Eigen::MatrixXd> pllt(prec);
    Eigen::MatrixXd sig;
    if (pllt.info() == Eigen::Success) {
      sig = pllt.solve(Eigen::MatrixXd::Identity(d, d));
    } else {
      Eigen::LDLT<Eigen::MatrixXd> pldlt(prec);
      if (pldlt.info() != Eigen::Success)
        throw ChainError("drawn precision is not positive definite");
      sig = pldlt.solve(Eigen::MatrixXd::Identity(d, d));
    }
    st.params.sigma[pi] = 0.5 * (sig + sig.transpose());
  }
}

void GibbsSampler::draw_latent(ChainState& st) {
  for (int p = 1; p <= prep_.design.patterns(); ++p) {
    const auto pi = static_cast<std::size_t>(p - 1);
    if (prep_.design.group_size(p) == 0) continue;
    const int d = prep_.design.pattern_dim(p);
    cond_[pi].resize(static_cast<std::size_t>(d));
    for (int r = 0; r < d; ++r)
      cond_[pi][static_cast<std::size_t>(r)] =
          precision_conditional(st.params.precision[pi], r);
  }
  LatentVec mu;
  for (std::size_t k = 0; k < prep_.households.size(); ++k) {
    const auto& h = prep_.households[k];
    const auto& dom = prep_.domains[k];
    const auto pi = static_cast<std::size_t>(prep_.design.pattern_of(k) - 1);
    prep_.design.household_mean(st.params.coef, k, mu);
    RngStream& rng = household_rng_[k];
    const int d = h.holdings.held_count();
    for (int r = 0; r < d; ++r) {
      const int l = h.holdings.held_component(r);
      const auto li = static_cast<std::size_t>(l);
      const ConditionalCoeffs& cc = cond_[pi][static_cast<std::size_t>(r)];
      double m = mu[r];
      Eigen::Index a = 0;
      for (int j = 0; j < d; ++j) {
        if (j == r) continue;
        m += cc.w[a] * (st.y[k][j] - mu[j]);
        ++a;
      }
      const auto slice = dom.conditional_interval(l, st.w[k]);
      if (!slice)
        throw ChainError("household '" + h.id + "': empty conditional slice mid-chain");
      const double lo = slice->lo, hi = slice->hi;
      double wv;
      if (hi - lo <= 1e-12 * std::max(1.0, lo)) {
        wv = 0.5 * (lo + hi);
      } else {
        const double yv = truncated_normal(m, cc.sd, std::log(lo), std::log(hi), rng);
        wv = std::exp(yv);
        if (wv < lo) wv = lo;
        if (wv > hi) wv = hi;
      }
      st.w[k][li] = wv;
      st.y[k][r] = std::log(wv);
    }
  }
}

void GibbsSampler::sweep(ChainState& st) {
  draw_params(st);
  draw_latent(st);
  st.e = std_normal(error_rng_);
  ++st.sweep;
#ifndef NDEBUG
  check_state(st);
#else
  if (st.sweep % 500 == 0) check_state(st);
#endif
}

void GibbsSampler::check_state(const ChainState& st) const {
  for (std::size_t k = 0; k < prep_.households.size(); ++k) {
    if (!prep_.domains[k].contains(st.w[k]))
      throw ChainError("household '" + prep_.households[k].id +
                       "': latent state left its domain");
    for (double v : st.w[k])
      if (!std::isfinite(v)) throw ChainError("non-finite latent value");
  }
}

std::vector<SweepRecord> GibbsSampler::evaluate(const ChainState& st) {
  const std::size_t n = prep_.households.size();
  WeightedSample ws;
  ws.values.resize(n);
  ws.weights = prep_.weights;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& h = prep_.households[k];
    ws.values[k] = total_wealth(h.holdings, h.share, st.w[k]);
  }
  const SortedSample sorted = SortedSample::from(ws);
  const bool refresh = cfg_.variance_mode != VarianceMode::FastApprox ||
                       sweeps_since_variance_ % cfg_.fast_approx_stride == 0 ||
                       fast_cache_.front().vhat < 0.0;
  ++sweeps_since_variance_;
  std::vector<SweepRecord> out(summaries_.size());
  for (std::size_t s = 0; s < summaries_.size(); ++s) {
    out[s].ghat = evaluate_summary(summaries_[s], sorted);
    switch (cfg_.variance_mode) {
      case VarianceMode::Linearization:
        out[s].vhat = linearized_variance(summaries_[s], sorted, prep_.view).value;
        break;
      case VarianceMode::Jackknife:
        out[s].vhat = jackknife_variance(summaries_[s], ws, prep_.view).value;
        break;
      case VarianceMode::FastApprox:
        if (refresh) {
          out[s].vhat = linearized_variance(summaries_[s], sorted, prep_.view).value;
          fast_cache_[s] = out[s];
        } else {
          out[s].vhat = fast_cache_[s].vhat;
        }
        break;
    }
  }
  return out;
}

ChainOutput GibbsSampler::run() {
  ChainState st = init_state();
  ChainOutput co;
  co.summaries = summaries_;
  co.total_sweeps = cfg_.total_sweeps;
  co.burn_in = cfg_.burn_in;
  co.e.reserve(static_cast<std::size_t>(cfg_.total_sweeps));
  co.sweeps.reserve(static_cast<std::size_t>(cfg_.total_sweeps));
  for (int n = 0; n < cfg_.total_sweeps; ++n) {
    sweep(st);
    co.e.push_back(st.e);
    co.sweeps.push_back(evaluate(st));
  }
  return co;
}

ChainOutput run_chain(const Dataset& ds, const ChainConfig& cfg) {
  const PreparedDataset prep(ds);
  GibbsSampler sampler(prep, cfg);
  return sampler.run();
}

}  // namespace ineq
