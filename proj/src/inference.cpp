#include "ineq/inference.hpp"

#include <algorithm>
#include <cmath>

#include "ineq/errors.hpp"

namespace ineq {

namespace {

double mean_of(std::span<const double> xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

double sd_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0));
}

// Batch-means standard error of the series mean.
double batch_mcse(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return sd_of(xs) / std::sqrt(std::max<double>(1.0, static_cast<double>(n)));
  const std::size_t b = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n)))));
  const std::size_t nb = n / b;
  std::vector<double> bm(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < b; ++i) s += xs[j * b + i];
    bm[j] = s / static_cast<double>(b);
  }
  const double sbm = sd_of(bm);
  return sbm / std::sqrt(static_cast<double>(nb));
}

double quantile_type7(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = (static_cast<double>(n) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - std::floor(h);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

double posterior_mean(std::span<const double> draws) {
  if (draws.empty()) throw ValidationError("posterior mean of an empty series");
  return mean_of(draws);
}

std::pair<double, double> equal_tailed_region(std::span<const double> draws, double alpha) {
  if (draws.empty()) throw ValidationError("credible region of an empty series");
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw ValidationError("alpha must lie strictly between 0 and 1");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  return {quantile_type7(sorted, alpha / 2.0), quantile_type7(sorted, 1.0 - alpha / 2.0)};
}

ConvergenceReport convergence_report(std::span<const double> draws, int first_sweep,
                                     int max_points) {
  if (draws.empty()) throw ValidationError("convergence report of an empty series");
  ConvergenceReport r;
  const std::size_t n = draws.size();
  const std::size_t half = n / 2;
  if (half >= 2) {
    const auto a = draws.subspan(0, half);
    const auto b = draws.subspan(half);
    const double ma = mean_of(a), mb = mean_of(b);
    r.split_delta = std::abs(ma - mb);
    const double se = std::hypot(batch_mcse(a), batch_mcse(b));
    r.drift_flag = se > 0.0 && r.split_delta > 3.0 * se;
  }
  r.mcse = batch_mcse(draws);
  const double sd = sd_of(draws);
  if (r.mcse > 0.0 && sd > 0.0) {
    const double ess = sd * sd / (r.mcse * r.mcse);
    r.ess = std::min(ess, static_cast<double>(n));
  } else {
    r.ess = static_cast<double>(n);
  }

  // Cumulative mean, thinned to max_points.
  std::vector<double> cum(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += draws[i];
    cum[i] = s / static_cast<double>(i + 1);
  }
  const std::size_t stride =
      std::max<std::size_t>(1, n / static_cast<std::size_t>(std::max(max_points, 1)));
  for (std::size_t i = stride - 1; i < n; i += stride)
    r.running_mean.emplace_back(first_sweep + static_cast<int>(i), cum[i]);
  if (r.running_mean.empty() || r.running_mean.back().first != first_sweep + static_cast<int>(n) - 1)
    r.running_mean.emplace_back(first_sweep + static_cast<int>(n) - 1, cum[n - 1]);

  // Least-squares slope of the running mean over the last quarter.
  const std::size_t q0 = n - n / 4;
  if (n - q0 >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t i = q0; i < n; ++i) {
      const double x = static_cast<double>(i);
      sx += x;
      sy += cum[i];
      sxx += x * x;
      sxy += x * cum[i];
      cnt += 1.0;
    }
    const double den = cnt * sxx - sx * sx;
    if (den > 0.0) r.tail_slope = (cnt * sxy - sx * sy) / den;
  }
  return r;
}

namespace {

SummaryPosterior summarize_one(const std::vector<const ChainOutput*>& chains,
                               std::size_t s, double alpha) {
  SummaryPosterior sp;
  sp.spec = chains.front()->summaries[s];
  std::vector<double> ghat, g;
  for (const ChainOutput* co : chains) {
    for (int n = co->burn_in; n < co->total_sweeps; ++n) {
      ghat.push_back(co->sweeps[static_cast<std::size_t>(n)][s].ghat);
      g.push_back(co->g_draw(static_cast<std::size_t>(n), s));
    }
  }
  sp.prediction = posterior_mean(ghat);
  sp.prediction_mcse = batch_mcse(ghat);
  const auto [lo, hi] = equal_tailed_region(g, alpha);
  sp.lower = lo;
  sp.upper = hi;
  sp.posterior_sd = sd_of(g);

  if (chains.size() == 1) {
    sp.convergence = convergence_report(g, chains.front()->burn_in);
  } else {
    // Per-sweep mean across chains drives the running-mean plot; drift and
    // error measures combine per-chain reports.
    const ChainOutput& c0 = *chains.front();
    const std::size_t kept = static_cast<std::size_t>(c0.total_sweeps - c0.burn_in);
    std::vector<double> pooled(kept, 0.0);
    for (const ChainOutput* co : chains)
      for (std::size_t i = 0; i < kept; ++i)
        pooled[i] += co->g_draw(static_cast<std::size_t>(co->burn_in) + i, s);
    for (double& x : pooled) x /= static_cast<double>(chains.size());
    sp.convergence = convergence_report(pooled, c0.burn_in);
    double mcse2 = 0.0, ess = 0.0, split = 0.0;
    bool drift = false;
    for (const ChainOutput* co : chains) {
      std::vector<double> gc;
      for (int n = co->burn_in; n < co->total_sweeps; ++n)
        gc.push_back(co->g_draw(static_cast<std::size_t>(n), s));
      const ConvergenceReport r = convergence_report(gc, co->burn_in, 2);
      mcse2 += r.mcse * r.mcse;
      ess += r.ess;
      split = std::max(split, r.split_delta);
      drift = drift || r.drift_flag;
    }
    sp.convergence.mcse = std::sqrt(mcse2) / static_cast<double>(chains.size());
    sp.convergence.ess = ess;
    sp.convergence.split_delta = split;
    sp.convergence.drift_flag = drift;
  }
  return sp;
}

}  // namespace

InferenceResult summarize_chains(const std::vector<ChainOutput>& chains, double alpha) {
  if (chains.empty()) throw ValidationError("no chains to summarize");
  std::vector<const ChainOutput*> ptrs;
  for (const auto& c : chains) {
    if (c.summaries.size() != chains.front().summaries.size() ||
        c.total_sweeps != chains.front().total_sweeps ||
        c.burn_in != chains.front().burn_in)
      throw ValidationError("chains disagree in configuration");
    ptrs.push_back(&c);
  }
  InferenceResult res;
  res.alpha = alpha;
  res.total_sweeps = chains.front().total_sweeps;
  res.burn_in = chains.front().burn_in;
  res.n_used = static_cast<int>(chains.size()) *
               (res.total_sweeps - res.burn_in);
  res.chains = static_cast<int>(chains.size());
  for (std::size_t s = 0; s < chains.front().summaries.size(); ++s)
    res.rows.push_back(summarize_one(ptrs, s, alpha));
  return res;
}

InferenceResult summarize_chain(const ChainOutput& co, double alpha) {
  std::vector<ChainOutput> one;
  one.push_back(co);
  return summarize_chains(one, alpha);
}

}  // namespace ineq
