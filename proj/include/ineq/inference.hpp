#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ineq/gibbs.hpp"

namespace ineq {

struct ConvergenceReport {
  double split_delta = 0.0;  // |mean of first half - mean of second half|
  double mcse = 0.0;         // batch-means standard error of the mean
  double ess = 0.0;
  double tail_slope = 0.0;   // running-mean slope per sweep over the last quarter
  bool drift_flag = false;
  std::vector<std::pair<int, double>> running_mean;  // (sweep, cumulative mean)
};

struct SummaryPosterior {
  SummarySpec spec;
  // Ergodic average of the per-sweep point estimates: the conditional mean of
  // the posterior draw given the latent trajectory, so with complete data it
  // reproduces the plug-in estimate exactly.
  double prediction = 0.0;
  double prediction_mcse = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double posterior_sd = 0.0;
  ConvergenceReport convergence;
};

struct InferenceResult {
  double alpha = 0.1;
  int total_sweeps = 0;
  int burn_in = 0;
  int n_used = 0;
  int chains = 1;
  std::vector<SummaryPosterior> rows;
};

double posterior_mean(std::span<const double> draws);

// Equal-tailed interval from empirical quantiles with linear interpolation.
std::pair<double, double> equal_tailed_region(std::span<const double> draws, double alpha);

// first_sweep labels the x axis of the running-mean series.
ConvergenceReport convergence_report(std::span<const double> draws, int first_sweep,
                                     int max_points = 512);

InferenceResult summarize_chain(const ChainOutput& co, double alpha);
InferenceResult summarize_chains(const std::vector<ChainOutput>& chains, double alpha);

}  // namespace ineq
