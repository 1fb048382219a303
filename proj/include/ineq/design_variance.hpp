#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "ineq/data_model.hpp"
#include "ineq/indices.hpp"

namespace ineq {

// Per-sample design information needed by the variance estimators. Weights
// are the final (nonresponse-adjusted, possibly calibrated) expansion
// weights, treated as inverse inclusion probabilities. stratum may be empty
// (single stratum); psu is consulted only for the two-stage design. aux, when
// set, are the calibration auxiliaries: variances are then computed on the
// residuals of the linearized variable on the auxiliaries.
struct DesignView {
  DesignKind kind = DesignKind::Srswor;
  std::vector<double> weight;
  std::vector<int> stratum;
  std::vector<int> psu;
  const Eigen::MatrixXd* aux = nullptr;
};

struct VarianceEstimate {
  double value = 0.0;
  std::vector<std::pair<int, double>> per_stratum;
};

double ht_total(std::span<const double> z, std::span<const double> weight);

// Variance of the expansion total sum_k w_k z_k under the declared design:
//   srswor / stratified_srs    exact HT variance with plug-in N_h = sum w
//   unequal_prob_fixed_size    fixed-size maximum-entropy approximation
//   two_stage_cluster          ultimate-cluster, PSUs with replacement
VarianceEstimate ht_variance(std::span<const double> z, const DesignView& dv);

// Demnati-Rao weight derivatives z_k = d theta / d w_k, returned in the
// original (unsorted) order of the sample.
std::vector<double> linearize(const SummarySpec& spec, const SortedSample& s);
std::vector<double> linearize(const SummarySpec& spec, const WeightedSample& ws);

// Plug-in design variance of a summary: linearize, then ht_variance.
VarianceEstimate linearized_variance(const SummarySpec& spec, const SortedSample& s,
                                     const DesignView& dv);

// Delete-one-unit (delete-one-PSU for the two-stage design) jackknife with
// within-stratum reweighting n_h/(n_h-1) and finite-population factors.
VarianceEstimate jackknife_variance(const SummarySpec& spec, const WeightedSample& ws,
                                    const DesignView& dv);

// Bandwidth rule for the density in quantile linearization.
double quantile_bandwidth(const SortedSample& s);

struct NonresponseResult {
  std::vector<double> weights;      // adjusted, respondents only, input order
  std::vector<std::size_t> kept;    // indices of respondents in the input
  std::vector<std::pair<int, double>> rates;  // stratum -> weighted response rate
};

// Weighted response-rate adjustment within strata; preserves each stratum's
// weight total.
NonresponseResult nonresponse_adjust(std::span<const double> weight,
                                     std::span<const int> stratum,
                                     std::span<const bool> responded);

// Linear calibration: w~ = w (1 + x'lambda) with sum w~ x = totals exactly.
std::vector<double> calibrate(std::span<const double> weight, const Eigen::MatrixXd& aux,
                              const Eigen::VectorXd& totals);

}  // namespace ineq
