#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ineq/data_model.hpp"
#include "ineq/indices.hpp"

namespace ineq {

// Generative truth for the five-component lognormal mixture. Covariates per
// household are [1, age, age^2, cat1, cat2, selfemp]; each component has one
// coefficient row on that vector, plus a per-pattern mean shift. The pattern
// covariance is a principal submatrix of sigma_full times a pattern scale.
struct TrueModel {
  static constexpr int kCovDim = 6;

  std::array<std::array<double, kCovDim>, kMaxComponents> coef{};
  // pattern_shift[pattern-1][component]; the complete-portfolio pattern has no
  // shift, mirroring the identification convention of the estimator.
  std::array<std::array<double, kMaxComponents>, 8> pattern_shift{};
  Eigen::MatrixXd sigma_full;  // 5x5, positive semidefinite
  std::array<double, 8> sigma_scale{};

  static TrueModel defaults();
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  int population_size = 20000;
  int component_count = 5;  // 4 aggregates the generated dataset
  std::array<double, 8> pattern_probs{};  // normalized at validation
  TrueModel model = TrueModel::defaults();

  // Bracket systems: ascending finite edges starting at 0; the last cell is
  // open above. refine > 1 splits every finite cell into that many equal
  // parts. point_mode records every held component exactly.
  std::vector<double> component_grid;
  std::vector<double> overview_grid;
  int bracket_refine = 1;
  bool point_mode = false;
  double point_measure_prob = 0.08;
  double total_bracket_prob = 0.85;
  double tax_report_prob = 1.0;

  double tax_threshold = kDefaultTaxThreshold;
  double cap = kDefaultCap;

  DesignKind design = DesignKind::StratifiedSrs;
  int stratum_count = 5;
  std::vector<double> oversample = {1.0, 1.5, 2.0, 3.0, 4.0};
  std::vector<double> response_rates = {0.78, 0.76, 0.74, 0.72, 0.70};
  int sample_size = 2700;
  // Two-stage settings: clusters are score-adjacent blocks within strata.
  int psus_per_stratum = 10;
  int psus_sampled = 5;
  double within_psu_fraction = 0.5;

  static GeneratorConfig defaults();
};

void validate_generator_config(const GeneratorConfig& cfg);

// Draws holdings, covariates, log-wealth, shares, debt and tax fields for
// every member, then assigns strata (and clusters) by ranked covariate score.
// Deterministic under a fixed seed; members use independent substreams.
Population generate_population(const GeneratorConfig& cfg);

std::vector<double> population_totals(const Population& pop);

// Exact finite-population value of a summary, evaluated directly.
double true_summary(const Population& pop, const SummarySpec& spec);

struct SampleDraw {
  std::vector<std::size_t> members;         // respondents, ascending
  std::vector<double> weights;              // response-adjusted
  std::vector<std::size_t> selected;        // before the response phase
  std::vector<double> design_weights;       // inverse inclusion probability
};

// Probability sample under cfg.design, including the response phase and the
// within-stratum response-rate weight adjustment.
SampleDraw draw_sample(const Population& pop, const GeneratorConfig& cfg);

// Bracket/tax evidence for the listed members; weights must already be
// response-adjusted. Every emitted domain contains the member's true vector.
Dataset make_dataset(const Population& pop, const std::vector<std::size_t>& members,
                     const std::vector<double>& weights, const GeneratorConfig& cfg);

struct SynthOutput {
  Population population;
  Dataset dataset;
};

SynthOutput simulate(const GeneratorConfig& cfg);

// Five-component dataset -> four-component dataset: residence and other real
// estate merge into slot 1 (bounds added with the residence share applied,
// floors/ceilings keep the truth inside), professional moves to slot 2, the
// remainder to slot 3. Weights, design fields and tax evidence carry over.
Dataset aggregate_components(const Dataset& ds);

}  // namespace ineq
