#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ineq/censoring.hpp"
#include "ineq/data_model.hpp"
#include "ineq/design_variance.hpp"
#include "ineq/hierarchy.hpp"
#include "ineq/indices.hpp"
#include "ineq/variates.hpp"

namespace ineq {

enum class VarianceMode { Linearization, Jackknife, FastApprox };

std::string variance_mode_name(VarianceMode m);
VarianceMode variance_mode_from_name(const std::string& name);

struct ChainConfig {
  int total_sweeps = 20000;
  int burn_in = 1000;
  std::uint64_t seed = 1;
  int chain_index = 0;
  std::vector<SummarySpec> summaries;  // empty selects the default set
  VarianceMode variance_mode = VarianceMode::Linearization;
  int fast_approx_stride = 10;
};

// Canonical form of a dataset for sampling: households sorted by id (stream
// assignment and sweep order follow this, so record order in the input file
// cannot change results), censoring domains built, weights calibrated,
// design view assembled. Not copyable; the engine keeps a reference.
struct PreparedDataset {
  explicit PreparedDataset(const Dataset& ds);
  PreparedDataset(const PreparedDataset&) = delete;
  PreparedDataset& operator=(const PreparedDataset&) = delete;

  int component_count;
  double cap;
  double tax_threshold;
  std::vector<HouseholdRecord> households;
  std::vector<CensoringDomain> domains;
  RegressionDesign design;
  std::vector<double> weights;
  Eigen::MatrixXd aux_matrix;
  DesignView view;
};

struct ChainState {
  ModelParams params;
  Latent y;  // log scale, held components ascending
  // Component-indexed values, unheld entries 0; kept in step with y.
  std::vector<std::array<double, kMaxComponents>> w;
  double e = 0.0;
  int sweep = 0;
};

struct SweepRecord {
  double ghat = 0.0;
  double vhat = 0.0;
};

struct ChainOutput {
  std::vector<SummarySpec> summaries;
  int total_sweeps = 0;
  int burn_in = 0;
  std::vector<double> e;                        // per sweep
  std::vector<std::vector<SweepRecord>> sweeps; // [sweep][summary]

  double g_draw(std::size_t n, std::size_t s) const;
};

class GibbsSampler {
 public:
  GibbsSampler(const PreparedDataset& prep, const ChainConfig& cfg);

  // Coefficients at zero, covariances from bracket-midpoint spread, latent
  // values at conditional log-midpoints with one repair pass (falling back to
  // the domain's stored feasible point).
  ChainState init_state();

  // One full scan in fixed block order: coefficients, per-pattern
  // covariances, per-household latent components ascending, error draw.
  void sweep(ChainState& st);

  // Point estimate and design variance of every configured summary at the
  // current latent state.
  std::vector<SweepRecord> evaluate(const ChainState& st);

  ChainOutput run();

  // Asserts every household lies inside its domain.
  void check_state(const ChainState& st) const;

  const std::vector<SummarySpec>& summaries() const { return summaries_; }

 private:
  void draw_params(ChainState& st);
  void draw_latent(ChainState& st);

  const PreparedDataset& prep_;
  ChainConfig cfg_;
  std::vector<SummarySpec> summaries_;
  RngStream param_rng_;
  RngStream error_rng_;
  std::vector<RngStream> household_rng_;
  std::vector<std::vector<ConditionalCoeffs>> cond_;  // [pattern-1][r]
  std::vector<SweepRecord> fast_cache_;
  int sweeps_since_variance_ = 0;
};

// Convenience wrapper: prepare, sample, return the record stream.
ChainOutput run_chain(const Dataset& ds, const ChainConfig& cfg);

}  // namespace ineq
