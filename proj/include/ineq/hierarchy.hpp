#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ineq/data_model.hpp"

namespace ineq {

// Latent log wealth for one household: held components in ascending component
// order. Fixed-capacity storage, never on the heap.
using LatentVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxComponents, 1>;
using Latent = std::vector<LatentVec>;

struct ModelParams {
  Eigen::VectorXd coef;                // stacked coefficient vector, standardized scale
  std::vector<Eigen::MatrixXd> sigma;  // per portfolio pattern, reporting scale
  // Same state as the precision draw that produced sigma. The engine works off
  // this form: near-singular covariance draws stay harmless because nothing
  // inverts them.
  std::vector<Eigen::MatrixXd> precision;
};

struct CoefficientPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// Residual scatter for one pattern group; the precision draw is
// Wishart(df, scatter^{-1}).
struct ScatterConditional {
  int df = 0;
  Eigen::MatrixXd scatter;
};

struct CondNormal {
  double mean = 0.0;
  double sd = 0.0;
};

// Regression weights of one coordinate on the remaining ones under a fixed
// covariance: y_r | y_-r ~ N(mu_r + w'(y_-r - mu_-r), sd^2).
struct ConditionalCoeffs {
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxComponents, 1> w;
  double sd = 0.0;
};

ConditionalCoeffs component_conditional(const Eigen::MatrixXd& sigma, int r);

// Same conditional taken from the precision matrix q = sigma^{-1}:
// sd = 1/sqrt(q_rr), w_j = -q_rj/q_rr. No matrix solve, and sd stays positive
// for any SPD q however ill conditioned its inverse.
ConditionalCoeffs precision_conditional(const Eigen::MatrixXd& q, int r);

CondNormal component_full_conditional(const Eigen::MatrixXd& sigma, int r,
                                      const LatentVec& mu, const LatentVec& y);

// Improper prior log density: sum over patterns of -(p_i+1)/2 * logdet(sigma_i).
double log_prior(const std::vector<Eigen::MatrixXd>& sigma);

// The stacked seemingly-unrelated regression over all households: one
// coefficient block per component plus a pattern-effect column per
// (pattern >= 2, held component) pair; the complete-portfolio pattern is the
// reference level. Covariates are standardized internally; coefficients can
// be mapped back with unstandardize(). Cross-moment blocks are cached per
// pattern so assembling the coefficient full conditional costs O(d^2) per
// sweep, not O(n d^2).
class RegressionDesign {
 public:
  RegressionDesign(const std::vector<HouseholdRecord>& households, int component_count);

  int component_count() const { return component_count_; }
  int patterns() const { return pattern_count_; }
  int total_cols() const { return total_cols_; }
  std::size_t households() const { return pattern_of_.size(); }
  int pattern_of(std::size_t k) const { return pattern_of_[k]; }
  int pattern_dim(int pattern) const { return dims_[static_cast<std::size_t>(pattern - 1)]; }
  int group_size(int pattern) const {
    return static_cast<int>(members_[static_cast<std::size_t>(pattern - 1)].size());
  }
  const std::vector<std::size_t>& members(int pattern) const {
    return members_[static_cast<std::size_t>(pattern - 1)];
  }
  const std::string& column_label(int col) const {
    return labels_[static_cast<std::size_t>(col)];
  }

  // x_k b on the standardized scale; mu sized to the household's held count.
  void household_mean(const Eigen::VectorXd& coef, std::size_t k, LatentVec& mu) const;

  // Takes the per-pattern precision matrices, not covariances.
  CoefficientPosterior coefficient_full_conditional(
      const std::vector<Eigen::MatrixXd>& precision, const Latent& y) const;

  ScatterConditional scatter_conditional(int pattern, const Eigen::VectorXd& coef,
                                         const Latent& y) const;

  // Coefficients on the original covariate scale (intercepts folded back).
  Eigen::VectorXd unstandardize(const Eigen::VectorXd& coef) const;

 private:
  struct Row {
    // Sparse structure shared within a pattern: global column per entry.
    std::vector<int> cols;
  };
  int component_count_ = 0;
  int pattern_count_ = 0;
  int total_cols_ = 0;
  std::vector<int> dims_;                       // p_i per pattern
  std::vector<std::vector<std::size_t>> members_;
  std::vector<int> pattern_of_;
  std::vector<int> cov_dim_;                    // per component
  std::vector<int> block_offset_;               // per component
  std::vector<std::vector<int>> beta_col_;      // [pattern-1][component] -> col or -1
  std::vector<std::vector<Row>> row_cols_;      // [pattern-1][r]
  // per household, per held rank: the values matching row_cols_
  std::vector<std::vector<Eigen::VectorXd>> vals_;
  // cross moments per pattern: cross_[i-1][r1][r2] = sum_k vals[r1] vals[r2]'
  std::vector<std::vector<std::vector<Eigen::MatrixXd>>> cross_;
  std::vector<std::string> labels_;
  std::vector<double> center_, scale_;          // per global covariate column
};

}  // namespace ineq
