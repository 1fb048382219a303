#pragma once

#include <span>
#include <string>
#include <vector>

namespace ineq {

struct WeightedSample {
  std::vector<double> values;
  std::vector<double> weights;
};

// Ascending stable order with compensated prefix sums; every index estimator
// and linearization runs off this so one sort serves a whole sweep.
struct SortedSample {
  std::vector<double> value;
  std::vector<double> weight;
  std::vector<double> cum_w;   // inclusive prefix of weights
  std::vector<double> cum_wv;  // inclusive prefix of weight*value
  std::vector<std::size_t> orig;  // position in the unsorted sample
  double total_w = 0.0;
  double total_wv = 0.0;

  static SortedSample from(const WeightedSample& ws);
  std::size_t size() const { return value.size(); }
};

enum class SummaryKind { Mean, Quantile, QuantileRatio, Gini, Theil, Atkinson };

struct SummarySpec {
  SummaryKind kind = SummaryKind::Mean;
  double p = 0.0;                      // Quantile
  double p_num = 0.0, p_den = 0.0;     // QuantileRatio
  double epsilon = 0.0;                // Atkinson

  std::string label() const;
  static SummarySpec parse(const std::string& token);
  bool operator==(const SummarySpec& o) const;
};

// Unit-weight population forms.
double gini(std::span<const double> values);
double theil(std::span<const double> values);
double atkinson(std::span<const double> values, double epsilon);

// Survey-weighted forms. The Gini uses the tie convention under which
// replicating a unit w times with weight 1 gives the same value as weight w.
double weighted_mean(const SortedSample& s);
double weighted_gini(const SortedSample& s);
double weighted_theil(const SortedSample& s);
double weighted_atkinson(const SortedSample& s, double epsilon);

// Left-continuous inverse of the weighted CDF: smallest observed value whose
// cumulative weight share reaches p.
double weighted_quantile(const SortedSample& s, double p);

double evaluate_summary(const SummarySpec& spec, const SortedSample& s);
double evaluate_summary(const SummarySpec& spec, const WeightedSample& ws);

// The reporting set: mean, seven quantiles, five quantile ratios, Gini,
// Theil, Atkinson at 1.5 and 2.
std::vector<SummarySpec> default_summary_set();

struct TheilDecomposition {
  double total = 0.0;
  double between = 0.0;
  std::vector<double> within;  // per group
  std::vector<double> share;   // wealth share per group
};

// Exact decomposition: total = between + sum_g share[g] * within[g].
TheilDecomposition theil_decompose(const WeightedSample& ws, std::span<const int> group);

}  // namespace ineq
