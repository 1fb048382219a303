#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ineq/censoring.hpp"

namespace ineq {

// Component roles, five-component layout:
//   0 financial assets, 1 principal residence, 2 other real estate,
//   3 professional wealth, 4 remainder (durables, valuables, ...).
// Four-component layout merges residence and other real estate into slot 1.
//
// Every household holds the first and the last component; the portfolio
// pattern is determined by the middle flags.

class HoldingsVector {
 public:
  HoldingsVector() = default;
  HoldingsVector(const std::array<bool, kMaxComponents>& flags, int component_count);

  static HoldingsVector from_pattern(int pattern, int component_count);

  int component_count() const { return component_count_; }
  bool holds(int l) const { return flags_[static_cast<std::size_t>(l)]; }
  const std::array<bool, kMaxComponents>& flags() const { return flags_; }
  int held_count() const { return held_count_; }

  // Index of a held component among the held ones, ascending; -1 if not held.
  int held_rank(int l) const { return rank_[static_cast<std::size_t>(l)]; }
  // Component index of the r-th held component.
  int held_component(int r) const { return held_[static_cast<std::size_t>(r)]; }

  // 1-based portfolio pattern index: complete portfolios first, the sparse
  // financial+remainder pattern last.
  int pattern() const { return pattern_; }

  bool operator==(const HoldingsVector& o) const {
    return component_count_ == o.component_count_ && flags_ == o.flags_;
  }

 private:
  int component_count_ = 0;
  std::array<bool, kMaxComponents> flags_{};
  std::array<int, kMaxComponents> rank_{};
  std::array<int, kMaxComponents> held_{};
  int held_count_ = 0;
  int pattern_ = 0;
};

int pattern_count(int component_count);

// Pattern index -> holdings flags for the given layout.
const std::array<bool, kMaxComponents>& pattern_flags(int pattern, int component_count);

double total_wealth(const HoldingsVector& holdings, std::span<const double> share,
                    std::span<const double> wealth);

enum class DesignKind { Srswor, StratifiedSrs, UnequalProbFixedSize, TwoStageCluster };

std::string design_kind_name(DesignKind k);
DesignKind design_kind_from_name(const std::string& name);

struct SurveyDesign {
  DesignKind kind = DesignKind::Srswor;
};

struct HouseholdRecord {
  std::string id;
  double weight = 1.0;
  int stratum = 0;
  int psu = 0;
  HoldingsVector holdings;
  std::array<double, kMaxComponents> share{1.0, 1.0, 1.0, 1.0, 1.0};
  // Covariate row per held component, each starting with the constant 1.
  std::array<std::vector<double>, kMaxComponents> covariates;
  CensoringEvidence evidence;
  // Calibration auxiliaries, present iff the dataset declares totals.
  std::vector<double> aux;
};

struct Dataset {
  int component_count = 5;
  double cap = kDefaultCap;
  double tax_threshold = kDefaultTaxThreshold;
  SurveyDesign design;
  std::optional<std::vector<double>> calibration_totals;
  std::vector<HouseholdRecord> households;
};

// Structural checks that do not need domain construction: id uniqueness,
// weight positivity, covariate shape per component, share ranges, evidence
// sanity, auxiliary alignment. Throws ValidationError naming the household.
void validate_dataset(const Dataset& ds);

struct PopulationMember {
  HoldingsVector holdings;
  std::array<double, kMaxComponents> wealth{};
  std::array<double, kMaxComponents> share{1.0, 1.0, 1.0, 1.0, 1.0};
  std::vector<double> covariates;
  int stratum = 0;
  int psu = 0;
  bool pays_tax = false;
  double debt = 0.0;
  double nd_true = 0.0;
  double nd_min = 0.0;
  double nd_max = 0.0;
  bool maybe_nondeductible = false;
};

struct Population {
  int component_count = 5;
  std::vector<PopulationMember> members;
};

}  // namespace ineq
