#include "ineq/data_model.hpp"

#include <cmath>
#include <unordered_set>

#include "ineq/errors.hpp"

namespace ineq {

namespace {

// Portfolio patterns, complete holdings first. First and last component are
// always held.
constexpr std::array<std::array<bool, kMaxComponents>, 8> kPatterns5 = {{
    {true, true, true, true, true},
    {true, true, true, false, true},
    {true, true, false, true, true},
    {true, false, true, true, true},
    {true, true, false, false, true},
    {true, false, true, false, true},
    {true, false, false, true, true},
    {true, false, false, false, true},
}};

constexpr std::array<std::array<bool, kMaxComponents>, 4> kPatterns4 = {{
    {true, true, true, true, false},
    {true, true, false, true, false},
    {true, false, true, true, false},
    {true, false, false, true, false},
}};

}  // namespace

int pattern_count(int component_count) {
  if (component_count == 5) return 8;
  if (component_count == 4) return 4;
  throw ValidationError("component count must be 4 or 5");
}

const std::array<bool, kMaxComponents>& pattern_flags(int pattern, int component_count) {
  const int n = pattern_count(component_count);
  if (pattern < 1 || pattern > n) throw ValidationError("pattern index out of range");
  return component_count == 5 ? kPatterns5[static_cast<std::size_t>(pattern - 1)]
                              : kPatterns4[static_cast<std::size_t>(pattern - 1)];
}

HoldingsVector::HoldingsVector(const std::array<bool, kMaxComponents>& flags,
                               int component_count)
    : component_count_(component_count), flags_(flags) {
  const int n = pattern_count(component_count);
  for (int l = component_count; l < kMaxComponents; ++l)
    if (flags_[static_cast<std::size_t>(l)])
      throw ValidationError("holdings flag set beyond component count");
  if (!flags_[0] || !flags_[static_cast<std::size_t>(component_count - 1)])
    throw ValidationError(
        "first and last components are held by construction of the component system");
  rank_.fill(-1);
  held_.fill(-1);
  for (int l = 0; l < component_count; ++l) {
    if (flags_[static_cast<std::size_t>(l)]) {
      rank_[static_cast<std::size_t>(l)] = held_count_;
      held_[static_cast<std::size_t>(held_count_)] = l;
      ++held_count_;
    }
  }
  pattern_ = 0;
  for (int p = 1; p <= n; ++p) {
    if (pattern_flags(p, component_count) == flags_) {
      pattern_ = p;
      break;
    }
  }
  if (pattern_ == 0) throw ValidationError("holdings do not match any portfolio pattern");
}

HoldingsVector HoldingsVector::from_pattern(int pattern, int component_count) {
  return HoldingsVector(pattern_flags(pattern, component_count), component_count);
}

double total_wealth(const HoldingsVector& holdings, std::span<const double> share,
                    std::span<const double> wealth) {
  double t = 0.0;
  for (int r = 0; r < holdings.held_count(); ++r) {
    const auto l = static_cast<std::size_t>(holdings.held_component(r));
    t += share[l] * wealth[l];
  }
  return t;
}

std::string design_kind_name(DesignKind k) {
  switch (k) {
    case DesignKind::Srswor: return "srswor";
    case DesignKind::StratifiedSrs: return "stratified_srs";
    case DesignKind::UnequalProbFixedSize: return "unequal_prob_fixed_size";
    case DesignKind::TwoStageCluster: return "two_stage_cluster";
  }
  throw ValidationError("unknown design kind");
}

DesignKind design_kind_from_name(const std::string& name) {
  if (name == "srswor") return DesignKind::Srswor;
  if (name == "stratified_srs") return DesignKind::StratifiedSrs;
  if (name == "unequal_prob_fixed_size") return DesignKind::UnequalProbFixedSize;
  if (name == "two_stage_cluster") return DesignKind::TwoStageCluster;
  throw ValidationError("unknown design kind: " + name);
}

void validate_dataset(const Dataset& ds) {
  if (ds.component_count != 4 && ds.component_count != 5)
    throw ValidationError("component count must be 4 or 5");
  if (!(ds.cap > 1.0)) throw ValidationError("cap must exceed one currency unit");
  if (!(ds.tax_threshold > 0.0)) throw ValidationError("tax threshold must be positive");
  if (ds.households.empty()) throw ValidationError("dataset has no households");

  const std::size_t aux_dim =
      ds.calibration_totals ? ds.calibration_totals->size() : 0;
  std::unordered_set<std::string> seen;
  std::array<std::size_t, kMaxComponents> cov_dim{};
  cov_dim.fill(0);

  for (const auto& h : ds.households) {
    auto fail = [&](const std::string& what) {
      throw ValidationError("household '" + h.id + "': " + what);
    };
    if (h.id.empty()) throw ValidationError("household with empty id");
    if (!seen.insert(h.id).second) fail("duplicate id");
    if (!(h.weight > 0.0) || !std::isfinite(h.weight)) fail("weight must be positive and finite");
    if (h.stratum < 0 || h.psu < 0) fail("stratum and psu ids must be non-negative");
    if (h.holdings.component_count() != ds.component_count)
      fail("holdings do not match the dataset component count");
    for (int l = 0; l < ds.component_count; ++l) {
      const auto li = static_cast<std::size_t>(l);
      if (h.holdings.holds(l)) {
        if (!(h.share[li] > 0.0) || h.share[li] > 1.0) fail("share outside (0,1]");
        if (h.covariates[li].empty()) fail("held component without covariates");
        if (h.covariates[li][0] != 1.0) fail("covariate row must start with the constant 1");
        if (cov_dim[li] == 0)
          cov_dim[li] = h.covariates[li].size();
        else if (cov_dim[li] != h.covariates[li].size())
          fail("covariate dimension differs across households");
        for (double x : h.covariates[li])
          if (!std::isfinite(x)) fail("non-finite covariate");
      } else {
        if (!h.covariates[li].empty()) fail("covariates given for an unheld component");
        if (h.evidence.component_bounds[li]) fail("bracket given for an unheld component");
      }
    }
    if (aux_dim > 0 && h.aux.size() != aux_dim)
      fail("calibration auxiliaries have the wrong dimension");
    if (aux_dim == 0 && !h.aux.empty())
      fail("calibration auxiliaries without declared totals");
  }
}

}  // namespace ineq
