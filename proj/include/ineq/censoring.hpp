#pragma once

#include <array>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ineq {

inline constexpr double kDefaultCap = 1e8;
inline constexpr double kDefaultTaxThreshold = 720000.0;
inline constexpr int kMaxComponents = 5;

// Closed interval. hi may be +infinity before capping; a point measure has
// lo == hi.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wealth-tax side information for one household.
//   pays_tax      liability indicator from the tax match
//   debt          deductible debt total
//   nd_min/nd_max bounds on the non-deductible part of professional wealth
//   maybe_nondeductible  professional wealth can be partly non-deductible
struct WealthTaxEvidence {
  bool pays_tax = false;
  double debt = 0.0;
  double nd_min = 0.0;
  double nd_max = 0.0;
  bool maybe_nondeductible = false;
};

// Everything observed about one household's wealth levels: per-component
// brackets (absent means the component is held but unbracketed), an optional
// bracket for total wealth, and optional tax-match evidence.
struct CensoringEvidence {
  std::array<std::optional<Interval>, kMaxComponents> component_bounds;
  std::optional<Interval> total_bracket;
  std::optional<WealthTaxEvidence> tax;
};

enum class ConstraintSense { AtLeast, AtMost };

// One additive term coef * min(w[component], cap); cap == +infinity makes it
// linear. coef >= 0, so every constraint is monotone in each coordinate.
struct ConstraintTerm {
  int component = -1;
  double coef = 0.0;
  double cap = std::numeric_limits<double>::infinity();
};

struct MonotoneConstraint {
  ConstraintSense sense = ConstraintSense::AtLeast;
  double threshold = 0.0;
  double offset = 0.0;
  std::vector<ConstraintTerm> terms;
  std::string label;

  double evaluate(std::span<const double> w) const;
  // Largest / smallest attainable value over a box.
  double sup_over(const std::array<Interval, kMaxComponents>& box) const;
  double inf_over(const std::array<Interval, kMaxComponents>& box) const;
};

// Feasible region for one household's latent component values: a per-component
// box intersected with monotone half-spaces. Conditional slices along any
// coordinate are closed intervals, computed in closed form.
class CensoringDomain {
 public:
  int component_count() const { return component_count_; }
  bool held(int l) const { return held_[static_cast<std::size_t>(l)]; }
  const Interval& box(int l) const { return box_[static_cast<std::size_t>(l)]; }
  const std::vector<MonotoneConstraint>& constraints() const { return constraints_; }

  // Values of the other components fixed at w; returns the set of admissible
  // values for component l, or nullopt when that slice is empty. w entries for
  // unheld components are ignored (treated as 0).
  std::optional<Interval> conditional_interval(int l, std::span<const double> w) const;

  bool contains(std::span<const double> w, double rel_tol = 1e-9) const;

  // A point found by deterministic coordinate projection at build time, when
  // the search converged. Used to seed samplers; absence is not infeasibility.
  const std::optional<std::array<double, kMaxComponents>>& feasible_point() const {
    return feasible_point_;
  }

 private:
  friend CensoringDomain build_domain(const CensoringEvidence&,
                                      const std::array<bool, kMaxComponents>&,
                                      const std::array<double, kMaxComponents>&, int,
                                      double, double);
  int component_count_ = 0;
  std::array<bool, kMaxComponents> held_{};
  std::array<double, kMaxComponents> share_{};
  std::array<Interval, kMaxComponents> box_{};
  std::vector<MonotoneConstraint> constraints_;
  std::optional<std::array<double, kMaxComponents>> feasible_point_;

  void search_feasible_point();
};

// Assembles the domain: caps unbounded brackets, floors held lower bounds at
// one currency unit, translates the total bracket and tax evidence into
// monotone constraints, and rejects domains that interval arithmetic proves
// empty (InfeasibleError naming the violated constraint).
//
// component_count 5 uses the taxable-wealth forms with the residence share
// entering as share^2; component_count 4 expects residence and other real
// estate already merged and uses the coarser aggregated forms.
CensoringDomain build_domain(const CensoringEvidence& evidence,
                             const std::array<bool, kMaxComponents>& held,
                             const std::array<double, kMaxComponents>& share,
                             int component_count,
                             double tax_threshold = kDefaultTaxThreshold,
                             double cap = kDefaultCap);

}  // namespace ineq
