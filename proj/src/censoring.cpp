#include "ineq/censoring.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ineq/errors.hpp"

namespace ineq {

namespace {

constexpr double kRelTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

double term_value(const ConstraintTerm& t, double w) {
  return t.coef * std::min(w, t.cap);
}

[[noreturn]] void infeasible(const std::string& label, const std::string& detail) {
  throw InfeasibleError("infeasible domain: " + label + ": " + detail);
}

}  // namespace

double MonotoneConstraint::evaluate(std::span<const double> w) const {
  double v = offset;
  for (const auto& t : terms) v += term_value(t, w[static_cast<std::size_t>(t.component)]);
  return v;
}

double MonotoneConstraint::sup_over(const std::array<Interval, kMaxComponents>& box) const {
  double v = offset;
  for (const auto& t : terms) v += term_value(t, box[static_cast<std::size_t>(t.component)].hi);
  return v;
}

double MonotoneConstraint::inf_over(const std::array<Interval, kMaxComponents>& box) const {
  double v = offset;
  for (const auto& t : terms) v += term_value(t, box[static_cast<std::size_t>(t.component)].lo);
  return v;
}

std::optional<Interval> CensoringDomain::conditional_interval(
    int l, std::span<const double> w) const {
  if (l < 0 || l >= component_count_ || !held(l))
    throw ValidationError("conditional interval requested for unheld component");
  Interval r = box_[static_cast<std::size_t>(l)];
  for (const auto& c : constraints_) {
    double rest = c.offset;
    double coef = 0.0;
    double cap = kInf;
    for (const auto& t : c.terms) {
      if (t.component == l) {
        coef = t.coef;
        cap = t.cap;
      } else {
        rest += term_value(t, w[static_cast<std::size_t>(t.component)]);
      }
    }
    const double need = c.threshold - rest;
    const double slack = kRelTol * std::max({1.0, std::abs(c.threshold), std::abs(rest)});
    if (coef <= 0.0) {
      if (c.sense == ConstraintSense::AtLeast && need > slack) return std::nullopt;
      if (c.sense == ConstraintSense::AtMost && need < -slack) return std::nullopt;
      continue;
    }
    const double saturation = coef * cap;
    if (c.sense == ConstraintSense::AtLeast) {
      if (need <= 0.0) continue;
      if (need >= saturation) {
        if (need > saturation + slack) return std::nullopt;
        r.lo = std::max(r.lo, cap);
      } else {
        r.lo = std::max(r.lo, need / coef);
      }
    } else {
      if (need >= saturation) continue;
      if (need < 0.0) {
        if (need < -slack) return std::nullopt;
        r.hi = std::min(r.hi, 0.0);
      } else {
        r.hi = std::min(r.hi, need / coef);
      }
    }
  }
  if (r.lo > r.hi) {
    const double tol = kRelTol * std::max({1.0, std::abs(r.lo), std::abs(r.hi)});
    if (r.lo - r.hi > tol) return std::nullopt;
    const double m = 0.5 * (r.lo + r.hi);
    return Interval{m, m};
  }
  return r;
}

bool CensoringDomain::contains(std::span<const double> w, double rel_tol) const {
  for (int l = 0; l < component_count_; ++l) {
    if (!held(l)) continue;
    const Interval& b = box_[static_cast<std::size_t>(l)];
    const double v = w[static_cast<std::size_t>(l)];
    // Each bound gets slop scaled to its own magnitude; a wide box must not
    // loosen the near end.
    if (v < b.lo - rel_tol * std::max(1.0, std::abs(b.lo))) return false;
    if (v > b.hi + rel_tol * std::max(1.0, std::abs(b.hi))) return false;
  }
  for (const auto& c : constraints_) {
    const double g = c.evaluate(w);
    const double scale = std::max({1.0, std::abs(c.threshold), std::abs(g)});
    if (c.sense == ConstraintSense::AtLeast) {
      if (g < c.threshold - rel_tol * scale) return false;
    } else {
      if (g > c.threshold + rel_tol * scale) return false;
    }
  }
  return true;
}

void CensoringDomain::search_feasible_point() {
  std::array<double, kMaxComponents> mid{}, lo{}, hi{}, gmid{};
  for (int l = 0; l < component_count_; ++l) {
    if (!held(l)) continue;
    const auto& b = box_[static_cast<std::size_t>(l)];
    lo[static_cast<std::size_t>(l)] = b.lo;
    hi[static_cast<std::size_t>(l)] = std::isfinite(b.hi) ? b.hi : kDefaultCap;
    mid[static_cast<std::size_t>(l)] =
        0.5 * (lo[static_cast<std::size_t>(l)] + hi[static_cast<std::size_t>(l)]);
    gmid[static_cast<std::size_t>(l)] = std::sqrt(std::max(b.lo, 1.0) *
                                                  std::max(hi[static_cast<std::size_t>(l)], 1.0));
  }

  // Every constraint total is nondecreasing along the lo-to-hi box diagonal,
  // so each one admits a half-open t-range there.  Intersecting the ranges
  // finds a point even when a tight bracket leaves no single-coordinate move,
  // which defeats the cyclic repair below.
  auto at = [&](double t) {
    std::array<double, kMaxComponents> w{};
    for (int l = 0; l < component_count_; ++l) {
      if (!held(l)) continue;
      const auto sl = static_cast<std::size_t>(l);
      w[sl] = lo[sl] + t * (hi[sl] - lo[sl]);
    }
    return w;
  };
  double t_min = 0.0, t_max = 1.0;
  bool diagonal_ok = true;
  for (const auto& c : constraints_) {
    auto value = [&](double t) { return c.evaluate(at(t)); };
    if (c.sense == ConstraintSense::AtLeast) {
      if (value(1.0) < c.threshold) {
        diagonal_ok = false;
        break;
      }
      if (value(0.0) >= c.threshold) continue;
      double a = 0.0, b = 1.0;
      for (int iter = 0; iter < 60; ++iter) {
        const double m = 0.5 * (a + b);
        (value(m) >= c.threshold ? b : a) = m;
      }
      t_min = std::max(t_min, b);
    } else {
      if (value(0.0) > c.threshold) {
        diagonal_ok = false;
        break;
      }
      if (value(1.0) <= c.threshold) continue;
      double a = 0.0, b = 1.0;
      for (int iter = 0; iter < 60; ++iter) {
        const double m = 0.5 * (a + b);
        (value(m) <= c.threshold ? a : b) = m;
      }
      t_max = std::min(t_max, a);
    }
  }
  if (diagonal_ok && t_min <= t_max) {
    for (const double t : {0.5 * (t_min + t_max), t_min, t_max}) {
      const auto w = at(t);
      if (contains(w)) {
        feasible_point_ = w;
        return;
      }
    }
  }

  for (const auto& start : {mid, gmid, lo, hi}) {
    std::array<double, kMaxComponents> w = start;
    for (int cycle = 0; cycle < 60; ++cycle) {
      bool changed = false;
      for (int l = 0; l < component_count_; ++l) {
        if (!held(l)) continue;
        // An empty slice means this coordinate alone cannot absorb the
        // current violation; later coordinates may, so keep cycling.
        const auto slice = conditional_interval(l, w);
        if (!slice) continue;
        const double p = std::clamp(w[static_cast<std::size_t>(l)], slice->lo, slice->hi);
        if (p != w[static_cast<std::size_t>(l)]) {
          w[static_cast<std::size_t>(l)] = p;
          changed = true;
        }
      }
      if (contains(w)) {
        feasible_point_ = w;
        return;
      }
      if (!changed) break;
    }
  }
}

CensoringDomain build_domain(const CensoringEvidence& evidence,
                             const std::array<bool, kMaxComponents>& held,
                             const std::array<double, kMaxComponents>& share,
                             int component_count, double tax_threshold, double cap) {
  if (component_count != 4 && component_count != 5)
    throw ValidationError("component count must be 4 or 5");
  if (!(cap > 1.0) || !std::isfinite(cap))
    throw ValidationError("cap must be finite and exceed one currency unit");
  if (!(tax_threshold > 0.0))
    throw ValidationError("tax threshold must be positive");

  CensoringDomain d;
  d.component_count_ = component_count;
  d.held_ = held;
  d.share_ = share;
  for (int l = component_count; l < kMaxComponents; ++l)
    if (held[static_cast<std::size_t>(l)])
      throw ValidationError("holdings flag set beyond component count");

  for (int l = 0; l < component_count; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const auto& b = evidence.component_bounds[li];
    if (!held[li]) {
      if (b) throw ValidationError("bracket given for a component that is not held");
      continue;
    }
    const double s = share[li];
    if (!(s > 0.0) || s > 1.0 || !std::isfinite(s))
      throw ValidationError("held component share must lie in (0,1]");
    Interval box{1.0, cap};
    if (b) {
      if (!std::isfinite(b->lo) || b->lo < 0.0)
        throw ValidationError("bracket lower bound must be finite and non-negative");
      if (std::isnan(b->hi) || b->hi < b->lo)
        throw ValidationError("bracket upper bound below lower bound");
      box.lo = std::max(b->lo, 1.0);
      box.hi = std::isfinite(b->hi) ? b->hi : cap;
      if (box.hi < box.lo)
        throw ValidationError("bracket upper bound below one currency unit");
    }
    d.box_[li] = box;
  }

  if (evidence.total_bracket) {
    const Interval& t = *evidence.total_bracket;
    if (!std::isfinite(t.lo) || t.lo < 0.0 || std::isnan(t.hi) || t.hi < t.lo)
      throw ValidationError("total-wealth bracket is not a valid interval");
    std::vector<ConstraintTerm> terms;
    for (int l = 0; l < component_count; ++l)
      if (held[static_cast<std::size_t>(l)])
        terms.push_back({l, share[static_cast<std::size_t>(l)], kInf});
    if (t.lo > 0.0)
      d.constraints_.push_back({ConstraintSense::AtLeast, t.lo, 0.0, terms,
                                "total-wealth-bracket-lower"});
    if (std::isfinite(t.hi))
      d.constraints_.push_back({ConstraintSense::AtMost, t.hi, 0.0, terms,
                                "total-wealth-bracket-upper"});
  }

  if (evidence.tax) {
    const WealthTaxEvidence& tax = *evidence.tax;
    if (!(tax.debt >= 0.0) || !std::isfinite(tax.debt))
      throw ValidationError("deductible debt must be finite and non-negative");
    if (!(tax.nd_min >= 0.0) || !(tax.nd_max >= tax.nd_min) || !std::isfinite(tax.nd_max))
      throw ValidationError("non-deductible bounds must satisfy 0 <= nd_min <= nd_max < inf");
    const int prof = component_count == 5 ? 3 : 2;
    if (tax.maybe_nondeductible && !held[static_cast<std::size_t>(prof)])
      throw ValidationError("non-deductible flag set without professional wealth");
    if (!tax.maybe_nondeductible && (tax.nd_min != 0.0 || tax.nd_max != 0.0))
      throw ValidationError("non-deductible bounds given without the flag");

    auto lin = [&](std::vector<ConstraintTerm>& terms, int l, double coef) {
      if (l < component_count && held[static_cast<std::size_t>(l)] && coef > 0.0)
        terms.push_back({l, coef, kInf});
    };
    const double s2 = share[1] * share[1];
    if (tax.pays_tax) {
      // Most generous valuation of taxable wealth must reach the threshold.
      std::vector<ConstraintTerm> terms;
      if (component_count == 5) {
        lin(terms, 0, 1.0);
        lin(terms, 1, 0.8 * s2);
        lin(terms, 2, 1.0);
        if (tax.maybe_nondeductible && tax.nd_max > 0.0)
          terms.push_back({3, 1.0, tax.nd_max});
        lin(terms, 4, 1.0);
      } else {
        lin(terms, 0, 1.0);
        lin(terms, 1, 1.0);
        if (tax.maybe_nondeductible && tax.nd_max > 0.0)
          terms.push_back({2, 1.0, tax.nd_max});
        lin(terms, 3, 1.0);
      }
      d.constraints_.push_back({ConstraintSense::AtLeast, tax_threshold, -tax.debt,
                                std::move(terms), "taxable-wealth-reaches-threshold"});
    } else {
      // Most conservative valuation must stay below the threshold.
      std::vector<ConstraintTerm> terms;
      if (component_count == 5) {
        lin(terms, 0, 1.0);
        lin(terms, 1, 0.8 * s2);
        lin(terms, 2, 1.0);
      } else {
        lin(terms, 0, 1.0);
        lin(terms, 1, 0.8);
      }
      d.constraints_.push_back({ConstraintSense::AtMost, tax_threshold,
                                tax.nd_min - tax.debt, std::move(terms),
                                "taxable-wealth-below-threshold"});
    }
  }

  for (const auto& c : d.constraints_) {
    const double tol = kRelTol * std::max(1.0, std::abs(c.threshold));
    if (c.sense == ConstraintSense::AtLeast) {
      const double best = c.sup_over(d.box_);
      if (best < c.threshold - tol) {
        std::ostringstream os;
        os << "attainable maximum " << best << " below threshold " << c.threshold;
        infeasible(c.label, os.str());
      }
    } else {
      const double worst = c.inf_over(d.box_);
      if (worst > c.threshold + tol) {
        std::ostringstream os;
        os << "attainable minimum " << worst << " above threshold " << c.threshold;
        infeasible(c.label, os.str());
      }
    }
  }

  d.search_feasible_point();
  return d;
}

}  // namespace ineq
