#include "ineq/indices.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ineq/errors.hpp"

namespace ineq {

namespace {

void check_sample(const WeightedSample& ws) {
  if (ws.values.empty()) throw ValidationError("empty sample");
  if (ws.values.size() != ws.weights.size())
    throw ValidationError("values and weights differ in length");
  for (double w : ws.weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ValidationError("weights must be positive and finite");
  for (double v : ws.values)
    if (!std::isfinite(v)) throw ValidationError("non-finite value in sample");
}

void require_positive_values(const SortedSample& s, const char* what) {
  if (s.value.front() <= 0.0)
    throw ValidationError(std::string(what) + " requires strictly positive values");
}

double quantile_token(const std::string& t) {
  // p<NN> percentiles, d<N> deciles, q1/q3 quartiles, median.
  if (t == "median") return 0.5;
  if (t == "q1") return 0.25;
  if (t == "q3") return 0.75;
  if (t.size() >= 2 && (t[0] == 'p' || t[0] == 'd')) {
    const std::string digits = t.substr(1);
    for (char c : digits)
      if (c < '0' || c > '9') return -1.0;
    const int v = std::stoi(digits);
    if (t[0] == 'p' && v >= 1 && v <= 99) return v / 100.0;
    if (t[0] == 'd' && v >= 1 && v <= 9) return v / 10.0;
  }
  return -1.0;
}

std::string quantile_label(double p, bool in_ratio = false) {
  const double scaled = p * 100.0;
  const long r = std::lround(scaled);
  std::ostringstream os;
  if (std::abs(scaled - static_cast<double>(r)) < 1e-9) {
    if (r == 50) return in_ratio ? "d5" : "median";
    if (r == 25) return "q1";
    if (r == 75) return "q3";
    if (r % 10 == 0) {
      os << "d" << r / 10;
      return os.str();
    }
    os << "p" << r;
    return os.str();
  }
  os << "p" << scaled;
  return os.str();
}

}  // namespace

SortedSample SortedSample::from(const WeightedSample& ws) {
  check_sample(ws);
  const std::size_t n = ws.values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return ws.values[a] < ws.values[b]; });
  SortedSample s;
  s.value.resize(n);
  s.weight.resize(n);
  s.cum_w.resize(n);
  s.cum_wv.resize(n);
  s.orig = std::move(idx);
  double cw = 0.0, ew = 0.0;   // compensated accumulators
  double cwv = 0.0, ewv = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = ws.values[s.orig[j]];
    const double w = ws.weights[s.orig[j]];
    s.value[j] = v;
    s.weight[j] = w;
    double y = w - ew;
    double t = cw + y;
    ew = (t - cw) - y;
    cw = t;
    s.cum_w[j] = cw;
    y = w * v - ewv;
    t = cwv + y;
    ewv = (t - cwv) - y;
    cwv = t;
    s.cum_wv[j] = cwv;
  }
  s.total_w = cw;
  s.total_wv = cwv;
  if (!(s.total_w > 0.0)) throw ValidationError("total weight must be positive");
  return s;
}

double weighted_mean(const SortedSample& s) { return s.total_wv / s.total_w; }

double weighted_gini(const SortedSample& s) {
  if (s.value.front() < 0.0)
    throw ValidationError("gini requires non-negative values");
  if (!(s.total_wv > 0.0))
    throw ValidationError("gini requires a positive total");
  double num = 0.0, err = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double term = (2.0 * s.cum_w[j] - s.weight[j]) * s.weight[j] * s.value[j];
    const double y = term - err;
    const double t = num + y;
    err = (t - num) - y;
    num = t;
  }
  return num / (s.total_w * s.total_wv) - 1.0;
}

double weighted_theil(const SortedSample& s) {
  require_positive_values(s, "theil");
  double h = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j)
    h += s.weight[j] * s.value[j] * std::log(s.value[j]);
  return h / s.total_wv - std::log(s.total_wv / s.total_w);
}

double weighted_atkinson(const SortedSample& s, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ValidationError("atkinson aversion must be finite and non-negative");
  require_positive_values(s, "atkinson");
  const double mean = weighted_mean(s);
  if (epsilon == 1.0) {
    double lsum = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j)
      lsum += s.weight[j] * std::log(s.value[j]);
    return 1.0 - std::exp(lsum / s.total_w) / mean;
  }
  const double c = 1.0 - epsilon;
  double psum = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j)
    psum += s.weight[j] * std::pow(s.value[j], c);
  return 1.0 - std::pow(psum / s.total_w, 1.0 / c) / mean;
}

double weighted_quantile(const SortedSample& s, double p) {
  if (!(p >= 0.0) || !(p <= 1.0)) throw ValidationError("quantile level outside [0,1]");
  const double target = p * s.total_w;
  const double tol = 1e-12 * s.total_w;
  // cum_w is nondecreasing; first index whose cumulative weight reaches target.
  const auto it = std::lower_bound(s.cum_w.begin(), s.cum_w.end(), target - tol);
  const std::size_t j = it == s.cum_w.end() ? s.size() - 1
                                            : static_cast<std::size_t>(it - s.cum_w.begin());
  return s.value[j];
}

double gini(std::span<const double> values) {
  WeightedSample ws;
  ws.values.assign(values.begin(), values.end());
  ws.weights.assign(values.size(), 1.0);
  return weighted_gini(SortedSample::from(ws));
}

double theil(std::span<const double> values) {
  WeightedSample ws;
  ws.values.assign(values.begin(), values.end());
  ws.weights.assign(values.size(), 1.0);
  return weighted_theil(SortedSample::from(ws));
}

double atkinson(std::span<const double> values, double epsilon) {
  WeightedSample ws;
  ws.values.assign(values.begin(), values.end());
  ws.weights.assign(values.size(), 1.0);
  return weighted_atkinson(SortedSample::from(ws), epsilon);
}

double evaluate_summary(const SummarySpec& spec, const SortedSample& s) {
  switch (spec.kind) {
    case SummaryKind::Mean: return weighted_mean(s);
    case SummaryKind::Quantile: return weighted_quantile(s, spec.p);
    case SummaryKind::QuantileRatio: {
      const double den = weighted_quantile(s, spec.p_den);
      if (den == 0.0) throw ValidationError("quantile ratio with zero denominator");
      return weighted_quantile(s, spec.p_num) / den;
    }
    case SummaryKind::Gini: return weighted_gini(s);
    case SummaryKind::Theil: return weighted_theil(s);
    case SummaryKind::Atkinson: return weighted_atkinson(s, spec.epsilon);
  }
  throw ValidationError("unknown summary kind");
}

double evaluate_summary(const SummarySpec& spec, const WeightedSample& ws) {
  return evaluate_summary(spec, SortedSample::from(ws));
}

std::string SummarySpec::label() const {
  std::ostringstream os;
  switch (kind) {
    case SummaryKind::Mean: return "mean";
    case SummaryKind::Quantile: return quantile_label(p);
    case SummaryKind::QuantileRatio:
      return quantile_label(p_num, true) + "/" + quantile_label(p_den, true);
    case SummaryKind::Gini: return "gini";
    case SummaryKind::Theil: return "theil";
    case SummaryKind::Atkinson:
      os << "atkinson_" << epsilon;
      return os.str();
  }
  return "?";
}

SummarySpec SummarySpec::parse(const std::string& token) {
  std::string t;
  for (char c : token)
    t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "mean") return {SummaryKind::Mean, 0, 0, 0, 0};
  if (t == "gini") return {SummaryKind::Gini, 0, 0, 0, 0};
  if (t == "theil") return {SummaryKind::Theil, 0, 0, 0, 0};
  if (t.rfind("atkinson", 0) == 0) {
    const std::string rest = t.substr(8);
    if (rest.size() >= 2 && (rest[0] == '_' || rest[0] == ':' || rest[0] == '(')) {
      std::string num = rest.substr(1);
      if (!num.empty() && num.back() == ')') num.pop_back();
      try {
        const double eps = std::stod(num);
        return {SummaryKind::Atkinson, 0, 0, 0, eps};
      } catch (const std::exception&) {
      }
    }
    throw ValidationError("cannot parse atkinson aversion in '" + token + "'");
  }
  const auto slash = t.find('/');
  if (slash != std::string::npos) {
    const double pn = quantile_token(t.substr(0, slash));
    const double pd = quantile_token(t.substr(slash + 1));
    if (pn > 0.0 && pd > 0.0) return {SummaryKind::QuantileRatio, 0, pn, pd, 0};
    throw ValidationError("cannot parse quantile ratio '" + token + "'");
  }
  const double p = quantile_token(t);
  if (p > 0.0) return {SummaryKind::Quantile, p, 0, 0, 0};
  throw ValidationError("unknown summary '" + token + "'");
}

bool SummarySpec::operator==(const SummarySpec& o) const {
  return kind == o.kind && p == o.p && p_num == o.p_num && p_den == o.p_den &&
         epsilon == o.epsilon;
}

std::vector<SummarySpec> default_summary_set() {
  std::vector<SummarySpec> v;
  v.push_back({SummaryKind::Mean, 0, 0, 0, 0});
  for (double p : {0.5, 0.99, 0.95, 0.9, 0.75, 0.25, 0.1})
    v.push_back({SummaryKind::Quantile, p, 0, 0, 0});
  v.push_back({SummaryKind::QuantileRatio, 0, 0.95, 0.5, 0});
  v.push_back({SummaryKind::QuantileRatio, 0, 0.99, 0.5, 0});
  v.push_back({SummaryKind::QuantileRatio, 0, 0.75, 0.25, 0});
  v.push_back({SummaryKind::QuantileRatio, 0, 0.9, 0.1, 0});
  v.push_back({SummaryKind::QuantileRatio, 0, 0.9, 0.5, 0});
  v.push_back({SummaryKind::Gini, 0, 0, 0, 0});
  v.push_back({SummaryKind::Theil, 0, 0, 0, 0});
  v.push_back({SummaryKind::Atkinson, 0, 0, 0, 1.5});
  v.push_back({SummaryKind::Atkinson, 0, 0, 0, 2.0});
  return v;
}

TheilDecomposition theil_decompose(const WeightedSample& ws, std::span<const int> group) {
  if (group.size() != ws.values.size())
    throw ValidationError("group labels must align with the sample");
  int ng = 0;
  for (int g : group) {
    if (g < 0) throw ValidationError("group labels must be non-negative");
    ng = std::max(ng, g + 1);
  }
  TheilDecomposition d;
  d.total = weighted_theil(SortedSample::from(ws));
  d.within.assign(static_cast<std::size_t>(ng), 0.0);
  d.share.assign(static_cast<std::size_t>(ng), 0.0);
  double grand_w = 0.0, grand_wv = 0.0;
  std::vector<WeightedSample> parts(static_cast<std::size_t>(ng));
  for (std::size_t k = 0; k < ws.values.size(); ++k) {
    const auto g = static_cast<std::size_t>(group[k]);
    parts[g].values.push_back(ws.values[k]);
    parts[g].weights.push_back(ws.weights[k]);
    grand_w += ws.weights[k];
    grand_wv += ws.weights[k] * ws.values[k];
  }
  const double grand_mean = grand_wv / grand_w;
  d.between = 0.0;
  for (std::size_t g = 0; g < parts.size(); ++g) {
    if (parts[g].values.empty())
      throw ValidationError("empty group in decomposition");
    const SortedSample s = SortedSample::from(parts[g]);
    d.within[g] = weighted_theil(s);
    d.share[g] = s.total_wv / grand_wv;
    d.between += d.share[g] * std::log((s.total_wv / s.total_w) / grand_mean);
  }
  return d;
}

}  // namespace ineq
