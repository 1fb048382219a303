#include "ineq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numeric>

#include "ineq/design_variance.hpp"
#include "ineq/errors.hpp"
#include "ineq/variates.hpp"

namespace ineq {

namespace {

// Synthetic streams live far above the estimation streams (chain 0 uses small
// ids, chain c>=1 starts at c<<40).
constexpr std::uint64_t kGenStreamBase = 1ull << 39;
constexpr std::uint64_t kCensorStreamBase = (1ull << 39) + (1ull << 32);
constexpr std::uint64_t kSampleStream = (1ull << 39) + (1ull << 33);
constexpr std::uint64_t kResponseStream = kSampleStream + 1;

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::array<double, 8> kDefaultPatternCounts = {658, 984, 837, 147,
                                                     3274, 342, 275, 3175};

std::array<double, 8> normalized_probs(const std::array<double, 8>& p, int patterns) {
  double sum = 0.0;
  for (int i = 0; i < patterns; ++i) sum += p[static_cast<std::size_t>(i)];
  std::array<double, 8> out{};
  for (int i = 0; i < patterns; ++i) out[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] / sum;
  return out;
}

// Cell index i with edges[i] <= v < edges[i+1]; last cell open above.
std::size_t grid_cell(const std::vector<double>& edges, double v) {
  std::size_t i = 0;
  while (i + 1 < edges.size() && v >= edges[i + 1]) ++i;
  return i;
}

std::vector<double> refine_grid(const std::vector<double>& edges, int k) {
  if (k <= 1) return edges;
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double a = edges[i], b = edges[i + 1];
    for (int j = 0; j < k; ++j) out.push_back(a + (b - a) * j / k);
  }
  out.push_back(edges.back());
  return out;
}

double round_unit(double v) { return std::round(v); }

// Largest-remainder apportionment of `total` over targets, then clamped to
// [min(2, cap_h), cap_h] with rebalancing.
std::vector<int> apportion(const std::vector<double>& target, const std::vector<int>& cap,
                           int total) {
  const std::size_t H = target.size();
  double tsum = std::accumulate(target.begin(), target.end(), 0.0);
  if (!(tsum > 0.0)) throw ValidationError("sample allocation targets are all zero");
  std::vector<int> n(H);
  std::vector<std::pair<double, std::size_t>> frac(H);
  int assigned = 0;
  for (std::size_t h = 0; h < H; ++h) {
    const double exact = total * target[h] / tsum;
    n[h] = static_cast<int>(std::floor(exact));
    frac[h] = {exact - n[h], h};
    assigned += n[h];
  }
  std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < total - assigned; ++r) ++n[frac[static_cast<std::size_t>(r)].second];

  for (std::size_t h = 0; h < H; ++h) n[h] = std::clamp(n[h], std::min(2, cap[h]), cap[h]);
  auto sum_n = [&] { return std::accumulate(n.begin(), n.end(), 0); };
  for (int guard = 0; sum_n() > total && guard < 1 << 20; ++guard) {
    std::size_t best = H;
    for (std::size_t h = 0; h < H; ++h)
      if (n[h] > std::min(2, cap[h]) && (best == H || n[h] > n[best])) best = h;
    if (best == H) break;
    --n[best];
  }
  for (int guard = 0; sum_n() < total && guard < 1 << 20; ++guard) {
    std::size_t best = H;
    for (std::size_t h = 0; h < H; ++h)
      if (n[h] < cap[h] && (best == H || cap[h] - n[h] > cap[best] - n[best])) best = h;
    if (best == H) break;
    ++n[best];
  }
  return n;
}

// Sampling without replacement: first n of a Fisher-Yates shuffle.
std::vector<std::size_t> srswor(const std::vector<std::size_t>& frame, std::size_t n,
                                RngStream& rng) {
  std::vector<std::size_t> pool = frame;
  const std::size_t N = pool.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_open(rng) * (N - i));
    std::swap(pool[i], pool[std::min(j, N - 1)]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double size_measure(const PopulationMember& m) {
  const auto& x = m.covariates;
  return 1.0 + 0.03 * x[1] + 0.5 * x[3] + 0.25 * x[4] + 2.0 * x[5];
}

struct Pair {
  std::size_t member;
  double weight;
};

}  // namespace

TrueModel TrueModel::defaults() {
  TrueModel m;
  const std::array<double, kMaxComponents> target_log_mean = {10.0, 11.9, 11.2, 11.0, 8.8};
  const std::array<std::array<double, 5>, kMaxComponents> slopes = {{
      {0.085, -0.00065, 0.25, -0.15, 0.35},
      {0.060, -0.00045, 0.15, -0.10, 0.10},
      {0.090, -0.00070, 0.20, -0.12, 0.30},
      {0.050, -0.00040, 0.10, -0.05, 0.90},
      {0.070, -0.00055, 0.18, -0.12, 0.25},
  }};
  // Covariate means under the generator: age ~ U(25,85), categories uniform,
  // self-employment rate 0.25.
  const double mean_age = 55.0, mean_age2 = 3325.0, mean_cat = 1.0 / 3.0, mean_self = 0.25;
  for (int l = 0; l < kMaxComponents; ++l) {
    const auto& s = slopes[static_cast<std::size_t>(l)];
    auto& row = m.coef[static_cast<std::size_t>(l)];
    row[1] = s[0];
    row[2] = s[1];
    row[3] = s[2];
    row[4] = s[3];
    row[5] = s[4];
    row[0] = target_log_mean[static_cast<std::size_t>(l)] -
             (s[0] * mean_age + s[1] * mean_age2 + s[2] * mean_cat + s[3] * mean_cat +
              s[4] * mean_self);
  }
  for (int i = 2; i <= 8; ++i)
    for (int l = 0; l < kMaxComponents; ++l)
      m.pattern_shift[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(l)] =
          0.1 * (((i * 3 + l) % 5) - 2);

  const std::array<double, kMaxComponents> sd = {1.05, 0.65, 0.95, 1.15, 0.85};
  m.sigma_full.resize(kMaxComponents, kMaxComponents);
  for (int a = 0; a < kMaxComponents; ++a)
    for (int b = 0; b < kMaxComponents; ++b)
      m.sigma_full(a, b) = sd[static_cast<std::size_t>(a)] * sd[static_cast<std::size_t>(b)] *
                           std::pow(0.35, std::abs(a - b));
  for (int i = 1; i <= 8; ++i)
    m.sigma_scale[static_cast<std::size_t>(i - 1)] = 0.85 + 0.06 * ((i - 1) % 4);
  return m;
}

GeneratorConfig GeneratorConfig::defaults() {
  GeneratorConfig cfg;
  cfg.pattern_probs = normalized_probs(kDefaultPatternCounts, 8);
  cfg.component_grid = {0,     750,    1500,   3000,    7500,    15000,  30000,
                        75000, 150000, 300000, 450000,  750000,  1500000, 3000000};
  cfg.overview_grid = {0,     3000,   7500,   15000,  30000,  45000,
                       75000, 105000, 150000, 225000, 300000, 450000};
  return cfg;
}

void validate_generator_config(const GeneratorConfig& cfg) {
  if (cfg.population_size < 4) throw ValidationError("population size too small");
  if (cfg.component_count != 4 && cfg.component_count != 5)
    throw ValidationError("component count must be 4 or 5");
  double psum = 0.0;
  for (double p : cfg.pattern_probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("pattern probabilities must be non-negative");
    psum += p;
  }
  if (!(psum > 0.0)) throw ValidationError("pattern probabilities sum to zero");
  for (const auto* grid : {&cfg.component_grid, &cfg.overview_grid}) {
    if (grid->empty() || (*grid)[0] != 0.0)
      throw ValidationError("bracket grids must start at zero");
    for (std::size_t i = 1; i < grid->size(); ++i)
      if (!((*grid)[i] > (*grid)[i - 1]) || !std::isfinite((*grid)[i]))
        throw ValidationError("bracket grid edges must be finite and ascending");
  }
  if (cfg.bracket_refine < 1) throw ValidationError("bracket refinement must be at least 1");
  for (double p : {cfg.point_measure_prob, cfg.total_bracket_prob, cfg.tax_report_prob})
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probabilities must lie in [0,1]");
  if (!(cfg.tax_threshold > 0.0)) throw ValidationError("tax threshold must be positive");
  if (!(cfg.cap > 1.0) || !std::isfinite(cfg.cap)) throw ValidationError("cap must be finite and exceed one");
  if (cfg.model.sigma_full.rows() != kMaxComponents || cfg.model.sigma_full.cols() != kMaxComponents)
    throw ValidationError("sigma_full must be 5x5");
  for (double s : cfg.model.sigma_scale)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("sigma scales must be non-negative");

  if (cfg.stratum_count < 1) throw ValidationError("stratum count must be positive");
  if (cfg.response_rates.size() != static_cast<std::size_t>(cfg.stratum_count))
    throw ValidationError("one response rate per stratum required");
  for (double r : cfg.response_rates)
    if (!(r > 0.0 && r <= 1.0)) throw ValidationError("response rates must lie in (0,1]");
  switch (cfg.design) {
    case DesignKind::StratifiedSrs:
      if (cfg.oversample.size() != static_cast<std::size_t>(cfg.stratum_count))
        throw ValidationError("one oversampling factor per stratum required");
      for (double f : cfg.oversample)
        if (!(f > 0.0) || !std::isfinite(f)) throw ValidationError("oversampling factors must be positive");
      [[fallthrough]];
    case DesignKind::Srswor:
    case DesignKind::UnequalProbFixedSize:
      if (cfg.sample_size < 2 * cfg.stratum_count || cfg.sample_size > cfg.population_size)
        throw ValidationError("sample size out of range");
      break;
    case DesignKind::TwoStageCluster:
      if (cfg.psus_per_stratum < 2 || cfg.psus_sampled < 2 ||
          cfg.psus_sampled > cfg.psus_per_stratum)
        throw ValidationError("two-stage design needs at least two sampled clusters per stratum");
      if (!(cfg.within_psu_fraction > 0.0 && cfg.within_psu_fraction <= 1.0))
        throw ValidationError("within-cluster fraction must lie in (0,1]");
      break;
  }
}

Population generate_population(const GeneratorConfig& cfg) {
  validate_generator_config(cfg);
  const auto probs = normalized_probs(cfg.pattern_probs, 8);
  std::array<double, 8> cum{};
  double acc = 0.0;
  for (int i = 0; i < 8; ++i) {
    acc += probs[static_cast<std::size_t>(i)];
    cum[static_cast<std::size_t>(i)] = acc;
  }
  cum[7] = 1.0;

  const int N = cfg.population_size;
  Population pop;
  pop.component_count = 5;
  pop.members.resize(static_cast<std::size_t>(N));
  std::vector<double> score(static_cast<std::size_t>(N));
  const bool zero_sigma = cfg.model.sigma_full.norm() == 0.0;

  for (int idx = 0; idx < N; ++idx) {
    RngStream rng(cfg.seed, kGenStreamBase + static_cast<std::uint64_t>(idx));
    PopulationMember& m = pop.members[static_cast<std::size_t>(idx)];

    const double up = uniform_open(rng);
    int pattern = 1;
    while (pattern < 8 && up > cum[static_cast<std::size_t>(pattern - 1)]) ++pattern;
    m.holdings = HoldingsVector::from_pattern(pattern, 5);

    const double age = 25.0 + 60.0 * uniform_open(rng);
    const int cat = std::min(2, static_cast<int>(3.0 * uniform_open(rng)));
    const bool self = uniform_open(rng) < 0.25;
    m.covariates = {1.0, age, age * age, cat == 1 ? 1.0 : 0.0, cat == 2 ? 1.0 : 0.0,
                    self ? 1.0 : 0.0};

    const int d = m.holdings.held_count();
    Eigen::VectorXd mu(d);
    for (int r = 0; r < d; ++r) {
      const int l = m.holdings.held_component(r);
      const auto& row = cfg.model.coef[static_cast<std::size_t>(l)];
      double v = 0.0;
      for (int j = 0; j < TrueModel::kCovDim; ++j)
        v += row[static_cast<std::size_t>(j)] * m.covariates[static_cast<std::size_t>(j)];
      mu[r] = v + cfg.model.pattern_shift[static_cast<std::size_t>(pattern - 1)]
                                         [static_cast<std::size_t>(l)];
    }
    Eigen::VectorXd y;
    const double scale = cfg.model.sigma_scale[static_cast<std::size_t>(pattern - 1)];
    if (zero_sigma || scale == 0.0) {
      y = mu;
    } else {
      Eigen::MatrixXd S(d, d);
      for (int r1 = 0; r1 < d; ++r1)
        for (int r2 = 0; r2 < d; ++r2)
          S(r1, r2) = scale * cfg.model.sigma_full(m.holdings.held_component(r1),
                                                   m.holdings.held_component(r2));
      y = mvn_draw(mu, S, rng);
    }
    for (int r = 0; r < d; ++r) {
      const int l = m.holdings.held_component(r);
      m.wealth[static_cast<std::size_t>(l)] =
          std::clamp(round_unit(std::exp(y[r])), 1.0, std::floor(cfg.cap));
    }

    if (m.holdings.holds(1)) {
      const double us = uniform_open(rng);
      if (us < 0.7) {
        m.share[1] = 1.0;
      } else {
        m.share[1] = std::round((0.4 + 0.6 * uniform_open(rng)) * 100.0) / 100.0;
      }
    }

    const double total = total_wealth(m.holdings, m.share, m.wealth);
    if (uniform_open(rng) < 0.4) m.debt = std::floor(uniform_open(rng) * 0.3 * total);

    if (m.holdings.holds(3)) {
      m.maybe_nondeductible = uniform_open(rng) < 0.5;
      if (m.maybe_nondeductible) {
        const double w3 = m.wealth[3];
        m.nd_true = std::clamp(round_unit(uniform_open(rng) * w3), 0.0, w3);
        m.nd_min = std::floor(m.nd_true * (0.4 + 0.55 * uniform_open(rng)));
        m.nd_max = std::min(w3, std::max(m.nd_true,
                                         round_unit(m.nd_true * (1.05 + 0.55 * uniform_open(rng)))));
      }
    }

    // True taxable wealth: lies between the conservative and generous
    // valuations by construction, so the tax constraints always admit the
    // true vector.
    const double s1 = m.share[1];
    const double taxable = m.wealth[0] + 0.8 * s1 * s1 * m.wealth[1] + m.wealth[2] +
                           (m.maybe_nondeductible ? m.nd_true : 0.0) + 0.6 * m.wealth[4] -
                           m.debt;
    m.pays_tax = taxable >= cfg.tax_threshold;

    score[static_cast<std::size_t>(idx)] = 0.05 * age + 2.2 * (self ? 1.0 : 0.0) +
                                           0.8 * (cat == 1 ? 1.0 : 0.0) +
                                           0.3 * (cat == 2 ? 1.0 : 0.0) +
                                           0.5 * std_normal(rng);
  }

  // Strata are score quantile blocks; clusters are score-adjacent runs inside
  // each stratum.
  std::vector<std::size_t> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return a < b;
  });
  const int H = cfg.stratum_count;
  for (int r = 0; r < N; ++r) {
    const std::size_t idx = order[static_cast<std::size_t>(r)];
    const int h = std::min(H - 1, static_cast<int>(static_cast<long long>(r) * H / N));
    pop.members[idx].stratum = h;
  }
  std::vector<int> fill(static_cast<std::size_t>(H), 0);
  std::vector<int> size_h(static_cast<std::size_t>(H), 0);
  for (int r = 0; r < N; ++r)
    ++size_h[static_cast<std::size_t>(pop.members[order[static_cast<std::size_t>(r)]].stratum)];
  for (int r = 0; r < N; ++r) {
    const std::size_t idx = order[static_cast<std::size_t>(r)];
    const int h = pop.members[idx].stratum;
    const int pos = fill[static_cast<std::size_t>(h)]++;
    pop.members[idx].psu =
        std::min(cfg.psus_per_stratum - 1,
                 static_cast<int>(static_cast<long long>(pos) * cfg.psus_per_stratum /
                                  std::max(1, size_h[static_cast<std::size_t>(h)])));
  }
  return pop;
}

std::vector<double> population_totals(const Population& pop) {
  std::vector<double> t;
  t.reserve(pop.members.size());
  for (const auto& m : pop.members) t.push_back(total_wealth(m.holdings, m.share, m.wealth));
  return t;
}

double true_summary(const Population& pop, const SummarySpec& spec) {
  WeightedSample ws;
  ws.values = population_totals(pop);
  ws.weights.assign(ws.values.size(), 1.0);
  return evaluate_summary(spec, ws);
}

SampleDraw draw_sample(const Population& pop, const GeneratorConfig& cfg) {
  validate_generator_config(cfg);
  const std::size_t N = pop.members.size();
  RngStream rng(cfg.seed, kSampleStream);
  std::vector<Pair> picked;

  switch (cfg.design) {
    case DesignKind::Srswor: {
      std::vector<std::size_t> frame(N);
      std::iota(frame.begin(), frame.end(), 0);
      const auto sel = srswor(frame, static_cast<std::size_t>(cfg.sample_size), rng);
      const double w = static_cast<double>(N) / static_cast<double>(sel.size());
      for (auto i : sel) picked.push_back({i, w});
      break;
    }
    case DesignKind::StratifiedSrs: {
      std::vector<std::vector<std::size_t>> frames(static_cast<std::size_t>(cfg.stratum_count));
      for (std::size_t i = 0; i < N; ++i)
        frames[static_cast<std::size_t>(pop.members[i].stratum)].push_back(i);
      std::vector<double> target(frames.size());
      std::vector<int> cap(frames.size());
      for (std::size_t h = 0; h < frames.size(); ++h) {
        target[h] = static_cast<double>(frames[h].size()) * cfg.oversample[h];
        cap[h] = static_cast<int>(frames[h].size());
      }
      const auto alloc = apportion(target, cap, cfg.sample_size);
      for (std::size_t h = 0; h < frames.size(); ++h) {
        if (frames[h].empty()) continue;
        const auto sel = srswor(frames[h], static_cast<std::size_t>(alloc[h]), rng);
        const double w = static_cast<double>(frames[h].size()) / static_cast<double>(sel.size());
        for (auto i : sel) picked.push_back({i, w});
      }
      break;
    }
    case DesignKind::UnequalProbFixedSize: {
      const int n = cfg.sample_size;
      std::vector<double> size(N);
      for (std::size_t i = 0; i < N; ++i) size[i] = size_measure(pop.members[i]);
      std::vector<double> pi(N, 0.0);
      std::vector<char> clipped(N, 0);
      for (int pass = 0; pass < 64; ++pass) {
        double free_mass = n;
        double ssum = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
          if (clipped[i]) free_mass -= 0.9;
          else ssum += size[i];
        }
        const double c = free_mass / ssum;
        bool changed = false;
        for (std::size_t i = 0; i < N; ++i) {
          if (clipped[i]) continue;
          pi[i] = c * size[i];
          if (pi[i] > 0.9) {
            clipped[i] = 1;
            changed = true;
          }
        }
        if (!changed) break;
      }
      for (std::size_t i = 0; i < N; ++i)
        if (clipped[i]) pi[i] = 0.9;

      // Systematic selection over a random permutation approximates the
      // fixed-size maximum-entropy design.
      std::vector<std::size_t> perm(N);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = 0; i + 1 < N; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_open(rng) * (N - i));
        std::swap(perm[i], perm[std::min(j, N - 1)]);
      }
      double targetv = uniform_open(rng);
      double cum = 0.0;
      for (auto k : perm) {
        cum += pi[k];
        if (cum > targetv && picked.size() < static_cast<std::size_t>(n)) {
          picked.push_back({k, 1.0 / pi[k]});
          targetv += 1.0;
        }
      }
      for (auto it = perm.rbegin(); it != perm.rend() && picked.size() < static_cast<std::size_t>(n); ++it) {
        bool already = false;
        for (const auto& p : picked)
          if (p.member == *it) { already = true; break; }
        if (!already) picked.push_back({*it, 1.0 / pi[*it]});
      }
      break;
    }
    case DesignKind::TwoStageCluster: {
      std::map<std::pair<int, int>, std::vector<std::size_t>> cluster;
      for (std::size_t i = 0; i < N; ++i)
        cluster[{pop.members[i].stratum, pop.members[i].psu}].push_back(i);
      std::map<int, std::vector<int>> psus_of;
      for (const auto& [key, mem] : cluster) psus_of[key.first].push_back(key.second);
      for (auto& [h, psus] : psus_of) {
        std::vector<std::size_t> ids(psus.begin(), psus.end());
        const std::size_t p =
            std::min(ids.size(), static_cast<std::size_t>(cfg.psus_sampled));
        if (p < 2) throw ValidationError("two-stage design needs at least two clusters per stratum");
        const auto chosen = srswor(ids, p, rng);
        const double stage1 = static_cast<double>(ids.size()) / static_cast<double>(p);
        for (auto psu_id : chosen) {
          const auto& mem = cluster[{h, static_cast<int>(psu_id)}];
          const std::size_t M = mem.size();
          std::size_t m = static_cast<std::size_t>(
              std::lround(cfg.within_psu_fraction * static_cast<double>(M)));
          m = std::clamp<std::size_t>(m, std::min<std::size_t>(2, M), M);
          const auto sel = srswor(mem, m, rng);
          const double w = stage1 * static_cast<double>(M) / static_cast<double>(m);
          for (auto i : sel) picked.push_back({i, w});
        }
      }
      break;
    }
  }

  std::sort(picked.begin(), picked.end(),
            [](const Pair& a, const Pair& b) { return a.member < b.member; });

  const std::size_t n = picked.size();
  SampleDraw draw;
  draw.selected.reserve(n);
  draw.design_weights.reserve(n);
  for (const auto& p : picked) {
    draw.selected.push_back(p.member);
    draw.design_weights.push_back(p.weight);
  }

  // Response phase: per-stratum rates, then a deterministic repair so every
  // stratum keeps at least two respondents (each cluster one, two-stage).
  RngStream resp(cfg.seed, kResponseStream);
  auto flags = std::make_unique<bool[]>(n);
  std::vector<int> strat(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = pop.members[draw.selected[i]];
    strat[i] = m.stratum;
    flags[i] = uniform_open(resp) < cfg.response_rates[static_cast<std::size_t>(m.stratum)];
  }
  if (cfg.design == DesignKind::TwoStageCluster) {
    std::map<std::pair<int, int>, int> alive;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = pop.members[draw.selected[i]];
      if (flags[i]) ++alive[{m.stratum, m.psu}];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = pop.members[draw.selected[i]];
      auto& cnt = alive[{m.stratum, m.psu}];
      if (cnt == 0) {
        flags[i] = true;
        cnt = 1;
      }
    }
  } else {
    std::map<int, int> alive;
    for (std::size_t i = 0; i < n; ++i)
      if (flags[i]) ++alive[strat[i]];
    for (std::size_t i = 0; i < n; ++i) {
      auto& cnt = alive[strat[i]];
      if (cnt < 2 && !flags[i]) {
        flags[i] = true;
        ++cnt;
      }
    }
  }

  const auto adj = nonresponse_adjust(draw.design_weights, strat,
                                      std::span<const bool>(flags.get(), n));
  draw.members.reserve(adj.kept.size());
  for (auto i : adj.kept) draw.members.push_back(draw.selected[i]);
  draw.weights = adj.weights;
  return draw;
}

Dataset make_dataset(const Population& pop, const std::vector<std::size_t>& members,
                     const std::vector<double>& weights, const GeneratorConfig& cfg) {
  if (members.size() != weights.size())
    throw ValidationError("member and weight lists must align");
  const auto comp_grid = refine_grid(cfg.component_grid, cfg.bracket_refine);
  const auto over_grid = refine_grid(cfg.overview_grid, cfg.bracket_refine);

  Dataset ds;
  ds.component_count = 5;
  ds.cap = cfg.cap;
  ds.tax_threshold = cfg.tax_threshold;
  ds.design.kind = cfg.design;

  char idbuf[16];
  for (std::size_t k = 0; k < members.size(); ++k) {
    const std::size_t idx = members[k];
    if (idx >= pop.members.size()) throw ValidationError("sample member index out of range");
    const PopulationMember& m = pop.members[idx];
    RngStream rng(cfg.seed, kCensorStreamBase + static_cast<std::uint64_t>(idx));

    HouseholdRecord r;
    std::snprintf(idbuf, sizeof idbuf, "h%07zu", idx);
    r.id = idbuf;
    r.weight = weights[k];
    r.stratum = m.stratum;
    r.psu = m.psu;
    r.holdings = m.holdings;
    r.share = m.share;

    for (int l = 0; l < 5; ++l) {
      if (!m.holdings.holds(l)) continue;
      r.covariates[static_cast<std::size_t>(l)] = m.covariates;
      const double w = m.wealth[static_cast<std::size_t>(l)];
      if (cfg.point_mode || uniform_open(rng) < cfg.point_measure_prob) {
        r.evidence.component_bounds[static_cast<std::size_t>(l)] = Interval{w, w};
      } else {
        const std::size_t c = grid_cell(comp_grid, w);
        const double lo = comp_grid[c];
        const double hi = c + 1 < comp_grid.size() ? comp_grid[c + 1] : kInf;
        r.evidence.component_bounds[static_cast<std::size_t>(l)] = Interval{lo, hi};
      }
    }

    if (!cfg.point_mode && uniform_open(rng) < cfg.total_bracket_prob) {
      const double t = total_wealth(m.holdings, m.share, m.wealth);
      const std::size_t c = grid_cell(over_grid, t);
      const double lo = over_grid[c];
      const double hi = c + 1 < over_grid.size() ? over_grid[c + 1] : kInf;
      r.evidence.total_bracket = Interval{lo, hi};
    }

    if (uniform_open(rng) < cfg.tax_report_prob) {
      WealthTaxEvidence tax;
      tax.pays_tax = m.pays_tax;
      tax.debt = m.debt;
      tax.nd_min = m.nd_min;
      tax.nd_max = m.nd_max;
      tax.maybe_nondeductible = m.maybe_nondeductible;
      r.evidence.tax = tax;
    }

    ds.households.push_back(std::move(r));
  }
  return ds;
}

SynthOutput simulate(const GeneratorConfig& cfg) {
  validate_generator_config(cfg);
  SynthOutput out;
  out.population = generate_population(cfg);
  const auto draw = draw_sample(out.population, cfg);
  out.dataset = make_dataset(out.population, draw.members, draw.weights, cfg);
  if (cfg.component_count == 4) out.dataset = aggregate_components(out.dataset);
  return out;
}

Dataset aggregate_components(const Dataset& ds) {
  if (ds.component_count != 5)
    throw ValidationError("aggregation expects a five-component dataset");
  Dataset out;
  out.component_count = 4;
  out.cap = ds.cap;
  out.tax_threshold = ds.tax_threshold;
  out.design = ds.design;
  out.calibration_totals = ds.calibration_totals;

  for (const auto& r : ds.households) {
    const bool h1 = r.holdings.holds(1), h2 = r.holdings.holds(2);
    HouseholdRecord o;
    o.id = r.id;
    o.weight = r.weight;
    o.stratum = r.stratum;
    o.psu = r.psu;
    o.aux = r.aux;
    o.holdings = HoldingsVector({true, h1 || h2, r.holdings.holds(3), true, false}, 4);
    o.share = {1.0, 1.0, 1.0, 1.0, 1.0};

    o.covariates[0] = r.covariates[0];
    if (h1 || h2) o.covariates[1] = h1 ? r.covariates[1] : r.covariates[2];
    if (r.holdings.holds(3)) o.covariates[2] = r.covariates[3];
    o.covariates[3] = r.covariates[4];

    o.evidence.component_bounds[0] = r.evidence.component_bounds[0];
    if (h1 || h2) {
      const double s = r.share[1];
      double lo = 0.0, hi = 0.0;
      bool any = false, open = false;
      if (h1) {
        if (const auto& b = r.evidence.component_bounds[1]) {
          any = true;
          lo += s * b->lo;
          if (std::isfinite(b->hi)) hi += s * b->hi; else open = true;
        } else {
          open = true;
        }
      }
      if (h2) {
        if (const auto& b = r.evidence.component_bounds[2]) {
          any = true;
          lo += b->lo;
          if (std::isfinite(b->hi)) hi += b->hi; else open = true;
        } else {
          open = true;
        }
      }
      if (any)
        o.evidence.component_bounds[1] =
            Interval{std::floor(lo), open ? kInf : std::ceil(hi)};
    }
    o.evidence.component_bounds[2] = r.evidence.component_bounds[3];
    o.evidence.component_bounds[3] = r.evidence.component_bounds[4];
    o.evidence.total_bracket = r.evidence.total_bracket;
    o.evidence.tax = r.evidence.tax;

    out.households.push_back(std::move(o));
  }
  return out;
}

}  // namespace ineq
