#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ineq/dataset_io.hpp"
#include "ineq/errors.hpp"
#include "ineq/gibbs.hpp"
#include "ineq/inference.hpp"
#include "ineq/synth.hpp"
#include "ineq/version.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ineq;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitRuntime = 4;

std::string output_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("INEQEST_OUT"); env && *env) return env;
  return ".";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir);
}

std::vector<SummarySpec> parse_summaries(const std::string& csv) {
  if (csv.empty()) return default_summary_set();
  std::vector<SummarySpec> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string tok =
        csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!tok.empty()) out.push_back(SummarySpec::parse(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ValidationError("no summaries given");
  return out;
}

void print_report_table(const InferenceResult& res) {
  std::printf("%-14s %16s %16s %16s\n", "summary", "lower", "prediction", "upper");
  for (const auto& r : res.rows) {
    std::printf("%-14s %16.4f %16.4f %16.4f\n", r.spec.label().c_str(), r.lower,
                r.prediction, r.upper);
  }
}

int cmd_check(const std::string& path) {
  const DatasetFile df = read_dataset(path);
  const Dataset& ds = df.dataset;
  std::vector<int> pattern_count_tab(static_cast<std::size_t>(pattern_count(ds.component_count)) + 1, 0);
  for (const auto& r : ds.households) ++pattern_count_tab[static_cast<std::size_t>(r.holdings.pattern())];
  std::printf("dataset          %s\n", path.c_str());
  std::printf("hash             %s\n", df.hash.c_str());
  std::printf("components       %d\n", ds.component_count);
  std::printf("design           %s\n", design_kind_name(ds.design.kind).c_str());
  std::printf("households       %zu\n", ds.households.size());
  for (std::size_t p = 1; p < pattern_count_tab.size(); ++p)
    std::printf("pattern %zu        %d\n", p, pattern_count_tab[p]);
  std::printf("all domains feasible\n");
  return kExitOk;
}

int cmd_simulate(GeneratorConfig cfg, bool seed_given, const std::string& out_flag,
                 int replicates) {
  if (!seed_given) {
    std::random_device rd;
    cfg.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  const std::string base = output_dir(out_flag);
  for (int rep = 0; rep < replicates; ++rep) {
    GeneratorConfig rc = cfg;
    rc.seed = cfg.seed + static_cast<std::uint64_t>(rep);
    std::string dir = base;
    if (replicates > 1) {
      char sub[16];
      std::snprintf(sub, sizeof sub, "rep%02d", rep);
      dir = (fs::path(base) / sub).string();
    }
    ensure_dir(dir);
    const SynthOutput out = simulate(rc);
    const std::string data_path = (fs::path(dir) / "dataset.jsonl").string();
    write_dataset(data_path, out.dataset);

    TruthFile t;
    t.dataset_hash = file_hash(data_path);
    t.seed = rc.seed;
    t.population_size = rc.population_size;
    for (const auto& spec : default_summary_set())
      t.entries.push_back({spec, true_summary(out.population, spec)});
    write_truth((fs::path(dir) / "truth.json").string(), t);

    std::printf("replicate %d: seed %llu, %zu households -> %s\n", rep,
                static_cast<unsigned long long>(rc.seed), out.dataset.households.size(),
                dir.c_str());
  }
  return kExitOk;
}

struct EstimateArgs {
  std::string dataset_path;
  int iterations = 20000;
  int burn_in = 1000;
  std::uint64_t seed = 1;
  int chains = 1;
  double alpha = 0.1;
  std::string summaries;
  std::string variance_mode = "linearization";
  double cap = 0.0;  // 0 keeps the dataset cap
  int components = 0;  // 0 keeps the dataset layout
  std::string out;
};

int cmd_estimate(const EstimateArgs& a) {
  DatasetFile df = read_dataset(a.dataset_path);
  Dataset& ds = df.dataset;
  if (a.components != 0) {
    if (a.components == ds.component_count) {
      // already in the requested layout
    } else if (a.components == 4 && ds.component_count == 5) {
      ds = aggregate_components(ds);
    } else {
      throw ValidationError("cannot convert a " + std::to_string(ds.component_count) +
                            "-component dataset to " + std::to_string(a.components) +
                            " components");
    }
  }
  if (a.cap > 0.0) ds.cap = a.cap;
  if (a.iterations < 2) throw ValidationError("--iterations must be at least 2");
  if (a.burn_in < 0 || a.burn_in >= a.iterations)
    throw ValidationError("--burn-in must lie in [0, iterations)");
  if (a.chains < 1) throw ValidationError("--chains must be positive");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw ValidationError("--alpha must lie in (0,1)");

  ChainConfig cc;
  cc.total_sweeps = a.iterations;
  cc.burn_in = a.burn_in;
  cc.seed = a.seed;
  cc.summaries = parse_summaries(a.summaries);
  cc.variance_mode = variance_mode_from_name(a.variance_mode);

  PreparedDataset prep(ds);
  std::vector<ChainOutput> outs;
  outs.reserve(static_cast<std::size_t>(a.chains));
  for (int c = 0; c < a.chains; ++c) {
    ChainConfig run_cfg = cc;
    run_cfg.chain_index = c;
    GibbsSampler sampler(prep, run_cfg);
    outs.push_back(sampler.run());
  }
  const InferenceResult res = summarize_chains(outs, a.alpha);

  RunManifest m;
  m.software_version = kVersion;
  m.dataset_hash = df.hash;
  m.component_count = ds.component_count;
  m.seed = a.seed;
  m.chains = a.chains;
  m.iterations = a.iterations;
  m.burn_in = a.burn_in;
  m.alpha = a.alpha;
  m.variance_mode = variance_mode_name(cc.variance_mode);
  m.cap = ds.cap;
  m.tax_threshold = ds.tax_threshold;
  for (const auto& s : cc.summaries) m.summaries.push_back(s.label());
  m.created = now_rfc3339();

  const std::string dir = output_dir(a.out);
  ensure_dir(dir);
  write_report((fs::path(dir) / "report.json").string(), res, m);
  write_sweep_log((fs::path(dir) / "sweeps.jsonl").string(), outs, m);
  write_series((fs::path(dir) / "series.jsonl").string(), res, m);
  write_manifest((fs::path(dir) / "manifest.json").string(), m);

  print_report_table(res);
  for (const auto& r : res.rows)
    if (r.convergence.drift_flag)
      std::fprintf(stderr, "warning: running mean of %s still drifting (split delta %.3g)\n",
                   r.spec.label().c_str(), r.convergence.split_delta);
  std::printf("report written to %s\n", (fs::path(dir) / "report.json").string().c_str());
  return kExitOk;
}

struct CoverageCount {
  int covered = 0;
  int total = 0;
};

bool validate_pair(const std::string& truth_path, const std::string& report_path,
                   std::map<std::string, CoverageCount>* agg, bool print_rows) {
  const TruthFile truth = read_truth(truth_path);
  const ReportFile report = read_report(report_path);
  if (truth.dataset_hash != report.manifest.dataset_hash)
    throw ValidationError("dataset hash mismatch: truth " + truth.dataset_hash +
                          " vs report " + report.manifest.dataset_hash);
  bool all_ok = true;
  if (print_rows)
    std::printf("%-14s %16s %16s %12s %16s %16s  %s\n", "summary", "truth", "prediction",
                "abs error", "lower", "upper", "covered");
  for (const auto& e : truth.entries) {
    const ReportRow* row = nullptr;
    for (const auto& r : report.rows)
      if (r.spec == e.spec) {
        row = &r;
        break;
      }
    if (!row) continue;
    const bool covered = e.value >= row->lower && e.value <= row->upper;
    all_ok = all_ok && covered;
    if (agg) {
      auto& c = (*agg)[e.spec.label()];
      c.total += 1;
      c.covered += covered ? 1 : 0;
    }
    if (print_rows)
      std::printf("%-14s %16.4f %16.4f %12.4f %16.4f %16.4f  %s\n", e.spec.label().c_str(),
                  e.value, row->prediction, std::abs(row->prediction - e.value), row->lower,
                  row->upper, covered ? "PASS" : "FAIL");
  }
  return all_ok;
}

int cmd_validate(const std::string& truth_path, const std::string& report_path,
                 const std::vector<std::string>& replicate_dirs) {
  if (replicate_dirs.empty()) {
    const bool ok = validate_pair(truth_path, report_path, nullptr, true);
    return ok ? kExitOk : kExitCheckFailed;
  }
  std::map<std::string, CoverageCount> agg;
  for (const auto& dir : replicate_dirs) {
    const std::string t = (fs::path(dir) / "truth.json").string();
    const std::string r = (fs::path(dir) / "report.json").string();
    validate_pair(t, r, &agg, false);
  }
  std::printf("%-14s %10s %10s %10s\n", "summary", "covered", "total", "rate");
  for (const auto& [label, c] : agg)
    std::printf("%-14s %10d %10d %10.3f\n", label.c_str(), c.covered, c.total,
                c.total ? static_cast<double>(c.covered) / c.total : 0.0);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-population inequality estimation from censored survey data"};
  app.require_subcommand(1);

  // check
  auto* check = app.add_subcommand("check", "validate a dataset file and its domains");
  std::string check_path;
  check->add_option("dataset", check_path, "dataset file")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset with known truth");
  GeneratorConfig sim_cfg = GeneratorConfig::defaults();
  std::uint64_t sim_seed = 0;
  bool sim_point = false;
  int sim_reps = 1;
  int sim_components = 5;
  std::string sim_design = "stratified_srs", sim_out;
  sim->add_option("--seed", sim_seed, "generator seed (random when omitted)");
  sim->add_option("--population", sim_cfg.population_size, "population size");
  sim->add_option("--sample", sim_cfg.sample_size, "sample size before nonresponse");
  sim->add_option("--components", sim_components, "component layout (4 or 5)")
      ->check(CLI::IsMember({4, 5}));
  sim->add_option("--design", sim_design,
                  "srswor|stratified_srs|unequal_prob_fixed_size|two_stage_cluster");
  sim->add_option("--bracket-refine", sim_cfg.bracket_refine, "split each bracket cell");
  sim->add_flag("--point-mode", sim_point, "record exact values instead of brackets");
  sim->add_option("--replicates", sim_reps, "number of replicate datasets")
      ->check(CLI::PositiveNumber);
  sim->add_option("--out", sim_out, "output directory (or INEQEST_OUT)");

  // estimate
  auto* est = app.add_subcommand("estimate", "run the sampler and write the report");
  EstimateArgs ea;
  est->add_option("dataset", ea.dataset_path, "dataset file")->required();
  est->add_option("--iterations", ea.iterations, "total sweeps");
  est->add_option("--burn-in", ea.burn_in, "sweeps discarded before averaging");
  est->add_option("--seed", ea.seed, "sampler seed");
  est->add_option("--chains", ea.chains, "independent chains");
  est->add_option("--alpha", ea.alpha, "posterior region tail mass");
  est->add_option("--summaries", ea.summaries, "comma-separated summary list");
  est->add_option("--variance-mode", ea.variance_mode, "linearization|jackknife|fast_approx");
  est->add_option("--cap", ea.cap, "upper cap for unbounded brackets");
  est->add_option("--components", ea.components, "force component layout (4 or 5)")
      ->check(CLI::IsMember({4, 5}));
  est->add_option("--out", ea.out, "output directory (or INEQEST_OUT)");

  // validate
  auto* val = app.add_subcommand("validate", "compare a report against recorded truth");
  std::string val_truth, val_report;
  std::vector<std::string> val_dirs;
  val->add_option("truth", val_truth, "truth file");
  val->add_option("report", val_report, "report file");
  val->add_option("--replicates", val_dirs, "replicate directories with truth.json/report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (check->parsed()) return cmd_check(check_path);
    if (sim->parsed()) {
      sim_cfg.component_count = sim_components;
      sim_cfg.point_mode = sim_point;
      sim_cfg.design = design_kind_from_name(sim_design);
      if (sim->count("--seed")) sim_cfg.seed = sim_seed;
      return cmd_simulate(sim_cfg, sim->count("--seed") > 0, sim_out, sim_reps);
    }
    if (est->parsed()) return cmd_estimate(ea);
    if (val->parsed()) {
      if (val_dirs.empty() && (val_truth.empty() || val_report.empty()))
        throw ValidationError("validate needs TRUTH REPORT arguments or --replicates DIRS");
      return cmd_validate(val_truth, val_report, val_dirs);
    }
  } catch (const InfeasibleError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInfeasible;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const ChainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitValidation;
}
