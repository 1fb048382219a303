#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ineq/data_model.hpp"
#include "ineq/gibbs.hpp"
#include "ineq/inference.hpp"

namespace ineq {

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);  // "fnv1a64:%016x"
std::string file_hash(const std::string& path);

struct DatasetFile {
  Dataset dataset;
  std::string hash;                // of the raw file bytes
  std::vector<int> record_lines;   // file line per household, aligned
};

// Line-delimited ingestion: a header line then one record per line. Every
// structural problem is reported as path:line with the offending field; all
// domains are built and feasibility-checked before the dataset is returned.
DatasetFile read_dataset(const std::string& path);

void write_dataset(const std::string& path, const Dataset& ds);

struct TruthEntry {
  SummarySpec spec;
  double value = 0.0;
};

struct TruthFile {
  std::string dataset_hash;
  std::uint64_t seed = 0;
  int population_size = 0;
  std::vector<TruthEntry> entries;
};

void write_truth(const std::string& path, const TruthFile& t);
TruthFile read_truth(const std::string& path);

// Run identity embedded in every output file. `created` is stamped only into
// the standalone manifest file and never hashed, so reruns are byte-stable.
struct RunManifest {
  std::string software_version;
  std::string dataset_hash;
  int component_count = 5;
  std::uint64_t seed = 1;
  int chains = 1;
  int iterations = 20000;
  int burn_in = 1000;
  double alpha = 0.1;
  std::string variance_mode = "linearization";
  double cap = kDefaultCap;
  double tax_threshold = kDefaultTaxThreshold;
  std::vector<std::string> summaries;
  std::string created;

  std::string config_hash() const;
};

void write_manifest(const std::string& path, const RunManifest& m);

struct ReportRow {
  SummarySpec spec;
  double lower = 0.0;
  double prediction = 0.0;
  double upper = 0.0;
  double posterior_sd = 0.0;
  double prediction_mcse = 0.0;
  double ess = 0.0;
  bool drift = false;
};

struct ReportFile {
  RunManifest manifest;
  double alpha = 0.1;
  std::vector<ReportRow> rows;
};

void write_report(const std::string& path, const InferenceResult& res, const RunManifest& m);
ReportFile read_report(const std::string& path);

void write_sweep_log(const std::string& path, const std::vector<ChainOutput>& chains,
                     const RunManifest& m);

// Running posterior-mean series per summary, for convergence plots.
void write_series(const std::string& path, const InferenceResult& res, const RunManifest& m);

std::string now_rfc3339();

}  // namespace ineq
