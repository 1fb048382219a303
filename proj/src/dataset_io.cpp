#include "ineq/dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ineq/censoring.hpp"
#include "ineq/errors.hpp"
#include "ineq/version.hpp"

namespace ineq {

namespace {

using json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr const char* kDatasetSchema = "ineq.dataset.v1";
constexpr const char* kTruthSchema = "ineq.truth.v1";
constexpr const char* kManifestSchema = "ineq.manifest.v1";
constexpr const char* kReportSchema = "ineq.report.v1";
constexpr const char* kSweepSchema = "ineq.sweeplog.v1";
constexpr const char* kSeriesSchema = "ineq.series.v1";

[[noreturn]] void fail(const std::string& path, int line, const std::string& msg) {
  throw ValidationError(path + ":" + std::to_string(line) + ": " + msg);
}

// Currency amounts and exact counts print as integers; everything else keeps
// the shortest round-trip double form.
json to_num(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) <= 9.0e15)
    return json(static_cast<std::int64_t>(v));
  return json(v);
}

double as_number(const json& j, const std::string& path, int line, const char* field) {
  if (!j.is_number()) fail(path, line, std::string(field) + " must be a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path, int line, const char* field) {
  if (!j.is_number_integer()) fail(path, line, std::string(field) + " must be an integer");
  return j.get<int>();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << bytes;
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

json interval_json(const Interval& b) {
  json j = json::array();
  j.push_back(to_num(b.lo));
  if (std::isfinite(b.hi)) j.push_back(to_num(b.hi));
  else j.push_back(nullptr);
  return j;
}

Interval parse_interval(const json& j, const std::string& path, int line, const char* field) {
  if (!j.is_array() || j.size() != 2)
    fail(path, line, std::string(field) + " must be [lower, upper-or-null]");
  Interval b;
  b.lo = as_number(j[0], path, line, field);
  b.hi = j[1].is_null() ? kInf : as_number(j[1], path, line, field);
  return b;
}

json manifest_to_json(const RunManifest& m, bool with_created, bool with_hash) {
  json j;
  j["schema"] = kManifestSchema;
  j["software_version"] = m.software_version.empty() ? std::string(kVersion) : m.software_version;
  j["component_count"] = m.component_count;
  j["dataset_hash"] = m.dataset_hash;
  j["seed"] = m.seed;
  j["chains"] = m.chains;
  j["iterations"] = m.iterations;
  j["burn_in"] = m.burn_in;
  j["alpha"] = m.alpha;
  j["variance_mode"] = m.variance_mode;
  j["cap"] = to_num(m.cap);
  j["tax_threshold"] = to_num(m.tax_threshold);
  j["summaries"] = m.summaries;
  if (with_hash) j["config_hash"] = m.config_hash();
  if (with_created) j["created"] = m.created;
  return j;
}

RunManifest manifest_from_json(const json& j, const std::string& path) {
  RunManifest m;
  try {
    m.software_version = j.at("software_version").get<std::string>();
    m.component_count = j.at("component_count").get<int>();
    m.dataset_hash = j.at("dataset_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.chains = j.at("chains").get<int>();
    m.iterations = j.at("iterations").get<int>();
    m.burn_in = j.at("burn_in").get<int>();
    m.alpha = j.at("alpha").get<double>();
    m.variance_mode = j.at("variance_mode").get<std::string>();
    m.cap = j.at("cap").get<double>();
    m.tax_threshold = j.at("tax_threshold").get<double>();
    m.summaries = j.at("summaries").get<std::vector<std::string>>();
    if (j.contains("created") && j["created"].is_string())
      m.created = j["created"].get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed manifest: " + e.what());
  }
  return m;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string file_hash(const std::string& path) { return fnv1a64_hex(read_file(path)); }

std::string RunManifest::config_hash() const {
  return fnv1a64_hex(manifest_to_json(*this, false, false).dump());
}

DatasetFile read_dataset(const std::string& path) {
  const std::string raw = read_file(path);
  DatasetFile out;
  out.hash = fnv1a64_hex(raw);

  std::istringstream in(raw);
  std::string linebuf;
  int line = 0;
  bool have_header = false;
  Dataset& ds = out.dataset;

  while (std::getline(in, linebuf)) {
    ++line;
    if (linebuf.empty()) continue;
    json j;
    try {
      j = json::parse(linebuf);
    } catch (const json::exception& e) {
      fail(path, line, std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(path, line, "expected a JSON object");

    if (!have_header) {
      if (!j.contains("schema") || !j["schema"].is_string() ||
          j["schema"].get<std::string>() != kDatasetSchema)
        fail(path, line, std::string("first line must declare schema ") + kDatasetSchema);
      ds.component_count = as_int(j.at("component_count"), path, line, "component_count");
      if (ds.component_count != 4 && ds.component_count != 5)
        fail(path, line, "component_count must be 4 or 5");
      ds.cap = as_number(j.at("cap"), path, line, "cap");
      ds.tax_threshold = as_number(j.at("tax_threshold"), path, line, "tax_threshold");
      if (!j.contains("design") || !j["design"].is_string())
        fail(path, line, "design must be a string");
      try {
        ds.design.kind = design_kind_from_name(j["design"].get<std::string>());
      } catch (const ValidationError& e) {
        fail(path, line, e.what());
      }
      if (j.contains("calibration_totals") && !j["calibration_totals"].is_null()) {
        if (!j["calibration_totals"].is_array())
          fail(path, line, "calibration_totals must be an array");
        std::vector<double> totals;
        for (const auto& t : j["calibration_totals"])
          totals.push_back(as_number(t, path, line, "calibration_totals"));
        ds.calibration_totals = std::move(totals);
      }
      have_header = true;
      continue;
    }

    const int cc = ds.component_count;
    HouseholdRecord r;
    if (!j.contains("id") || !j["id"].is_string()) fail(path, line, "id must be a string");
    r.id = j["id"].get<std::string>();
    r.weight = as_number(j.at("weight"), path, line, "weight");
    r.stratum = as_int(j.at("stratum"), path, line, "stratum");
    r.psu = as_int(j.at("psu"), path, line, "psu");

    const auto& jh = j.at("holdings");
    if (!jh.is_array() || jh.size() != static_cast<std::size_t>(cc))
      fail(path, line, "holdings must list one flag per component");
    std::array<bool, kMaxComponents> flags{};
    for (int l = 0; l < cc; ++l) {
      const auto& f = jh[static_cast<std::size_t>(l)];
      if (f.is_boolean()) flags[static_cast<std::size_t>(l)] = f.get<bool>();
      else if (f.is_number_integer()) flags[static_cast<std::size_t>(l)] = f.get<int>() != 0;
      else fail(path, line, "holdings flags must be 0/1");
    }
    try {
      r.holdings = HoldingsVector(flags, cc);
    } catch (const ValidationError& e) {
      fail(path, line, std::string("holdings: ") + e.what());
    }

    const auto& js = j.at("shares");
    if (!js.is_array() || js.size() != static_cast<std::size_t>(cc))
      fail(path, line, "shares must list one value per component");
    for (int l = 0; l < cc; ++l)
      r.share[static_cast<std::size_t>(l)] =
          as_number(js[static_cast<std::size_t>(l)], path, line, "shares");

    const auto& jc = j.at("covariates");
    if (!jc.is_array() || jc.size() != static_cast<std::size_t>(cc))
      fail(path, line, "covariates must list one row (or null) per component");
    for (int l = 0; l < cc; ++l) {
      const auto& row = jc[static_cast<std::size_t>(l)];
      if (row.is_null()) continue;
      if (!row.is_array()) fail(path, line, "covariate rows must be arrays");
      auto& dst = r.covariates[static_cast<std::size_t>(l)];
      for (const auto& v : row) dst.push_back(as_number(v, path, line, "covariates"));
    }

    const auto& jb = j.at("bounds");
    if (!jb.is_array() || jb.size() != static_cast<std::size_t>(cc))
      fail(path, line, "bounds must list one interval (or null) per component");
    for (int l = 0; l < cc; ++l) {
      const auto& b = jb[static_cast<std::size_t>(l)];
      if (b.is_null()) continue;
      r.evidence.component_bounds[static_cast<std::size_t>(l)] =
          parse_interval(b, path, line, "bounds");
    }

    if (j.contains("total_bracket") && !j["total_bracket"].is_null())
      r.evidence.total_bracket = parse_interval(j["total_bracket"], path, line, "total_bracket");

    if (j.contains("tax") && !j["tax"].is_null()) {
      const auto& jt = j["tax"];
      if (!jt.is_object()) fail(path, line, "tax must be an object");
      WealthTaxEvidence tax;
      if (!jt.contains("pays") || !jt["pays"].is_boolean())
        fail(path, line, "tax.pays must be a boolean");
      tax.pays_tax = jt["pays"].get<bool>();
      tax.debt = as_number(jt.at("debt"), path, line, "tax.debt");
      tax.nd_min = as_number(jt.at("nd_min"), path, line, "tax.nd_min");
      tax.nd_max = as_number(jt.at("nd_max"), path, line, "tax.nd_max");
      if (!jt.contains("maybe_nondeductible") || !jt["maybe_nondeductible"].is_boolean())
        fail(path, line, "tax.maybe_nondeductible must be a boolean");
      tax.maybe_nondeductible = jt["maybe_nondeductible"].get<bool>();
      r.evidence.tax = tax;
    }

    if (j.contains("aux") && !j["aux"].is_null()) {
      if (!j["aux"].is_array()) fail(path, line, "aux must be an array");
      for (const auto& v : j["aux"]) r.aux.push_back(as_number(v, path, line, "aux"));
    }

    ds.households.push_back(std::move(r));
    out.record_lines.push_back(line);
  }

  if (!have_header) throw ValidationError(path + ": empty file, expected a dataset header");

  try {
    validate_dataset(ds);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }

  for (std::size_t k = 0; k < ds.households.size(); ++k) {
    const auto& r = ds.households[k];
    const int rline = out.record_lines[k];
    try {
      build_domain(r.evidence, r.holdings.flags(), r.share, ds.component_count,
                   ds.tax_threshold, ds.cap);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError(path + ":" + std::to_string(rline) + " (household " + r.id +
                            "): " + e.what());
    } catch (const ValidationError& e) {
      fail(path, rline, "household " + r.id + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::string& path, const Dataset& ds) {
  validate_dataset(ds);
  std::ostringstream out;
  const int cc = ds.component_count;

  json header;
  header["schema"] = kDatasetSchema;
  header["component_count"] = cc;
  header["cap"] = to_num(ds.cap);
  header["tax_threshold"] = to_num(ds.tax_threshold);
  header["design"] = design_kind_name(ds.design.kind);
  if (ds.calibration_totals) {
    json t = json::array();
    for (double v : *ds.calibration_totals) t.push_back(to_num(v));
    header["calibration_totals"] = t;
  } else {
    header["calibration_totals"] = nullptr;
  }
  out << header.dump() << '\n';

  for (const auto& r : ds.households) {
    json j;
    j["id"] = r.id;
    j["weight"] = r.weight;
    j["stratum"] = r.stratum;
    j["psu"] = r.psu;
    json jh = json::array(), js = json::array(), jc = json::array(), jb = json::array();
    for (int l = 0; l < cc; ++l) {
      const auto li = static_cast<std::size_t>(l);
      jh.push_back(r.holdings.holds(l) ? 1 : 0);
      js.push_back(json(r.share[li]));
      if (r.holdings.holds(l)) {
        json row = json::array();
        for (double v : r.covariates[li]) row.push_back(json(v));
        jc.push_back(row);
      } else {
        jc.push_back(nullptr);
      }
      if (r.evidence.component_bounds[li])
        jb.push_back(interval_json(*r.evidence.component_bounds[li]));
      else
        jb.push_back(nullptr);
    }
    j["holdings"] = jh;
    j["shares"] = js;
    j["covariates"] = jc;
    j["bounds"] = jb;
    j["total_bracket"] =
        r.evidence.total_bracket ? interval_json(*r.evidence.total_bracket) : json(nullptr);
    if (r.evidence.tax) {
      json jt;
      jt["pays"] = r.evidence.tax->pays_tax;
      jt["debt"] = to_num(r.evidence.tax->debt);
      jt["nd_min"] = to_num(r.evidence.tax->nd_min);
      jt["nd_max"] = to_num(r.evidence.tax->nd_max);
      jt["maybe_nondeductible"] = r.evidence.tax->maybe_nondeductible;
      j["tax"] = jt;
    } else {
      j["tax"] = nullptr;
    }
    if (!r.aux.empty()) {
      json ja = json::array();
      for (double v : r.aux) ja.push_back(json(v));
      j["aux"] = ja;
    }
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

void write_truth(const std::string& path, const TruthFile& t) {
  json j;
  j["schema"] = kTruthSchema;
  j["dataset_hash"] = t.dataset_hash;
  j["seed"] = t.seed;
  j["population_size"] = t.population_size;
  json rows = json::array();
  for (const auto& e : t.entries) {
    json row;
    row["summary"] = e.spec.label();
    row["value"] = e.value;
    rows.push_back(row);
  }
  j["summaries"] = rows;
  write_file(path, j.dump(2) + "\n");
}

TruthFile read_truth(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": not valid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || j["schema"] != kTruthSchema)
    throw ValidationError(path + ": expected schema " + std::string(kTruthSchema));
  TruthFile t;
  try {
    t.dataset_hash = j.at("dataset_hash").get<std::string>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.population_size = j.at("population_size").get<int>();
    for (const auto& row : j.at("summaries")) {
      TruthEntry e;
      e.spec = SummarySpec::parse(row.at("summary").get<std::string>());
      e.value = row.at("value").get<double>();
      t.entries.push_back(e);
    }
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed truth file: " + e.what());
  }
  return t;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  write_file(path, manifest_to_json(m, true, true).dump(2) + "\n");
}

void write_report(const std::string& path, const InferenceResult& res, const RunManifest& m) {
  json j;
  j["schema"] = kReportSchema;
  j["manifest"] = manifest_to_json(m, false, true);
  j["alpha"] = res.alpha;
  j["total_sweeps"] = res.total_sweeps;
  j["burn_in"] = res.burn_in;
  j["draws_used"] = res.n_used;
  j["chains"] = res.chains;
  json rows = json::array();
  for (const auto& r : res.rows) {
    json row;
    row["summary"] = r.spec.label();
    row["lower"] = r.lower;
    row["prediction"] = r.prediction;
    row["upper"] = r.upper;
    row["posterior_sd"] = r.posterior_sd;
    row["prediction_mcse"] = r.prediction_mcse;
    row["ess"] = r.convergence.ess;
    row["split_delta"] = r.convergence.split_delta;
    row["tail_slope"] = r.convergence.tail_slope;
    row["drift"] = r.convergence.drift_flag;
    rows.push_back(row);
  }
  j["rows"] = rows;
  write_file(path, j.dump(2) + "\n");
}

ReportFile read_report(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": not valid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || j["schema"] != kReportSchema)
    throw ValidationError(path + ": expected schema " + std::string(kReportSchema));
  ReportFile rf;
  rf.manifest = manifest_from_json(j.at("manifest"), path);
  try {
    rf.alpha = j.at("alpha").get<double>();
    for (const auto& row : j.at("rows")) {
      ReportRow r;
      r.spec = SummarySpec::parse(row.at("summary").get<std::string>());
      r.lower = row.at("lower").get<double>();
      r.prediction = row.at("prediction").get<double>();
      r.upper = row.at("upper").get<double>();
      r.posterior_sd = row.at("posterior_sd").get<double>();
      r.prediction_mcse = row.at("prediction_mcse").get<double>();
      r.ess = row.at("ess").get<double>();
      r.drift = row.at("drift").get<bool>();
      rf.rows.push_back(r);
    }
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed report: " + e.what());
  }
  return rf;
}

void write_sweep_log(const std::string& path, const std::vector<ChainOutput>& chains,
                     const RunManifest& m) {
  std::ostringstream out;
  json header;
  header["schema"] = kSweepSchema;
  header["manifest"] = manifest_to_json(m, false, true);
  json labels = json::array();
  if (!chains.empty())
    for (const auto& s : chains.front().summaries) labels.push_back(s.label());
  header["summaries"] = labels;
  out << header.dump() << '\n';

  for (std::size_t c = 0; c < chains.size(); ++c) {
    const ChainOutput& co = chains[c];
    for (std::size_t t = 0; t < co.sweeps.size(); ++t) {
      json j;
      j["chain"] = static_cast<int>(c);
      j["sweep"] = static_cast<int>(t + 1);
      j["e"] = co.e[t];
      json g = json::array(), v = json::array();
      for (const auto& rec : co.sweeps[t]) {
        g.push_back(json(rec.ghat));
        v.push_back(json(rec.vhat));
      }
      j["ghat"] = g;
      j["vhat"] = v;
      out << j.dump() << '\n';
    }
  }
  write_file(path, out.str());
}

void write_series(const std::string& path, const InferenceResult& res, const RunManifest& m) {
  std::ostringstream out;
  json header;
  header["schema"] = kSeriesSchema;
  header["manifest"] = manifest_to_json(m, false, true);
  out << header.dump() << '\n';
  for (const auto& r : res.rows) {
    json j;
    j["summary"] = r.spec.label();
    json pts = json::array();
    for (const auto& [sweep, value] : r.convergence.running_mean) {
      json p = json::array();
      p.push_back(sweep);
      p.push_back(json(value));
      pts.push_back(p);
    }
    j["points"] = pts;
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

std::string now_rfc3339() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace ineq
