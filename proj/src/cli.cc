#include "dramatic/cli.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <Eigen/Core>

#include "dramatic/dataset.h"
#include "dramatic/errors.h"
#include "dramatic/inference.h"
#include "dramatic/params.h"
#include "dramatic/pipeline.h"
#include "dramatic/rng.h"
#include "dramatic/sim.h"

namespace dramatic {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr std::uint64_t kTruthStream = 0x7275746855ULL;

class UsageError : public Error {
 public:
  using Error::Error;
};

// Option values resolved from flags, then the parameter file, then defaults.
class Settings {
 public:
  void SetFlag(const std::string& key, const std::string& value) { flags_[key] = value; }
  void LoadParams(const std::string& path, const std::vector<std::string>& allowed) {
    params_ = ParamFile::Load(path);
    params_.CheckKeys(allowed);
  }

  std::optional<std::string> Raw(const std::string& key) const {
    if (auto it = flags_.find(key); it != flags_.end()) return it->second;
    return params_.GetString(key);
  }
  std::string String(const std::string& key, const std::string& fallback) const {
    return Raw(key).value_or(fallback);
  }
  double Double(const std::string& key, double fallback) const {
    auto raw = Raw(key);
    if (!raw) return fallback;
    const std::vector<double> v = ParseDoubleList(*raw);
    if (v.size() != 1) throw UsageError("option '" + key + "' expects one number");
    return v[0];
  }
  long Int(const std::string& key, long fallback) const {
    const double v = Double(key, static_cast<double>(fallback));
    if (v != std::floor(v)) throw UsageError("option '" + key + "' expects an integer");
    return static_cast<long>(v);
  }
  std::vector<double> List(const std::string& key, std::vector<double> fallback) const {
    auto raw = Raw(key);
    return raw ? ParseDoubleList(*raw) : fallback;
  }
  bool Has(const std::string& key) const { return Raw(key).has_value(); }

  ordered_json Resolved() const {
    std::map<std::string, std::string> merged = params_.values();
    for (const auto& [k, v] : flags_) merged[k] = v;
    ordered_json out = ordered_json::object();
    for (const auto& [k, v] : merged) out[k] = v;
    return out;
  }

 private:
  std::map<std::string, std::string> flags_;
  ParamFile params_;
};

ordered_json Certificate(const NuisanceFit& fit) {
  return {{"lambda", fit.lambda},
          {"kkt_residual", fit.kkt_residual},
          {"objective", fit.objective},
          {"iterations", fit.iterations}};
}

std::string Num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw ValidationError("failed writing " + path.string());
}

void WriteJson(const fs::path& path, const ordered_json& j) { WriteText(path, j.dump(2) + "\n"); }

struct Context {
  std::string command;
  std::vector<std::string> replay_args;  // arguments without --out
  fs::path out_dir;
  Settings settings;
  ordered_json manifest;
};

ordered_json BaseManifest(const Context& ctx, std::uint64_t seed) {
  ordered_json m;
  m["command"] = ctx.command;
  m["args"] = ctx.replay_args;
  m["seed"] = seed;
  m["versions"] = {{"dramatic", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  m["parameters"] = ctx.settings.Resolved();
  return m;
}

PipelineOptions PipelineFrom(const Settings& s, bool fit_roc) {
  PipelineOptions opt;
  opt.cv_folds = static_cast<int>(s.Int("cv_folds", 5));
  if (s.Has("lambda_alpha")) opt.lambda_alpha = s.Double("lambda_alpha", 0.0);
  if (s.Has("lambda_gamma")) opt.lambda_gamma = s.Double("lambda_gamma", 0.0);
  if (s.Has("kappa")) opt.kappa = s.Double("kappa", 1.0);
  opt.n_min = static_cast<int>(s.Int("n_min", 0));
  opt.fit_roc = fit_roc;
  opt.max_points = static_cast<int>(s.Int("max_points", 0));
  opt.seed = static_cast<std::uint64_t>(s.Int("seed", 0));
  opt.threads = static_cast<unsigned>(s.Int("threads", 0));
  if (opt.cv_folds < 2) throw UsageError("--cv-folds must be at least 2");
  return opt;
}

ordered_json TuningJson(const Settings& s, const PipelineResult& r) {
  auto lambda = [&](const char* key, double value) {
    ordered_json j{{"value", value}, {"source", s.Has(key) ? "override" : "cross_validation"}};
    if (auto raw = s.Raw(key)) j["override"] = *raw;
    return j;
  };
  ordered_json t;
  t["lambda_alpha"] = lambda("lambda_alpha", r.lambda_alpha);
  t["lambda_gamma"] = lambda("lambda_gamma", r.lambda_gamma);
  t["kappa"] = {{"value", r.kappa}, {"source", s.Has("kappa") ? "override" : "cross_validation"}};
  if (r.roc) {
    t["roc_kappa"] = r.roc_kappa;
    t["n_min"] = r.n_min;
  }
  return t;
}

Dataset LoadInput(const Settings& s) {
  const std::string path = s.String("data", "");
  if (path.empty()) throw UsageError("--data is required");
  LoadOptions lo;
  lo.standardize_adjustment = s.String("standardize", "true") != "false";
  return LoadDataset(path, lo);
}

ordered_json BetaJson(const Dataset& d, const PipelineResult& r, const ordered_json& manifest) {
  ordered_json j;
  j["manifest"] = manifest;
  j["q"] = d.q();
  ordered_json coords = ordered_json::array();
  for (const CoordinateCalibration& cal : r.beta.per_coordinate) {
    coords.push_back({{"j", cal.j + 1},
                      {"estimate", r.beta.beta[cal.j]},
                      {"preliminary", r.beta.preliminary_beta[cal.j]},
                      {"fallback", cal.fallback},
                      {"kkt_residuals",
                       {{"alpha_pos", cal.alpha_pos.kkt_residual},
                        {"alpha_neg", cal.alpha_neg.kkt_residual},
                        {"gamma_pos", cal.gamma_pos.kkt_residual},
                        {"gamma_neg", cal.gamma_neg.kkt_residual}}},
                      {"lambdas",
                       {{"alpha_pos", cal.alpha_pos.lambda},
                        {"alpha_neg", cal.alpha_neg.lambda},
                        {"gamma_pos", cal.gamma_pos.lambda},
                        {"gamma_neg", cal.gamma_neg.lambda}}}});
  }
  j["beta"] = std::vector<double>(r.beta.beta.data(), r.beta.beta.data() + r.beta.beta.size());
  j["coordinates"] = coords;
  return j;
}

ordered_json NuisanceMetaJson(const Dataset& d, const PipelineResult& r,
                              const ordered_json& manifest) {
  ordered_json j;
  j["manifest"] = manifest;
  j["n"] = d.n();
  j["N"] = d.N();
  j["p"] = d.p();
  j["q"] = d.q();
  j["preliminary"] = {{"alpha", Certificate(r.prelim.alpha)},
                      {"gamma", Certificate(r.prelim.gamma)}};
  ordered_json cals = ordered_json::array();
  for (const CoordinateCalibration& cal : r.beta.per_coordinate) {
    cals.push_back({{"j", cal.j + 1},
                    {"fallback", cal.fallback},
                    {"source_pos", cal.source_pos},
                    {"source_neg", cal.source_neg},
                    {"alpha_pos", Certificate(cal.alpha_pos)},
                    {"alpha_neg", Certificate(cal.alpha_neg)},
                    {"gamma_pos", Certificate(cal.gamma_pos)},
                    {"gamma_neg", Certificate(cal.gamma_neg)}});
  }
  j["beta_calibration"] = cals;
  if (r.roc) {
    ordered_json rc = ordered_json::array();
    for (const RocCalibration& cal : r.roc->per_cutoff) {
      rc.push_back({{"cutoff", cal.cutoff},
                    {"effective", cal.effective},
                    {"alpha", Certificate(cal.alpha)},
                    {"gamma", Certificate(cal.gamma)}});
    }
    j["roc_calibration"] = rc;
  }
  j["notes"] = {
      "sign groups with fewer than 10 source or target rows use an unsplit calibration "
      "weighted by |w| (fallback = true)"};
  return j;
}

int CmdFit(Context& ctx) {
  const Settings& s = ctx.settings;
  const Dataset d = LoadInput(s);
  const PipelineResult r = RunDramatic(d, PipelineFrom(s, false));
  ctx.manifest["tuning"] = TuningJson(s, r);
  fs::create_directories(ctx.out_dir);
  WriteJson(ctx.out_dir / "beta.json", BetaJson(d, r, ctx.manifest));
  WriteJson(ctx.out_dir / "nuisance_meta.json", NuisanceMetaJson(d, r, ctx.manifest));
  return kExitOk;
}

int CmdRoc(Context& ctx) {
  const Settings& s = ctx.settings;
  const Dataset d = LoadInput(s);
  const PipelineResult r = RunDramatic(d, PipelineFrom(s, true));
  const RocEstimate& roc = *r.roc;
  const std::vector<double> u = s.List("u", {0.1, 0.2});
  for (double v : u) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError("--u values must lie in [0,1]");
  }
  ctx.manifest["tuning"] = TuningJson(s, r);
  fs::create_directories(ctx.out_dir);

  std::ostringstream csv;
  csv << "# manifest: " << ctx.manifest.dump() << "\n";
  csv << "c,fpr_raw,tpr_raw,fpr,tpr\n";
  for (std::size_t k = 0; k < roc.curve.c.size(); ++k) {
    csv << Num(roc.curve.c[k]) << ',' << Num(roc.curve.fpr_raw[k]) << ','
        << Num(roc.curve.tpr_raw[k]) << ',' << Num(roc.curve.fpr[k]) << ','
        << Num(roc.curve.tpr[k]) << '\n';
  }
  WriteText(ctx.out_dir / "roc_curve.csv", csv.str());

  ordered_json summary;
  summary["manifest"] = ctx.manifest;
  summary["auc"] = roc.auc;
  ordered_json at = ordered_json::object();
  for (double v : u) at[RocTargetName(v).substr(7)] = RocAt(roc.curve, v);
  summary["roc_at"] = at;
  summary["prevalence"] = roc.prevalence;
  summary["n_min"] = roc.n_min;
  summary["segments"] = roc.segments;
  summary["m"] = roc.cutoffs.size();
  summary["cutoffs"] = roc.cutoffs;
  summary["beta"] = std::vector<double>(r.beta.beta.data(), r.beta.beta.data() + d.q());
  WriteJson(ctx.out_dir / "roc_summary.json", summary);

  if (s.String("no_bootstrap", "false") != "true") {
    BootstrapOptions bo;
    bo.replicates = static_cast<int>(s.Int("bootstrap", 500));
    bo.level = s.Double("level", 0.95);
    bo.seed = static_cast<std::uint64_t>(s.Int("seed", 0));
    bo.u = u;
    bo.threads = static_cast<unsigned>(s.Int("threads", 0));
    bo.max_points = static_cast<int>(s.Int("max_points", 0));
    if (bo.replicates < 100) throw UsageError("--bootstrap must be at least 100");
    if (!(bo.level > 0.0 && bo.level < 1.0)) throw UsageError("--level must lie in (0,1)");
    const BootstrapReport br = MultiplierBootstrap(d, r.beta, &roc, bo);
    ordered_json ci;
    ci["manifest"] = ctx.manifest;
    ci["bootstrap"] = {{"B", br.requested},
                       {"dropped", br.dropped},
                       {"multiplier_law", "exponential(1)"},
                       {"level", bo.level},
                       {"nuisances", "frozen"},
                       {"cutoff_grid", "frozen"}};
    ordered_json results = ordered_json::array();
    for (const BootstrapResult& b : br.results) {
      results.push_back({{"target", b.target},
                         {"method", b.method},
                         {"point", b.point},
                         {"se", b.se},
                         {"ci_lo", b.ci_lo},
                         {"ci_hi", b.ci_hi},
                         {"level", b.level},
                         {"B", b.replicates}});
    }
    ci["results"] = results;
    WriteJson(ctx.out_dir / "ci.json", ci);
  }
  return kExitOk;
}

int CmdSimulate(Context& ctx) {
  const Settings& s = ctx.settings;
  SimConfig cfg;
  try {
    cfg.id = ParseConfigId(s.String("config", "i"));
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  cfg.n = static_cast<int>(s.Int("n", cfg.n));
  cfg.N = static_cast<int>(s.Int("N", cfg.N));
  cfg.p = static_cast<int>(s.Int("p", cfg.p));
  cfg.reps = static_cast<int>(s.Int("reps", cfg.reps));
  cfg.seed = static_cast<std::uint64_t>(s.Int("seed", 1));
  cfg.n_min = static_cast<int>(s.Int("n_min", cfg.n_min));
  cfg.bootstrap = static_cast<int>(s.Int("bootstrap", cfg.bootstrap));
  cfg.level = s.Double("level", cfg.level);
  cfg.u = s.List("u", cfg.u);
  cfg.threads = static_cast<unsigned>(s.Int("threads", 0));
  cfg.max_points = static_cast<int>(s.Int("max_points", 0));
  const int truth_draws = static_cast<int>(s.Int("truth_draws", 1000000));
  cfg.Validate();

  const GroundTruth truth =
      ComputeGroundTruth(cfg.id, truth_draws, CounterRng(cfg.seed).Split(kTruthStream)());
  ctx.manifest["truth"] = {{"draws", truth.draws},
                           {"beta0", std::vector<double>(truth.beta0.data(),
                                                         truth.beta0.data() + truth.beta0.size())},
                           {"auc0", truth.auc0},
                           {"mu0", truth.mu0}};
  BenchmarkReport report;
  std::string failure;
  try {
    report = RunBenchmark(cfg, truth);
  } catch (const EstimationError& e) {
    failure = e.what();
  }
  fs::create_directories(ctx.out_dir);
  const std::string header = "# manifest: " + ctx.manifest.dump() + "\n";
  if (!failure.empty()) {
    throw EstimationError(failure);
  }
  WriteText(ctx.out_dir / "benchmark.csv", header + BenchmarkCsv(report));
  WriteText(ctx.out_dir / "benchmark.txt", header + BenchmarkTable(report));
  WriteText(ctx.out_dir / "reps.log", header + BenchmarkRepLog(report));
  std::cout << BenchmarkTable(report);
  return kExitOk;
}

int CmdReport(Context& ctx) {
  const std::string in_path = ctx.settings.String("in", "");
  if (in_path.empty()) throw UsageError("--in is required");
  std::ifstream in(in_path);
  if (!in) throw ValidationError("cannot open " + in_path);
  std::ostringstream table;
  std::string line;
  bool header_seen = false;
  char buf[160];
  table << "# manifest: " << ctx.manifest.dump() << "\n";
  std::snprintf(buf, sizeof(buf), "%-10s %-12s %10s %10s %8s\n", "method", "target", "bias",
                "rmse", "cp");
  table << buf;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "method,target,bias,rmse,cp") {
        throw ValidationError("not a benchmark CSV: " + in_path);
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 5) throw ValidationError("malformed benchmark row: " + line);
    std::snprintf(buf, sizeof(buf), "%-10s %-12s %10s %10s %8s\n", f[0].c_str(), f[1].c_str(),
                  f[2].c_str(), f[3].c_str(), f[4].c_str());
    table << buf;
  }
  fs::create_directories(ctx.out_dir);
  WriteText(ctx.out_dir / "report.txt", table.str());
  std::cout << table.str();
  return kExitOk;
}

int ErrorExit(const Context& ctx, const std::string& kind, const std::string& message,
              int code) {
  ordered_json err;
  err["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
  if (!ctx.manifest.is_null()) err["manifest"] = ctx.manifest;
  std::cerr << err.dump() << std::endl;
  if (!ctx.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (!ec) {
      std::ofstream out(ctx.out_dir / "error.json");
      out << err.dump(2) << "\n";
    }
  }
  return code;
}

const std::vector<std::string> kParamKeys = {
    "data",   "seed",      "n_min",    "cv_folds",  "bootstrap",   "level",
    "u",      "lambda_alpha", "lambda_gamma", "kappa", "threads",  "reps",
    "config", "n",         "N",        "p",         "truth_draws", "max_points",
    "no_bootstrap", "standardize", "in"};

}  // namespace

int RunCli(const std::vector<std::string>& args) {
  Context ctx;
  CLI::App app{"Doubly robust transfer estimation of logistic risk models and ROC accuracy"};
  app.set_version_flag("--version", std::string("dramatic ") + kVersion);
  app.require_subcommand(1);

  std::map<std::string, std::string> values;
  std::string out_dir = "out";
  std::string params_path;
  std::string manifest_path;
  bool no_bootstrap = false;
  bool no_standardize = false;

  auto add_value = [&](CLI::App* sub, const std::string& flag, const std::string& key,
                       const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&values, key](const std::string& v) { values[key] = v; }, help);
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--params", params_path, "Parameter file of key = value lines");
    add_value(sub, "--seed", "seed", "Master random seed");
    add_value(sub, "--threads", "threads", "Worker cap (0 = all cores)");
  };

  CLI::App* fit = app.add_subcommand("fit", "Estimate beta with calibrated nuisances");
  CLI::App* roc = app.add_subcommand("roc", "Estimate ROC/AUC with bootstrap intervals");
  for (CLI::App* sub : {fit, roc}) {
    add_common(sub);
    add_value(sub, "--data", "data", "Input CSV (s,y,a_2..,w_1..)");
    add_value(sub, "--cv-folds", "cv_folds", "Cross-validation folds (default 5)");
    add_value(sub, "--lambda-alpha", "lambda_alpha", "Fixed preliminary density-ratio lambda");
    add_value(sub, "--lambda-gamma", "lambda_gamma", "Fixed preliminary imputation lambda");
    add_value(sub, "--kappa", "kappa", "Fixed calibration constant");
    sub->add_flag("--no-standardize", no_standardize, "Keep adjustment columns unscaled");
  }
  add_value(roc, "--n-min", "n_min", "Calibration segment size");
  add_value(roc, "--bootstrap", "bootstrap", "Bootstrap replicates (default 500)");
  add_value(roc, "--level", "level", "Confidence level (default 0.95)");
  add_value(roc, "--u", "u", "Comma-separated FPR values (default 0.1,0.2)");
  add_value(roc, "--max-points", "max_points", "Cap on curve evaluation points");
  roc->add_flag("--no-bootstrap", no_bootstrap, "Skip the bootstrap and ci.json");

  CLI::App* sim = app.add_subcommand("simulate", "Run the simulation benchmark");
  add_common(sim);
  add_value(sim, "--config", "config", "Generator preset: i, ii or iii");
  add_value(sim, "--reps", "reps", "Repetitions (default 200)");
  add_value(sim, "--n", "n", "Source size (default 600)");
  add_value(sim, "--N", "N", "Target size (default 3000)");
  add_value(sim, "--p", "p", "Adjustment covariates (default 100)");
  add_value(sim, "--n-min", "n_min", "Calibration segment size (default 120)");
  add_value(sim, "--bootstrap", "bootstrap", "Bootstrap replicates per rep (default 500)");
  add_value(sim, "--level", "level", "Confidence level (default 0.95)");
  add_value(sim, "--u", "u", "Comma-separated FPR values (default 0.1,0.2)");
  add_value(sim, "--truth-draws", "truth_draws", "Ground-truth sample size (default 1e6)");
  add_value(sim, "--max-points", "max_points", "Cap on curve evaluation points");

  CLI::App* report = app.add_subcommand("report", "Render a benchmark CSV as a table");
  report->add_option("--out", out_dir, "Output directory")->capture_default_str();
  add_value(report, "--in", "in", "Benchmark CSV");

  CLI::App* rerun = app.add_subcommand("rerun", "Re-run a command from its manifest");
  rerun->add_option("--manifest", manifest_path, "Output file with an embedded manifest")
      ->required();
  rerun->add_option("--out", out_dir, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (rerun->parsed()) {
    try {
      ordered_json m;
      std::ifstream in(manifest_path);
      if (!in) throw ValidationError("cannot open " + manifest_path);
      std::string first;
      std::getline(in, first);
      if (first.rfind("# manifest: ", 0) == 0) {
        m = ordered_json::parse(first.substr(12))["args"];
      } else {
        in.seekg(0);
        m = ordered_json::parse(in)["manifest"]["args"];
      }
      std::vector<std::string> replay = m.get<std::vector<std::string>>();
      replay.push_back("--out");
      replay.push_back(out_dir);
      return RunCli(replay);
    } catch (const std::exception& e) {
      return ErrorExit(ctx, "input", e.what(), kExitInput);
    }
  }

  for (CLI::App* sub : {fit, roc, sim, report}) {
    if (sub->parsed()) ctx.command = sub->get_name();
  }
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--out" && k + 1 < args.size()) {
      ++k;
      continue;
    }
    if (args[k].rfind("--out=", 0) == 0) continue;
    ctx.replay_args.push_back(args[k]);
  }
  ctx.out_dir = out_dir;
  if (no_bootstrap) values["no_bootstrap"] = "true";
  if (no_standardize) values["standardize"] = "false";
  for (const auto& [k, v] : values) ctx.settings.SetFlag(k, v);

  try {
    if (!params_path.empty()) ctx.settings.LoadParams(params_path, kParamKeys);
    ctx.manifest = BaseManifest(ctx, static_cast<std::uint64_t>(ctx.settings.Int(
                                         "seed", ctx.command == "simulate" ? 1 : 0)));
    if (ctx.settings.Has("data")) ctx.manifest["dataset"] = ctx.settings.String("data", "");
    if (ctx.command == "fit") return CmdFit(ctx);
    if (ctx.command == "roc") return CmdRoc(ctx);
    if (ctx.command == "simulate") return CmdSimulate(ctx);
    return CmdReport(ctx);
  } catch (const UsageError& e) {
    return ErrorExit(ctx, "usage", e.what(), kExitUsage);
  } catch (const ParseError& e) {
    return ErrorExit(ctx, "parse", e.what(), kExitInput);
  } catch (const ValidationError& e) {
    return ErrorExit(ctx, "validation", e.what(), kExitInput);
  } catch (const SolverError& e) {
    return ErrorExit(ctx, "solver", e.what(), kExitEstimation);
  } catch (const EstimationError& e) {
    return ErrorExit(ctx, "estimation", e.what(), kExitEstimation);
  } catch (const std::exception& e) {
    return ErrorExit(ctx, "internal", e.what(), kExitEstimation);
  }
}

}  // namespace dramatic
