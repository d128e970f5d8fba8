// Copyright 2026 The dppkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dppkit/cli.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dppkit/diversity.hpp"
#include "dppkit/dpp.hpp"
#include "dppkit/errors.hpp"
#include "dppkit/features.hpp"
#include "dppkit/kernels.hpp"
#include "dppkit/parallel.hpp"
#include "dppkit/rng.hpp"
#include "dppkit/select.hpp"
#include "dppkit/sketch.hpp"
#include "dppkit/toymodel.hpp"
#include "json.hpp"

namespace dppkit {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

LogLevel parse_log_level(const std::string& s) {
  if (s == "error") return LogLevel::kError;
  if (s == "warn") return LogLevel::kWarn;
  if (s == "info") return LogLevel::kInfo;
  if (s == "debug") return LogLevel::kDebug;
  throw ValidationError(fmt::format("unknown log level '{}'", s));
}

struct Globals {
  int threads = default_threads();
  std::string log_level = "warn";
  std::string out_dir;
};

class Context {
 public:
  Context(const Globals& g, std::vector<std::string> args, std::string command)
      : g_(g), level_(parse_log_level(g.log_level)), args_(std::move(args)),
        command_(std::move(command)) {}

  int threads() const { return g_.threads; }

  // Relative outputs land under --out-dir when it is given.
  fs::path out(const std::string& p) const {
    fs::path path(p);
    if (!g_.out_dir.empty() && path.is_relative()) path = fs::path(g_.out_dir) / path;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    return path;
  }

  void log(LogLevel level, const std::string& msg) const {
    static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
    if (level <= level_) {
      std::cerr << "dppkit: " << kNames[static_cast<int>(level)] << ": " << msg << '\n';
    }
  }

  // Writes `<output>.config.json` next to an output.
  void echo(const fs::path& output, const ojson& params) const {
    ojson j;
    j["tool"] = "dppkit";
    j["version"] = std::string(kVersion);
    j["command"] = command_;
    j["argv"] = args_;
    j["cwd"] = fs::current_path().string();
    j["rng"] = std::string(Rng::kAlgorithm);
    j["threads"] = g_.threads;
    j["params"] = params;
    const fs::path path = output.string() + ".config.json";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
    f << j.dump(2) << '\n';
    if (!f) throw IoError(fmt::format("write failed for '{}'", path.string()));
    log(LogLevel::kInfo, fmt::format("wrote {}", path.string()));
  }

 private:
  Globals g_;
  LogLevel level_;
  std::vector<std::string> args_;
  std::string command_;
};

ojson kernel_json(const KernelSpec& k) {
  return {{"kind", std::string(to_string(k.kind))},
          {"gamma", k.gamma},
          {"assume_unit_rows", k.assume_unit_rows},
          {"scale", k.scale}};
}

// ---- synth

struct SynthArgs {
  std::string kind = "hypersphere";
  std::size_t n = 0, d = 0, clusters = 8, dup = 1;
  double intra = 0.1;
  std::uint64_t seed = 0;
  std::string out;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--kind", a.kind, "hypersphere | clustered | duplicated")->capture_default_str();
  app.add_option("-n,--n", a.n, "number of rows")->required();
  app.add_option("-d,--d", a.d, "dimension")->required();
  app.add_option("--clusters", a.clusters, "clusters (clustered)")->capture_default_str();
  app.add_option("--intra-scale", a.intra, "within-cluster spread (clustered)")
      ->capture_default_str();
  app.add_option("--dup", a.dup, "copies per distinct row (duplicated)")->capture_default_str();
  app.add_option("--seed", a.seed, "random seed")->capture_default_str();
  app.add_option("-o,--out", a.out, "output feature file (DSF1)")->required();
}

int cmd_synth(const Context& ctx, const SynthArgs& a) {
  SynthSpec spec;
  spec.kind = parse_synth_kind(a.kind);
  spec.n = a.n;
  spec.d = a.d;
  spec.n_clusters = a.clusters;
  spec.intra_cluster_scale = a.intra;
  spec.dup_factor = a.dup;
  spec.seed = a.seed;
  spec.validate();
  const FeatureMatrix m = synthesize(spec);
  const fs::path out = ctx.out(a.out);
  save_features(m, out);
  ctx.echo(out, {{"kind", std::string(to_string(spec.kind))},
                 {"n", spec.n},
                 {"d", spec.d},
                 {"n_clusters", spec.n_clusters},
                 {"intra_cluster_scale", spec.intra_cluster_scale},
                 {"dup_factor", spec.dup_factor},
                 {"seed", spec.seed},
                 {"normalized", m.normalized()}});
  return kExitOk;
}

// ---- toy

struct ToyArgs {
  std::size_t n = 0, vocab = 64, fdim = 16;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> model_seed;
  double redundancy = 0.5, weight_scale = 0.5;
  std::string out;
};

void add_toy(CLI::App& app, ToyArgs& a) {
  app.add_option("-n,--n", a.n, "number of examples")->required();
  app.add_option("--seed", a.seed, "corpus seed")->capture_default_str();
  app.add_option("--redundancy", a.redundancy, "near-duplicate fraction in [0, 1]")
      ->capture_default_str();
  app.add_option("--vocab", a.vocab, "vocabulary size")->capture_default_str();
  app.add_option("--feature-dim", a.fdim, "model feature dimension")->capture_default_str();
  app.add_option("--model-seed", a.model_seed, "model seed (defaults to --seed)");
  app.add_option("--weight-scale", a.weight_scale, "stddev of initial weights")
      ->capture_default_str();
  app.add_option("-o,--out", a.out, "output directory")->required();
}

int cmd_toy(const Context& ctx, const ToyArgs& a) {
  ToyCorpusConfig cfg;
  cfg.vocab = a.vocab;
  const ToyCorpus corpus = make_toy_corpus(a.n, a.seed, a.redundancy, cfg);
  const std::uint64_t model_seed = a.model_seed.value_or(a.seed);
  const ToyModel model = make_toy_model(a.vocab, a.fdim, model_seed, a.weight_scale);

  const fs::path dir = ctx.out(a.out);
  fs::create_directories(dir / "grads");
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  std::ofstream labels(dir / "labels.txt", std::ios::trunc);
  if (!manifest || !labels) throw IoError(fmt::format("cannot write into '{}'", dir.string()));
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    const LossAndGrad lg = loss_and_grad(model, corpus.examples[i]);
    const std::string name = fmt::format("grads/{:06d}.dgf", i);
    save_gradients(std::span<const LayerGradient>(&lg.grad, 1), dir / name);
    manifest << name << '\n';
    labels << corpus.labels[i] << '\n';
  }
  if (!manifest || !labels) throw IoError(fmt::format("write failed in '{}'", dir.string()));
  save_scores(score_corpus(model, corpus.examples), dir / "scores.csv");
  ctx.echo(dir, {{"n", a.n},
                 {"seed", a.seed},
                 {"redundancy", a.redundancy},
                 {"vocab", a.vocab},
                 {"feature_dim", a.fdim},
                 {"model_seed", model_seed},
                 {"weight_scale", a.weight_scale},
                 {"n_templates", corpus.n_templates},
                 {"n_redundant", corpus.n_redundant}});
  return kExitOk;
}

// ---- sketch

struct SketchArgs {
  std::string grads, manifest, out;
  std::size_t r = 8, dout = 4096, s = 8;
  std::uint64_t seed = 0;
  bool normalize = false;
};

void add_sketch(CLI::App& app, SketchArgs& a) {
  auto* g = app.add_option("--grads", a.grads, "directory of .dgf gradient files");
  auto* m = app.add_option("--manifest", a.manifest, "file listing gradient files, one per line");
  g->excludes(m);
  app.add_option("--r", a.r, "row projection rank")->capture_default_str();
  app.add_option("--dout", a.dout, "sketch dimension")->capture_default_str();
  app.add_option("--s", a.s, "nonzeros per column of the sparse transform")
      ->capture_default_str();
  app.add_option("--seed", a.seed, "sketch seed")->capture_default_str();
  app.add_flag("--normalize", a.normalize, "scale every sketch to unit length");
  app.add_option("-o,--out", a.out, "output feature file (DSF1)")->required();
}

std::vector<fs::path> gradient_files(const SketchArgs& a) {
  std::vector<fs::path> files;
  if (!a.grads.empty()) {
    if (!fs::is_directory(a.grads)) throw IoError(fmt::format("'{}' is not a directory", a.grads));
    for (const auto& e : fs::directory_iterator(a.grads)) {
      if (e.is_regular_file() && e.path().extension() == ".dgf") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (!a.manifest.empty()) {
    std::ifstream f(a.manifest);
    if (!f) throw IoError(fmt::format("cannot open '{}'", a.manifest));
    const fs::path base = fs::path(a.manifest).parent_path();
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const fs::path p(line);
      files.push_back(p.is_relative() ? base / p : p);
    }
  } else {
    throw ValidationError("sketch needs --grads or --manifest");
  }
  if (files.empty()) throw ValidationError("no gradient files found");
  return files;
}

int cmd_sketch(const Context& ctx, const SketchArgs& a) {
  const std::vector<fs::path> files = gradient_files(a);
  std::vector<std::vector<LayerGradient>> grads;
  grads.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    grads.push_back(load_gradients(files[i]));
    const auto& first = grads.front();
    const auto& cur = grads.back();
    bool same = cur.size() == first.size();
    for (std::size_t l = 0; same && l < cur.size(); ++l) {
      same = cur[l].name == first[l].name && cur[l].matrix.rows() == first[l].matrix.rows() &&
             cur[l].matrix.cols() == first[l].matrix.cols();
    }
    if (!same) {
      throw ValidationError(fmt::format("example {} ('{}') has layer shapes different from example 0",
                                        i, files[i].string()));
    }
  }
  std::vector<std::string> names;
  for (const auto& g : grads.front()) names.push_back(g.name);
  const SketchPlan plan = SketchPlan::derive(a.seed, names, a.r, a.dout, a.s);

  RowMatrix out(static_cast<Eigen::Index>(grads.size()), static_cast<Eigen::Index>(a.dout));
  parallel_for(grads.size(), ctx.threads(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::vector<double> v = sketch_gradients(grads[i], plan);
      for (std::size_t j = 0; j < v.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    }
  }, 16);
  FeatureMatrix m(std::move(out));
  if (a.normalize) m = normalize_rows(m);
  const fs::path path = ctx.out(a.out);
  save_features(m, path);
  ctx.echo(path, {{"n_examples", files.size()},
                  {"seed", a.seed},
                  {"normalize", a.normalize},
                  {"plan", plan.to_json()}});
  return kExitOk;
}

// ---- select

struct SelectArgs {
  std::string features, scores, strategy, budget, kernel = "rbf", quality_col,
      quality_mode = "rank", rank_col, direction = "desc", labels, out, trace, indices;
  double lambda = 0.0, gamma = 1.0, tau = 0.0, variance_floor = 1e-12;
  bool assume_unit = false;
  std::uint64_t seed = 0;
  CLI::Option* o_lambda = nullptr;
  CLI::Option* o_gamma = nullptr;
  CLI::Option* o_kernel = nullptr;
  CLI::Option* o_quality_col = nullptr;
  CLI::Option* o_quality_mode = nullptr;
  CLI::Option* o_trace = nullptr;
  CLI::Option* o_rank_col = nullptr;
  CLI::Option* o_direction = nullptr;
  CLI::Option* o_tau = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_floor = nullptr;
  CLI::Option* o_unit = nullptr;
};

void add_select(CLI::App& app, SelectArgs& a) {
  app.add_option("--features", a.features, "feature file")->required();
  app.add_option("--scores", a.scores, "score table (CSV or JSONL)");
  app.add_option("--strategy", a.strategy, "dpp | random | rank | dedup")->required();
  app.add_option("--budget", a.budget, "subset size, or a percentage such as 20%")->required();
  a.o_lambda = app.add_option("--lambda", a.lambda, "quality/diversity trade-off in [0, 1)");
  a.o_gamma = app.add_option("--gamma", a.gamma, "rbf bandwidth");
  a.o_kernel = app.add_option("--kernel", a.kernel, "rbf | inner-product");
  a.o_unit = app.add_flag("--assume-unit", a.assume_unit, "use the unit-row rbf shortcut");
  a.o_quality_col = app.add_option("--quality-col", a.quality_col, "quality score column");
  a.o_quality_mode = app.add_option("--quality-mode", a.quality_mode, "rank | minmax | identity");
  a.o_floor = app.add_option("--variance-floor", a.variance_floor, "greedy variance floor");
  a.o_trace = app.add_option("--trace", a.trace, "write the greedy trace CSV here");
  a.o_rank_col = app.add_option("--rank-col", a.rank_col, "column to rank by");
  a.o_direction = app.add_option("--direction", a.direction, "desc keeps the largest, asc the smallest");
  a.o_tau = app.add_option("--tau", a.tau, "cosine threshold for dedup");
  a.o_seed = app.add_option("--seed", a.seed, "seed for random");
  app.add_option("--labels", a.labels, "ground-truth cluster labels, one per line");
  app.add_option("--out", a.out, "selection JSON")->required();
  app.add_option("--indices", a.indices, "write selected indices, one per line");
}

std::size_t parse_budget(const std::string& s, std::size_t n) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos > 0 && pos + 1 == s.size() && s.back() == '%') {
    if (!(v > 0.0 && v <= 100.0)) throw ValidationError(fmt::format("budget '{}' out of range", s));
    return static_cast<std::size_t>(std::llround(v / 100.0 * static_cast<double>(n)));
  }
  if (pos != s.size() || !(v >= 1.0) || v != std::floor(v)) {
    throw ValidationError(fmt::format("budget '{}' is neither a positive count nor a percentage", s));
  }
  return static_cast<std::size_t>(v);
}

int cmd_select(const Context& ctx, const SelectArgs& a) {
  const Strategy strategy = parse_strategy(a.strategy);
  auto reject = [&](const CLI::Option* o, bool allowed) {
    if (o->count() > 0 && !allowed) {
      throw ValidationError(fmt::format("{} does not apply to the {} strategy", o->get_name(),
                                        to_string(strategy)));
    }
  };
  const bool dpp = strategy == Strategy::kDpp;
  for (const CLI::Option* o : {a.o_lambda, a.o_gamma, a.o_kernel, a.o_unit, a.o_quality_col,
                               a.o_quality_mode, a.o_floor, a.o_trace}) {
    reject(o, dpp);
  }
  reject(a.o_rank_col, strategy == Strategy::kRank);
  reject(a.o_direction, strategy == Strategy::kRank);
  reject(a.o_tau, strategy == Strategy::kDedup);
  reject(a.o_seed, strategy == Strategy::kRandom);

  SelectionRequest req;
  req.features = std::make_shared<const FeatureMatrix>(load_features(a.features));
  const std::size_t n = req.features->rows();
  if (!a.scores.empty()) req.scores = std::make_shared<const ScoreTable>(load_scores(a.scores, n));
  req.strategy = strategy;
  req.m = parse_budget(a.budget, n);
  req.kernel.kind = parse_kernel_kind(a.kernel);
  req.kernel.gamma = a.gamma;
  req.kernel.assume_unit_rows = a.assume_unit;
  req.lambda = a.lambda;
  req.quality_col = a.quality_col;
  req.quality_mode = parse_quality_mode(a.quality_mode);
  req.variance_floor = a.variance_floor;
  req.threads = ctx.threads();
  req.rank_col = a.rank_col;
  req.direction = parse_direction(a.direction);
  if (a.o_tau->count() > 0) req.tau = a.tau;
  req.seed = a.seed;

  SelectionResult result = select(req);
  if (result.shortfall) ctx.log(LogLevel::kWarn, result.warning);
  if (!a.labels.empty()) {
    const auto labels = load_labels(a.labels, n);
    result.metrics = coverage_metrics(result, labels, req.scores.get());
  }
  const fs::path out = ctx.out(a.out);
  save_selection(result, out);
  ojson params = {{"features", a.features}, {"scores", a.scores}, {"labels", a.labels},
                  {"strategy", result.strategy}};
  ctx.echo(out, params);
  if (!a.indices.empty()) {
    const fs::path p = ctx.out(a.indices);
    save_indices(result, p);
    ctx.echo(p, params);
  }
  if (!a.trace.empty()) {
    const fs::path p = ctx.out(a.trace);
    write_trace_csv(*result.trace, p);
    ctx.echo(p, params);
  }
  fmt::print("{}\n", result.indices.size());
  return kExitOk;
}

// ---- diversity

struct DiversityArgs {
  std::string features, name, kernel = "rbf", ref = "sphere", ref_file, out_report, out_curve;
  double gamma = 1.0, variance_floor = 1e-12;
  bool assume_unit = false;
  std::size_t ref_dim = kGradientReferenceDim;
  std::uint64_t ref_seed = 0;
};

void add_diversity(CLI::App& app, DiversityArgs& a) {
  app.add_option("--features", a.features, "feature file")->required();
  app.add_option("--name", a.name, "dataset name for the report (default: file stem)");
  app.add_option("--gamma", a.gamma, "rbf bandwidth")->capture_default_str();
  app.add_option("--kernel", a.kernel, "rbf | inner-product")->capture_default_str();
  app.add_flag("--assume-unit", a.assume_unit, "use the unit-row rbf shortcut");
  app.add_option("--ref", a.ref, "sphere | file")->capture_default_str();
  app.add_option("--ref-dim", a.ref_dim, "dimension of the sphere reference")
      ->capture_default_str();
  app.add_option("--ref-seed", a.ref_seed, "seed of the sphere reference")->capture_default_str();
  app.add_option("--ref-file", a.ref_file, "reference feature file (--ref file)");
  app.add_option("--variance-floor", a.variance_floor, "greedy variance floor")
      ->capture_default_str();
  app.add_option("--out-report", a.out_report, "write the report JSON here");
  app.add_option("--out-curve", a.out_curve, "write the per-step curve CSV here");
}

int cmd_diversity(const Context& ctx, const DiversityArgs& a) {
  const FeatureMatrix data = load_features(a.features);
  KernelSpec kernel;
  kernel.kind = parse_kernel_kind(a.kernel);
  kernel.gamma = a.gamma;
  kernel.assume_unit_rows = a.assume_unit;
  ReferenceSpec ref;
  ref.kind = parse_reference_kind(a.ref);
  if (ref.kind == ReferenceKind::kFile && a.ref_file.empty()) {
    throw ValidationError("--ref file needs --ref-file");
  }
  if (ref.kind == ReferenceKind::kHypersphere && !a.ref_file.empty()) {
    throw ValidationError("--ref-file only applies to --ref file");
  }
  ref.d_ref = a.ref_dim;
  ref.seed = a.ref_seed;
  ref.file = a.ref_file;
  ref.kernel = kernel;
  DiversityOptions opts;
  opts.variance_floor = a.variance_floor;
  opts.threads = ctx.threads();
  DiversityReport report = log_det_distance(data, kernel, ref, opts);
  report.dataset = a.name.empty() ? fs::path(a.features).stem().string() : a.name;
  if (report.floor_dependent) {
    ctx.log(LogLevel::kWarn, fmt::format("{} of {} data steps and {} reference steps hit the "
                                         "variance floor; the value depends on the floor",
                                         report.clamped_steps_data, report.n,
                                         report.clamped_steps_ref));
  }
  const ojson params = {{"features", a.features}, {"dataset", report.dataset},
                        {"kernel", kernel_json(kernel)}, {"reference", a.ref},
                        {"ref_dim", a.ref_dim}, {"ref_seed", a.ref_seed},
                        {"ref_file", a.ref_file}, {"variance_floor", a.variance_floor}};
  if (!a.out_report.empty()) {
    const fs::path p = ctx.out(a.out_report);
    save_report(report, p);
    ctx.echo(p, params);
  }
  if (!a.out_curve.empty()) {
    const fs::path p = ctx.out(a.out_curve);
    ldd_curve_export(report, p);
    ctx.echo(p, params);
  }
  fmt::print("{:.6f}\n", report.ldd);
  return kExitOk;
}

// ---- report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

void add_report(CLI::App& app, ReportArgs& a) {
  app.add_option("reports", a.inputs, "diversity report JSON files");
  app.add_option("-o,--out", a.out, "long-format CSV")->required();
}

int cmd_report(const Context& ctx, const ReportArgs& a) {
  if (a.inputs.empty()) throw ValidationError("report needs at least one report file");
  std::vector<DiversityReport> reports;
  for (const auto& p : a.inputs) reports.push_back(load_report(p));
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (!comparable(reports.front(), reports[i])) {
      throw ValidationError(fmt::format(
          "'{}' and '{}' use different kernels or references; their values are not comparable",
          a.inputs.front(), a.inputs[i]));
    }
  }
  const fs::path out = ctx.out(a.out);
  try {
    auto f = fmt::output_file(out.string());
    f.print("dataset,step,gain,ldd_curve\n");
    for (const auto& r : reports) {
      for (std::size_t k = 0; k < r.curve.size(); ++k) {
        f.print("{},{},{},{}\n", r.dataset, k, r.gains_data[k], r.curve[k]);
      }
    }
  } catch (const std::system_error& e) {
    throw IoError(fmt::format("cannot write '{}': {}", out.string(), e.what()));
  }
  ctx.echo(out, {{"reports", a.inputs}});
  return kExitOk;
}

// ---- replay

struct ReplayArgs {
  std::string config, out_dir;
};

void add_replay(CLI::App& app, ReplayArgs& a) {
  app.add_option("config", a.config, "a .config.json written by an earlier run")->required();
  app.add_option("--into", a.out_dir, "write outputs under this directory instead");
}

int cmd_replay(const ReplayArgs& a) {
  std::ifstream f(a.config);
  if (!f) throw IoError(fmt::format("cannot open '{}'", a.config));
  nlohmann::json cfg;
  std::vector<std::string> args;
  fs::path cwd;
  try {
    cfg = nlohmann::json::parse(f);
    args = cfg.at("argv").get<std::vector<std::string>>();
    cwd = cfg.at("cwd").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("'{}' is not a config echo: {}", a.config, e.what()));
  }
  if (!args.empty() && args.front() == "replay") throw ValidationError("cannot replay a replay");
  if (!a.out_dir.empty()) {
    std::vector<std::string> kept{"--out-dir", fs::absolute(a.out_dir).string()};
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--out-dir") {
        ++i;
        continue;
      }
      if (args[i].rfind("--out-dir=", 0) == 0) continue;
      kept.push_back(args[i]);
    }
    args = std::move(kept);
  }
  const fs::path here = fs::current_path();
  fs::current_path(cwd);
  int rc = kExitRuntime;
  try {
    rc = run_cli(args);
  } catch (...) {
    fs::current_path(here);
    throw;
  }
  fs::current_path(here);
  return rc;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Quality-weighted DPP subset selection and dataset diversity measurement",
               "dppkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--threads", g.threads, "worker threads (results do not depend on this)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--log-level", g.log_level, "error | warn | info | debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}))
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "directory for relative output paths");

  SynthArgs synth;
  ToyArgs toy;
  SketchArgs sketch;
  SelectArgs sel;
  DiversityArgs div;
  ReportArgs rep;
  ReplayArgs replay;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic feature matrix");
  add_synth(*c_synth, synth);
  auto* c_toy = app.add_subcommand("toy", "generate a toy corpus with gradients and scores");
  add_toy(*c_toy, toy);
  auto* c_sketch = app.add_subcommand("sketch", "sketch gradient files into feature vectors");
  add_sketch(*c_sketch, sketch);
  auto* c_select = app.add_subcommand("select", "select a subset");
  add_select(*c_select, sel);
  auto* c_div = app.add_subcommand("diversity", "measure log determinant distance");
  add_diversity(*c_div, div);
  auto* c_rep = app.add_subcommand("report", "merge diversity reports into one CSV");
  add_report(*c_rep, rep);
  auto* c_replay = app.add_subcommand("replay", "re-run a command from its config echo");
  add_replay(*c_replay, replay);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return kExitOk;
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (c_replay->parsed()) return cmd_replay(replay);
    const CLI::App* sub = app.get_subcommands().front();
    const Context ctx(g, args, sub->get_name());
    if (c_synth->parsed()) return cmd_synth(ctx, synth);
    if (c_toy->parsed()) return cmd_toy(ctx, toy);
    if (c_sketch->parsed()) return cmd_sketch(ctx, sketch);
    if (c_select->parsed()) return cmd_select(ctx, sel);
    if (c_div->parsed()) return cmd_diversity(ctx, div);
    if (c_rep->parsed()) return cmd_report(ctx, rep);
  } catch (const ValidationError& e) {
    std::cerr << "dppkit: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const LengthMismatchError& e) {
    std::cerr << "dppkit: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DegenerateInputError& e) {
    std::cerr << "dppkit: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "dppkit: error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace dppkit
