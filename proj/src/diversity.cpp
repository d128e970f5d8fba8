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

#include "dppkit/diversity.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <cmath>
#include <fstream>
#include <future>
#include <memory>

#include "dppkit/errors.hpp"
#include "dppkit/rng.hpp"

namespace dppkit {

std::string_view to_string(ReferenceKind kind) {
  return kind == ReferenceKind::kHypersphere ? "sphere" : "file";
}

ReferenceKind parse_reference_kind(std::string_view name) {
  if (name == "sphere" || name == "hypersphere") return ReferenceKind::kHypersphere;
  if (name == "file") return ReferenceKind::kFile;
  throw ValidationError(fmt::format("unknown reference kind '{}'", name));
}

FeatureMatrix make_reference(const ReferenceSpec& spec) {
  if (spec.kind == ReferenceKind::kFile) {
    FeatureMatrix m = load_features(spec.file);
    if (spec.n != 0 && m.rows() != spec.n) {
      throw ValidationError(fmt::format("reference file '{}' has {} rows, expected {}",
                                        spec.file.string(), m.rows(), spec.n));
    }
    if (spec.kernel.kind == KernelKind::kRbf && spec.kernel.assume_unit_rows &&
        !m.normalized()) {
      throw ValidationError(fmt::format(
          "reference file '{}' has non-unit rows but the kernel assumes unit rows",
          spec.file.string()));
    }
    return m;
  }
  if (spec.n < 1 || spec.d_ref < 1) {
    throw ValidationError(
        fmt::format("reference needs n >= 1 and d_ref >= 1 (n={}, d_ref={})", spec.n, spec.d_ref));
  }
  SynthSpec s;
  s.kind = SynthKind::kHypersphere;
  s.n = spec.n;
  s.d = spec.d_ref;
  s.seed = spec.seed;
  return synthesize(s);
}

namespace {

ReferenceSpec matched(const ReferenceSpec& ref, std::size_t n) {
  if (ref.n != 0 && ref.n != n) {
    throw ValidationError(
        fmt::format("reference size {} does not match dataset size {}", ref.n, n));
  }
  ReferenceSpec out = ref;
  out.n = n;
  return out;
}

GreedyTrace run_data(const FeatureMatrix& data, const KernelSpec& kernel,
                     const DiversityOptions& opts) {
  auto shared = std::make_shared<const FeatureMatrix>(data);
  const DppKernel k(shared, kernel, opts.quality, opts.lambda);
  Budget b = Budget::exhaustive();
  b.variance_floor = opts.variance_floor;
  return greedy_map(k, b, opts.threads);
}

}  // namespace

GreedyTrace reference_trace(const ReferenceSpec& ref, std::size_t n,
                            const DiversityOptions& opts) {
  const ReferenceSpec spec = matched(ref, n);
  auto features = std::make_shared<const FeatureMatrix>(make_reference(spec));
  if (features->rows() != n) {
    throw ValidationError(fmt::format("reference has {} rows, dataset has {}",
                                      features->rows(), n));
  }
  const DppKernel k(features, spec.kernel);
  Budget b = Budget::exhaustive();
  b.variance_floor = opts.variance_floor;
  return greedy_map(k, b, opts.threads);
}

namespace {

DiversityReport assemble(const KernelSpec& kernel, const ReferenceSpec& spec,
                         const GreedyTrace& data_trace, const GreedyTrace& ref_trace,
                         const DiversityOptions& opts) {
  const std::size_t n = data_trace.size();
  DiversityReport r;
  r.n = n;
  r.kernel = kernel;
  r.reference = spec;
  r.variance_floor = opts.variance_floor;
  r.generator = std::string(Rng::kAlgorithm);
  r.gains_data = data_trace.gains;
  r.gains_ref = ref_trace.gains;
  r.cum_logdet_data = data_trace.cum_logdet;
  r.cum_logdet_ref = ref_trace.cum_logdet;
  r.clamped_steps_data = data_trace.clamped_steps;
  r.clamped_steps_ref = ref_trace.clamped_steps;
  r.curve.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    r.curve[k] = (r.cum_logdet_ref[k] - r.cum_logdet_data[k]) / static_cast<double>(k + 1);
    if (!std::isfinite(r.curve[k])) {
      throw NumericError(fmt::format("log determinant curve is not finite at step {}", k + 1));
    }
  }
  r.ldd = r.curve.back();
  const double limit = opts.floor_fraction * static_cast<double>(n);
  r.floor_dependent = static_cast<double>(r.clamped_steps_data) > limit ||
                      static_cast<double>(r.clamped_steps_ref) > limit;
  return r;
}

void check_kernels(const ReferenceSpec& ref, const KernelSpec& kernel) {
  if (!(ref.kernel == kernel)) {
    throw ValidationError("reference kernel differs from the dataset kernel");
  }
}

}  // namespace

DiversityReport log_det_distance(const FeatureMatrix& data, const KernelSpec& kernel,
                                 const ReferenceSpec& ref, const GreedyTrace& ref_trace,
                                 const DiversityOptions& opts) {
  check_kernels(ref, kernel);
  const std::size_t n = data.rows();
  const ReferenceSpec spec = matched(ref, n);
  if (ref_trace.size() != n) {
    throw ValidationError(
        fmt::format("reference trace has {} steps, dataset has {} rows", ref_trace.size(), n));
  }
  return assemble(kernel, spec, run_data(data, kernel, opts), ref_trace, opts);
}

DiversityReport log_det_distance(const FeatureMatrix& data, const KernelSpec& kernel,
                                 const ReferenceSpec& ref, const DiversityOptions& opts) {
  check_kernels(ref, kernel);
  const std::size_t n = data.rows();
  const ReferenceSpec spec = matched(ref, n);
  if (opts.threads > 1) {
    // The two runs are independent and share the thread budget.
    DiversityOptions half = opts;
    half.threads = std::max(1, opts.threads / 2);
    auto fut = std::async(std::launch::async, [&] { return reference_trace(spec, n, half); });
    GreedyTrace data_trace;
    try {
      data_trace = run_data(data, kernel, half);
    } catch (...) {
      fut.wait();
      throw;
    }
    const GreedyTrace ref_trace = fut.get();
    return assemble(kernel, spec, data_trace, ref_trace, opts);
  }
  const GreedyTrace ref_trace = reference_trace(spec, n, opts);
  return assemble(kernel, spec, run_data(data, kernel, opts), ref_trace, opts);
}

void ldd_curve_export(const DiversityReport& r, const std::filesystem::path& path) {
  try {
    auto out = fmt::output_file(path.string());
    out.print("step,gain_data,gain_ref,cum_logdet_data,cum_logdet_ref,logdet_gap,ldd_curve\n");
    for (std::size_t k = 0; k < r.n; ++k) {
      out.print("{},{},{},{},{},{},{}\n", k + 1, r.gains_data[k], r.gains_ref[k],
                r.cum_logdet_data[k], r.cum_logdet_ref[k],
                r.cum_logdet_ref[k] - r.cum_logdet_data[k], r.curve[k]);
    }
  } catch (const std::system_error& e) {
    throw IoError(fmt::format("cannot write '{}': {}", path.string(), e.what()));
  }
}

namespace {

nlohmann::json kernel_json(const KernelSpec& k) {
  return {{"kind", to_string(k.kind)},
          {"gamma", k.gamma},
          {"assume_unit_rows", k.assume_unit_rows},
          {"scale", k.scale}};
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  KernelSpec k;
  k.kind = parse_kernel_kind(j.at("kind").get<std::string>());
  k.gamma = j.at("gamma").get<double>();
  k.assume_unit_rows = j.at("assume_unit_rows").get<bool>();
  k.scale = j.value("scale", 1.0);
  return k;
}

}  // namespace

nlohmann::json to_json(const DiversityReport& r) {
  nlohmann::json ref = {{"kind", to_string(r.reference.kind)},
                        {"n", r.reference.n},
                        {"d_ref", r.reference.d_ref},
                        {"seed", r.reference.seed},
                        {"file", r.reference.file.string()}};
  return {{"dataset", r.dataset},
          {"n", r.n},
          {"ldd", r.ldd},
          {"gamma", r.kernel.gamma},
          {"kernel", kernel_json(r.kernel)},
          {"reference", ref},
          {"generator", r.generator},
          {"variance_floor", r.variance_floor},
          {"clamped_steps_data", r.clamped_steps_data},
          {"clamped_steps_ref", r.clamped_steps_ref},
          {"floor_dependent", r.floor_dependent},
          {"curve", r.curve},
          {"gains_data", r.gains_data},
          {"gains_ref", r.gains_ref},
          {"cum_logdet_data", r.cum_logdet_data},
          {"cum_logdet_ref", r.cum_logdet_ref}};
}

DiversityReport report_from_json(const nlohmann::json& j) {
  try {
    DiversityReport r;
    r.dataset = j.value("dataset", std::string());
    r.n = j.at("n").get<std::size_t>();
    r.ldd = j.at("ldd").get<double>();
    r.kernel = kernel_from_json(j.at("kernel"));
    const auto& ref = j.at("reference");
    r.reference.kind = parse_reference_kind(ref.at("kind").get<std::string>());
    r.reference.n = ref.at("n").get<std::size_t>();
    r.reference.d_ref = ref.at("d_ref").get<std::size_t>();
    r.reference.seed = ref.at("seed").get<std::uint64_t>();
    r.reference.file = ref.value("file", std::string());
    r.reference.kernel = r.kernel;
    r.generator = j.value("generator", std::string());
    r.variance_floor = j.value("variance_floor", 1e-12);
    r.clamped_steps_data = j.value("clamped_steps_data", std::size_t{0});
    r.clamped_steps_ref = j.value("clamped_steps_ref", std::size_t{0});
    r.floor_dependent = j.value("floor_dependent", false);
    r.curve = j.at("curve").get<std::vector<double>>();
    r.gains_data = j.at("gains_data").get<std::vector<double>>();
    r.gains_ref = j.at("gains_ref").get<std::vector<double>>();
    r.cum_logdet_data = j.at("cum_logdet_data").get<std::vector<double>>();
    r.cum_logdet_ref = j.at("cum_logdet_ref").get<std::vector<double>>();
    if (r.curve.size() != r.n || r.gains_data.size() != r.n || r.gains_ref.size() != r.n ||
        r.cum_logdet_data.size() != r.n || r.cum_logdet_ref.size() != r.n) {
      throw FormatError("diversity report arrays do not match n");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed diversity report: {}", e.what()));
  }
}

void save_report(const DiversityReport& report, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  f << to_json(report).dump(2) << '\n';
  if (!f) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

DiversityReport load_report(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError(fmt::format("cannot open '{}'", path.string()));
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("'{}': {}", path.string(), e.what()));
  }
  return report_from_json(j);
}

bool comparable(const DiversityReport& a, const DiversityReport& b) {
  if (!(a.kernel == b.kernel)) return false;
  if (a.reference.kind != b.reference.kind) return false;
  if (a.reference.kind == ReferenceKind::kFile) return a.reference.file == b.reference.file;
  return a.reference.d_ref == b.reference.d_ref && a.reference.seed == b.reference.seed &&
         a.generator == b.generator;
}

}  // namespace dppkit
