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

#ifndef DPPKIT_DIVERSITY_HPP_
#define DPPKIT_DIVERSITY_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include "json.hpp"
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dppkit/dpp.hpp"
#include "dppkit/features.hpp"
#include "dppkit/kernels.hpp"

namespace dppkit {

// Reference dimensions used for gradient / decoder features and for
// encoder embeddings respectively.
inline constexpr std::size_t kGradientReferenceDim = 4096;
inline constexpr std::size_t kEncoderReferenceDim = 768;

enum class ReferenceKind { kHypersphere, kFile };

std::string_view to_string(ReferenceKind kind);
ReferenceKind parse_reference_kind(std::string_view name);

struct ReferenceSpec {
  ReferenceKind kind = ReferenceKind::kHypersphere;
  // Number of reference points. 0 means "match the dataset".
  std::size_t n = 0;
  std::size_t d_ref = kGradientReferenceDim;
  std::uint64_t seed = 0;
  std::filesystem::path file;  // file kind only
  // Must equal the kernel used for the dataset.
  KernelSpec kernel;
};

// Builds the reference point set: n uniform points on the unit sphere in
// d_ref dimensions, or the rows of `file`. Requires spec.n >= 1.
FeatureMatrix make_reference(const ReferenceSpec& spec);

struct DiversityOptions {
  double variance_floor = 1e-12;
  // A report is flagged floor-dependent when more than this fraction of
  // the greedy steps in either run were clamped.
  double floor_fraction = 0.01;
  int threads = 1;
  // Optional quality weighting of the dataset kernel. Off by default: the
  // distance is a property of the similarity kernel alone.
  std::optional<std::vector<double>> quality;
  double lambda = 0.0;
};

struct DiversityReport {
  std::string dataset;
  std::size_t n = 0;
  double ldd = 0.0;
  // curve[k] = (cum_logdet_ref[k] - cum_logdet_data[k]) / (k + 1).
  std::vector<double> curve;
  std::vector<double> gains_data;
  std::vector<double> gains_ref;
  std::vector<double> cum_logdet_data;
  std::vector<double> cum_logdet_ref;
  std::size_t clamped_steps_data = 0;
  std::size_t clamped_steps_ref = 0;
  bool floor_dependent = false;
  double variance_floor = 1e-12;
  KernelSpec kernel;
  ReferenceSpec reference;  // n filled in
  std::string generator;    // RNG algorithm used for the reference
};

// Log determinant distance (1/N) log(det R / det L), computed from two
// exhaustive greedy runs so that the per-step curve comes for free.
DiversityReport log_det_distance(const FeatureMatrix& data, const KernelSpec& kernel,
                                 const ReferenceSpec& ref, const DiversityOptions& opts = {});

// Same, with the reference run supplied by the caller (see reference_trace);
// useful when many datasets of one size share a reference.
DiversityReport log_det_distance(const FeatureMatrix& data, const KernelSpec& kernel,
                                 const ReferenceSpec& ref, const GreedyTrace& ref_trace,
                                 const DiversityOptions& opts = {});

// Exhaustive greedy run over the reference of size n.
GreedyTrace reference_trace(const ReferenceSpec& ref, std::size_t n,
                            const DiversityOptions& opts = {});

// CSV with header
// step,gain_data,gain_ref,cum_logdet_data,cum_logdet_ref,logdet_gap,ldd_curve
void ldd_curve_export(const DiversityReport& report, const std::filesystem::path& path);

nlohmann::json to_json(const DiversityReport& report);
DiversityReport report_from_json(const nlohmann::json& j);
void save_report(const DiversityReport& report, const std::filesystem::path& path);
DiversityReport load_report(const std::filesystem::path& path);

// True when two reports were measured under the same kernel and reference
// construction, i.e. their LDD values may be compared.
bool comparable(const DiversityReport& a, const DiversityReport& b);

}  // namespace dppkit

#endif  // DPPKIT_DIVERSITY_HPP_
