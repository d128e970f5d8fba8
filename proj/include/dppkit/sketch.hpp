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

#ifndef DPPKIT_SKETCH_HPP_
#define DPPKIT_SKETCH_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include "json.hpp"
#include <span>
#include <string>
#include <vector>

#include "dppkit/features.hpp"

namespace dppkit {

// Gradient of the loss with respect to one m x n weight matrix.
struct LayerGradient {
  std::string name;
  RowMatrix matrix;
};

// Parameters of the two-stage sketch:
//
//   1. row projection  G -> G A^T  with A (r x n) iid N(0, 1/r) per layer,
//      which is the gradient of a LoRA "B" factor at initialization;
//   2. a sparse sign JL map from the concatenated vec(G A^T) to d_out
//      coordinates with s nonzeros (+-1/sqrt(s)) per input coordinate.
//
// A matrices are regenerated from their seeds whenever needed. The LoRA B
// factor is zero at initialization, which only matters for the forward pass
// during training; it plays no role here.
struct SketchPlan {
  std::size_t r = 8;
  std::map<std::string, std::uint64_t> layer_seeds;
  std::size_t d_out = 4096;
  std::size_t s = 8;
  std::uint64_t jl_seed = 0;

  void validate() const;

  // Seeds every named layer from one base seed.
  static SketchPlan derive(std::uint64_t seed, std::span<const std::string> layer_names,
                           std::size_t r, std::size_t d_out, std::size_t s = 8);

  nlohmann::json to_json() const;
};

// The r x n Gaussian projection for a layer seed.
RowMatrix projection_matrix(std::uint64_t seed, std::size_t r, std::size_t n);

// G A^T, an m x r matrix.
RowMatrix row_project(const LayerGradient& grad, const SketchPlan& plan);

// Sparse JL transform of v into d_out coordinates. Coordinate j is sent to
// s distinct output rows with independent random signs, all scaled by
// 1/sqrt(s); rows and signs are a pure function of (seed, j).
std::vector<double> sparse_jl(std::span<const double> v, std::size_t d_out, std::size_t s,
                              std::uint64_t seed);

// Row-projects every layer, concatenates the row-major flattenings in list
// order and applies sparse_jl with plan.jl_seed.
std::vector<double> sketch_gradients(std::span<const LayerGradient> grads,
                                     const SketchPlan& plan);

// Row-major vec(); the convention used throughout the sketch.
std::vector<double> vectorize(const RowMatrix& m);
RowMatrix unvectorize(std::span<const double> v, std::size_t rows, std::size_t cols);

// Monte Carlo check of the row-wise projection norm bound. Each trial draws
// a Gaussian m x n gradient scaled to unit Frobenius norm and a fresh A, so
// absolute and relative distortions coincide.
struct DistortionSummary {
  std::size_t m = 0, n = 0, r = 0, trials = 0;
  // Quantiles of | ||vec(G A^T)||^2 - ||vec(G)||^2 |.
  double mean = 0.0, p50 = 0.0, p90 = 0.0, p95 = 0.0, p99 = 0.0, max = 0.0;
  // Quantiles over trials of max_k | ||q_k||^2 - ||p_k||^2 |, the per-row
  // quantity of the union bound.
  double row_max_p50 = 0.0, row_max_p95 = 0.0;
  // m * row_max at the 95th percentile: the epsilon for which every row
  // stays within epsilon / m in 95% of trials.
  double union_epsilon_p95 = 0.0;

  nlohmann::json to_json() const;
};

DistortionSummary lemma1_diagnostic(std::size_t m, std::size_t n, std::size_t r,
                                    std::size_t trials, std::uint64_t seed);

// DGF1 gradient container: "DGF1", u32 layer count, then per layer a u32
// name length, the UTF-8 name, u32 m, u32 n and m*n float32 values, all
// little-endian and row-major.
std::vector<LayerGradient> load_gradients(const std::filesystem::path& path);
void save_gradients(std::span<const LayerGradient> grads, const std::filesystem::path& path);

}  // namespace dppkit

#endif  // DPPKIT_SKETCH_HPP_
