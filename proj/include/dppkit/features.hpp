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

#ifndef DPPKIT_FEATURES_HPP_
#define DPPKIT_FEATURES_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dppkit {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows whose Euclidean norm is within this distance of 1 count as unit rows.
inline constexpr double kUnitRowTolerance = 1e-6;

// Dense N x D matrix of per-example feature vectors. Values are held in
// double precision; files store float32. Immutable after construction.
class FeatureMatrix {
 public:
  // Validates shape and finiteness. The normalized flag is derived from a
  // full pass over the rows, never trusted from the caller.
  explicit FeatureMatrix(RowMatrix values);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }
  bool normalized() const { return normalized_; }

  const RowMatrix& values() const { return values_; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols(), cols()};
  }

 private:
  RowMatrix values_;
  bool normalized_ = false;
};

bool rows_are_unit(const RowMatrix& values, double tol = kUnitRowTolerance);

// Reads a DSF1 binary file, or a headerless CSV (one row per line) when the
// file does not start with the DSF1 magic.
FeatureMatrix load_features(const std::filesystem::path& path);

// Writes DSF1. Values are rounded to float32.
void save_features(const FeatureMatrix& m, const std::filesystem::path& path);

// Divides every row by its Euclidean norm. A zero row is an error.
FeatureMatrix normalize_rows(const FeatureMatrix& m);

enum class SynthKind { kHypersphere, kClusteredMixture, kDuplicated };

std::string_view to_string(SynthKind kind);
SynthKind parse_synth_kind(std::string_view name);

struct SynthSpec {
  SynthKind kind = SynthKind::kHypersphere;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t n_clusters = 1;        // clustered-mixture only
  double intra_cluster_scale = 0.0;  // clustered-mixture only
  std::size_t dup_factor = 1;        // duplicated only
  std::uint64_t seed = 0;

  void validate() const;
};

// Deterministic synthetic feature matrices; every row has unit norm.
//  - hypersphere: iid standard normal rows scaled to unit length.
//  - clustered mixture: row i belongs to cluster i % n_clusters and equals
//    its (uniform on the sphere) centroid plus scale * N(0, I), renormalized.
//  - duplicated: ceil(n / dup_factor) sphere rows, each repeated dup_factor
//    times in a consecutive block, truncated to n rows.
FeatureMatrix synthesize(const SynthSpec& spec);

// Named per-example score columns, all of the same length.
class ScoreTable {
 public:
  explicit ScoreTable(std::size_t n_rows) : n_rows_(n_rows) {}

  std::size_t rows() const { return n_rows_; }
  const std::vector<std::string>& names() const { return names_; }
  bool has_column(std::string_view name) const;
  const std::vector<double>& column(std::string_view name) const;

  // Throws ValidationError on duplicate names, wrong length or non-finite
  // entries.
  void add_column(std::string name, std::vector<double> values);

 private:
  std::size_t n_rows_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

// Reads a score table from CSV (header "index,<name>,...") or JSONL (one
// object per line). The format is picked from the extension: ".jsonl" and
// ".json" are JSONL, anything else CSV.
ScoreTable load_scores(const std::filesystem::path& path, std::size_t n_rows);

void save_scores(const ScoreTable& table, const std::filesystem::path& path);

}  // namespace dppkit

#endif  // DPPKIT_FEATURES_HPP_
