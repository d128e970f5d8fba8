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

#ifndef DPPKIT_SELECT_HPP_
#define DPPKIT_SELECT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include "json.hpp"
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dppkit/dpp.hpp"
#include "dppkit/features.hpp"
#include "dppkit/kernels.hpp"

namespace dppkit {

enum class Strategy { kDpp, kRandom, kRank, kDedup };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

// kDescending keeps the largest values ("higher is better").
enum class Direction { kAscending, kDescending };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view name);

struct SelectionRequest {
  std::shared_ptr<const FeatureMatrix> features;
  std::shared_ptr<const ScoreTable> scores;  // may be null
  Strategy strategy = Strategy::kDpp;
  std::size_t m = 0;

  // dpp
  KernelSpec kernel;
  double lambda = 0.0;
  std::string quality_col;  // required when lambda > 0
  QualityMode quality_mode = QualityMode::kRankNormalize;
  double variance_floor = 1e-12;
  int threads = 1;

  // rank
  std::string rank_col;
  Direction direction = Direction::kDescending;

  // dedup
  std::optional<double> tau;

  // random
  std::uint64_t seed = 0;

  void validate() const;
};

struct CoverageMetrics {
  std::size_t clusters_covered = 0;
  double max_cluster_share = 0.0;
  std::size_t duplicate_pairs = 0;
  std::map<std::string, double> mean_quality;

  nlohmann::json to_json() const;
};

struct SelectionResult {
  std::vector<std::size_t> indices;
  nlohmann::ordered_json strategy;
  bool shortfall = false;
  std::string warning;
  std::optional<GreedyTrace> trace;  // dpp only
  std::optional<CoverageMetrics> metrics;
};

SelectionResult select(const SelectionRequest& req);

// `labels` gives a ground-truth cluster id per row of the dataset. Scores,
// when given, contribute the mean of every column over the selection.
CoverageMetrics coverage_metrics(const SelectionResult& result,
                                 std::span<const std::size_t> labels,
                                 const ScoreTable* scores = nullptr);

nlohmann::ordered_json to_json(const SelectionResult& result);
void save_selection(const SelectionResult& result, const std::filesystem::path& path);
// One index per line.
void save_indices(const SelectionResult& result, const std::filesystem::path& path);
std::vector<std::size_t> load_labels(const std::filesystem::path& path, std::size_t n_rows);

}  // namespace dppkit

#endif  // DPPKIT_SELECT_HPP_
