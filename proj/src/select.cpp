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

#include "dppkit/select.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_map>

#include "dppkit/errors.hpp"
#include "dppkit/rng.hpp"

namespace dppkit {
namespace {

const std::vector<double>& require_column(const SelectionRequest& req, const std::string& name,
                                          const char* flag) {
  if (name.empty()) throw ValidationError(fmt::format("{} strategy needs {}", to_string(req.strategy), flag));
  if (!req.scores) {
    throw ValidationError(fmt::format("score column '{}' requested but no score table given", name));
  }
  return req.scores->column(name);
}

SelectionResult run_dpp(const SelectionRequest& req) {
  std::optional<std::vector<double>> quality;
  // With lambda = 0 every weight is e^0, so scores are not consulted at all.
  if (req.lambda > 0.0) {
    quality = quality_transform(require_column(req, req.quality_col, "a quality column"),
                                req.quality_mode);
  }
  const DppKernel kernel(req.features, req.kernel, std::move(quality), req.lambda);
  Budget budget = Budget::of_size(req.m);
  budget.variance_floor = req.variance_floor;
  SelectionResult out;
  out.trace = greedy_map(kernel, budget, req.threads);
  out.indices = out.trace->selected;
  return out;
}

SelectionResult run_rank(const SelectionRequest& req) {
  const auto& col = require_column(req, req.rank_col, "a rank column");
  std::vector<std::size_t> order(col.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (req.direction == Direction::kDescending) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return col[a] > col[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
  }
  order.resize(req.m);
  SelectionResult out;
  out.indices = std::move(order);
  return out;
}

SelectionResult run_random(const SelectionRequest& req) {
  const std::size_t n = req.features->rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(req.seed);
  for (std::size_t i = 0; i < req.m; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(req.m);
  SelectionResult out;
  out.indices = std::move(perm);
  return out;
}

SelectionResult run_dedup(const SelectionRequest& req) {
  const FeatureMatrix& f = *req.features;
  const double tau = *req.tau;
  const Eigen::VectorXd norms = f.values().rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) {
      throw DegenerateInputError(fmt::format("row {} is the zero vector; cosine undefined", i));
    }
  }
  SelectionResult out;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < f.rows() && kept.size() < req.m; ++i) {
    const auto ri = f.values().row(static_cast<Eigen::Index>(i));
    bool keep = true;
    for (std::size_t k : kept) {
      const double cos = ri.dot(f.values().row(static_cast<Eigen::Index>(k))) /
                         (norms(static_cast<Eigen::Index>(i)) * norms(static_cast<Eigen::Index>(k)));
      if (!(cos < tau)) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(i);
  }
  if (kept.size() < req.m) {
    out.shortfall = true;
    out.warning = fmt::format("dedup kept {} of {} requested items before exhausting the dataset",
                              kept.size(), req.m);
  }
  out.indices = std::move(kept);
  return out;
}

nlohmann::ordered_json strategy_echo(const SelectionRequest& req) {
  nlohmann::ordered_json j;
  j["name"] = std::string(to_string(req.strategy));
  j["m"] = req.m;
  switch (req.strategy) {
    case Strategy::kDpp:
      j["kernel"] = {{"kind", std::string(to_string(req.kernel.kind))},
                     {"gamma", req.kernel.gamma},
                     {"assume_unit_rows", req.kernel.assume_unit_rows},
                     {"scale", req.kernel.scale}};
      j["lambda"] = req.lambda;
      j["quality_col"] = req.quality_col;
      j["quality_mode"] = std::string(to_string(req.quality_mode));
      j["variance_floor"] = req.variance_floor;
      break;
    case Strategy::kRank:
      j["rank_col"] = req.rank_col;
      j["direction"] = std::string(to_string(req.direction));
      break;
    case Strategy::kDedup:
      j["tau"] = *req.tau;
      break;
    case Strategy::kRandom:
      j["seed"] = req.seed;
      break;
  }
  return j;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kDpp: return "dpp";
    case Strategy::kRandom: return "random";
    case Strategy::kRank: return "rank";
    case Strategy::kDedup: return "dedup";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "dpp") return Strategy::kDpp;
  if (name == "random") return Strategy::kRandom;
  if (name == "rank") return Strategy::kRank;
  if (name == "dedup") return Strategy::kDedup;
  throw ValidationError(fmt::format("unknown strategy '{}' (dpp, random, rank, dedup)", name));
}

std::string_view to_string(Direction d) {
  return d == Direction::kAscending ? "asc" : "desc";
}

Direction parse_direction(std::string_view name) {
  if (name == "asc" || name == "ascending") return Direction::kAscending;
  if (name == "desc" || name == "descending") return Direction::kDescending;
  throw ValidationError(fmt::format("unknown direction '{}' (asc, desc)", name));
}

void SelectionRequest::validate() const {
  if (!features) throw ValidationError("selection request has no features");
  const std::size_t n = features->rows();
  if (m < 1 || m > n) throw ValidationError(fmt::format("budget m={} must lie in [1, {}]", m, n));
  if (scores && scores->rows() != n) {
    throw LengthMismatchError(
        fmt::format("score table has {} rows but features have {}", scores->rows(), n));
  }
  if (tau && strategy != Strategy::kDedup) {
    throw ValidationError(fmt::format("tau only applies to dedup, not {}", to_string(strategy)));
  }
  switch (strategy) {
    case Strategy::kDpp:
      kernel.validate();
      if (!(lambda >= 0.0 && lambda < 1.0)) {
        throw ValidationError(fmt::format(
            "lambda must lie in [0, 1), got {}; use the rank strategy for pure quality selection",
            lambda));
      }
      if (lambda > 0.0 && quality_col.empty()) {
        throw ValidationError("lambda > 0 needs a quality column");
      }
      break;
    case Strategy::kRank:
      if (rank_col.empty()) throw ValidationError("rank strategy needs a rank column");
      break;
    case Strategy::kDedup:
      if (!tau) throw ValidationError("dedup strategy needs a cosine threshold tau");
      if (!std::isfinite(*tau)) throw ValidationError("tau must be finite");
      break;
    case Strategy::kRandom:
      break;
  }
}

SelectionResult select(const SelectionRequest& req) {
  req.validate();
  SelectionResult out;
  switch (req.strategy) {
    case Strategy::kDpp: out = run_dpp(req); break;
    case Strategy::kRank: out = run_rank(req); break;
    case Strategy::kRandom: out = run_random(req); break;
    case Strategy::kDedup: out = run_dedup(req); break;
  }
  out.strategy = strategy_echo(req);
  return out;
}

nlohmann::json CoverageMetrics::to_json() const {
  nlohmann::json j;
  j["clusters_covered"] = clusters_covered;
  j["max_cluster_share"] = max_cluster_share;
  j["duplicate_pairs"] = duplicate_pairs;
  j["mean_quality"] = mean_quality;
  return j;
}

CoverageMetrics coverage_metrics(const SelectionResult& result,
                                 std::span<const std::size_t> labels, const ScoreTable* scores) {
  if (scores && scores->rows() != labels.size()) {
    throw LengthMismatchError(fmt::format("labels have {} entries but scores have {} rows",
                                          labels.size(), scores->rows()));
  }
  std::unordered_map<std::size_t, std::size_t> counts;
  for (std::size_t i : result.indices) {
    if (i >= labels.size()) {
      throw LengthMismatchError(
          fmt::format("selected index {} outside label range {}", i, labels.size()));
    }
    ++counts[labels[i]];
  }
  CoverageMetrics m;
  m.clusters_covered = counts.size();
  std::size_t largest = 0;
  for (const auto& [label, c] : counts) {
    largest = std::max(largest, c);
    m.duplicate_pairs += c * (c - 1) / 2;
  }
  if (!result.indices.empty()) {
    m.max_cluster_share = static_cast<double>(largest) / static_cast<double>(result.indices.size());
  }
  if (scores && !result.indices.empty()) {
    for (const auto& name : scores->names()) {
      const auto& col = scores->column(name);
      double sum = 0.0;
      for (std::size_t i : result.indices) sum += col[i];
      m.mean_quality[name] = sum / static_cast<double>(result.indices.size());
    }
  }
  return m;
}

nlohmann::ordered_json to_json(const SelectionResult& result) {
  nlohmann::ordered_json j;
  j["indices"] = result.indices;
  j["strategy"] = result.strategy;
  j["shortfall"] = result.shortfall;
  if (!result.warning.empty()) j["warning"] = result.warning;
  j["metrics"] = result.metrics ? nlohmann::ordered_json(result.metrics->to_json())
                                : nlohmann::ordered_json::object();
  return j;
}

void save_selection(const SelectionResult& result, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  f << to_json(result).dump(2) << '\n';
  if (!f) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

void save_indices(const SelectionResult& result, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  for (std::size_t i : result.indices) f << i << '\n';
  if (!f) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::vector<std::size_t> load_labels(const std::filesystem::path& path, std::size_t n_rows) {
  std::ifstream f(path);
  if (!f) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<std::size_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(line, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != line.size() || line[0] == '-') {
      throw FormatError(fmt::format("{}:{}: expected a non-negative integer label", path.string(), lineno));
    }
    labels.push_back(static_cast<std::size_t>(v));
  }
  if (labels.size() != n_rows) {
    throw LengthMismatchError(fmt::format("'{}' has {} labels, expected {}", path.string(),
                                          labels.size(), n_rows));
  }
  return labels;
}

}  // namespace dppkit
