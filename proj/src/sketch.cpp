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

#include "dppkit/sketch.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "dppkit/errors.hpp"
#include "dppkit/rng.hpp"

namespace dppkit {
namespace {

constexpr std::array<char, 4> kGradMagic = {'D', 'G', 'F', '1'};

// Per-coordinate hash stream for the sparse transform.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t state) : state_(state) {}
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::uint64_t state_;
};

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  // Nearest rank.
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::min(v.size() - 1, k == 0 ? 0 : k - 1)];
}

}  // namespace

void SketchPlan::validate() const {
  if (r < 1) throw ValidationError("sketch plan: r must be >= 1");
  if (d_out < 1) throw ValidationError("sketch plan: d_out must be >= 1");
  if (s < 1 || s > d_out) {
    throw ValidationError(fmt::format("sketch plan: need 1 <= s <= d_out, got s={}, d_out={}",
                                      s, d_out));
  }
}

SketchPlan SketchPlan::derive(std::uint64_t seed, std::span<const std::string> layer_names,
                              std::size_t r, std::size_t d_out, std::size_t s) {
  SketchPlan plan;
  plan.r = r;
  plan.d_out = d_out;
  plan.s = s;
  plan.jl_seed = mix64(seed ^ 0x6a6c5f7365656421ULL);
  for (const auto& name : layer_names) plan.layer_seeds[name] = mix64(seed ^ hash_string(name));
  plan.validate();
  return plan;
}

nlohmann::json SketchPlan::to_json() const {
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto& [name, seed] : layer_seeds) seeds[name] = seed;
  return {{"r", r}, {"d_out", d_out}, {"s", s}, {"jl_seed", jl_seed}, {"layer_seeds", seeds},
          {"projection", "gaussian N(0,1/r), " + std::string(Rng::kAlgorithm)},
          {"sparse_jl", "s signed nonzeros per column, splitmix64 hashing, 1/sqrt(s)"}};
}

RowMatrix projection_matrix(std::uint64_t seed, std::size_t r, std::size_t n) {
  Rng rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(r));
  RowMatrix a(r, n);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < n; ++j) a(i, j) = sd * rng.normal();
  }
  return a;
}

RowMatrix row_project(const LayerGradient& grad, const SketchPlan& plan) {
  plan.validate();
  const auto it = plan.layer_seeds.find(grad.name);
  if (it == plan.layer_seeds.end()) {
    throw ValidationError(fmt::format("sketch plan has no seed for layer '{}'", grad.name));
  }
  const RowMatrix a = projection_matrix(it->second, plan.r, static_cast<std::size_t>(grad.matrix.cols()));
  return grad.matrix * a.transpose();
}

std::vector<double> sparse_jl(std::span<const double> v, std::size_t d_out, std::size_t s,
                              std::uint64_t seed) {
  if (d_out < 1 || s < 1 || s > d_out) {
    throw ValidationError(fmt::format("sparse_jl: need 1 <= s <= d_out, got s={}, d_out={}",
                                      s, d_out));
  }
  std::vector<double> out(d_out, 0.0);
  std::vector<std::size_t> rows(s);
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] == 0.0) continue;
    SplitMix h(seed ^ mix64(static_cast<std::uint64_t>(j)));
    for (std::size_t t = 0; t < s; ++t) {
      std::size_t row;
      do {
        row = static_cast<std::size_t>(h.below(d_out));
      } while (std::find(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(t), row) !=
               rows.begin() + static_cast<std::ptrdiff_t>(t));
      rows[t] = row;
      const double sign = (h.next() >> 63) ? -1.0 : 1.0;
      out[row] += sign * v[j];
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(s));
  for (double& x : out) x *= scale;
  return out;
}

std::vector<double> vectorize(const RowMatrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

RowMatrix unvectorize(std::span<const double> v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) {
    throw ValidationError(fmt::format("cannot reshape {} values into {} x {}", v.size(), rows, cols));
  }
  RowMatrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

std::vector<double> sketch_gradients(std::span<const LayerGradient> grads,
                                     const SketchPlan& plan) {
  plan.validate();
  std::vector<double> concat;
  for (const auto& g : grads) {
    const RowMatrix projected = row_project(g, plan);
    concat.insert(concat.end(), projected.data(), projected.data() + projected.size());
  }
  return sparse_jl(concat, plan.d_out, plan.s, plan.jl_seed);
}

nlohmann::json DistortionSummary::to_json() const {
  return {{"m", m},       {"n", n},       {"r", r},     {"trials", trials},
          {"mean", mean}, {"p50", p50},   {"p90", p90}, {"p95", p95},
          {"p99", p99},   {"max", max},   {"row_max_p50", row_max_p50},
          {"row_max_p95", row_max_p95},   {"union_epsilon_p95", union_epsilon_p95}};
}

DistortionSummary lemma1_diagnostic(std::size_t m, std::size_t n, std::size_t r,
                                    std::size_t trials, std::uint64_t seed) {
  if (trials < 100) throw ValidationError("lemma1_diagnostic: need at least 100 trials");
  if (m < 1 || n < 1 || r < 1) throw ValidationError("lemma1_diagnostic: m, n, r must be >= 1");
  Rng rng(seed);
  std::vector<double> total(trials), row_max(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    RowMatrix g(m, n);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    g /= g.norm();
    const RowMatrix a = projection_matrix(rng.next_u64(), r, n);
    const RowMatrix q = g * a.transpose();
    total[t] = std::abs(q.squaredNorm() - 1.0);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < g.rows(); ++k) {
      worst = std::max(worst, std::abs(q.row(k).squaredNorm() - g.row(k).squaredNorm()));
    }
    row_max[t] = worst;
  }
  DistortionSummary s;
  s.m = m;
  s.n = n;
  s.r = r;
  s.trials = trials;
  for (double x : total) s.mean += x;
  s.mean /= static_cast<double>(trials);
  s.p50 = quantile(total, 0.50);
  s.p90 = quantile(total, 0.90);
  s.p95 = quantile(total, 0.95);
  s.p99 = quantile(total, 0.99);
  s.max = *std::max_element(total.begin(), total.end());
  s.row_max_p50 = quantile(row_max, 0.50);
  s.row_max_p95 = quantile(row_max, 0.95);
  s.union_epsilon_p95 = static_cast<double>(m) * s.row_max_p95;
  return s;
}

namespace {

std::uint32_t get_u32(const std::string& bytes, std::size_t& pos, const std::filesystem::path& path) {
  if (pos + 4 > bytes.size()) {
    throw LengthMismatchError(fmt::format("'{}': truncated gradient file", path.string()));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  pos += 4;
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

}  // namespace

std::vector<LayerGradient> load_gradients(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 4 || !std::equal(kGradMagic.begin(), kGradMagic.end(), bytes.begin())) {
    throw FormatError(fmt::format("'{}': not a DGF1 gradient file", path.string()));
  }
  std::size_t pos = 4;
  const std::uint32_t layers = get_u32(bytes, pos, path);
  std::vector<LayerGradient> out;
  out.reserve(layers);
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::uint32_t len = get_u32(bytes, pos, path);
    if (pos + len > bytes.size()) {
      throw LengthMismatchError(fmt::format("'{}': truncated layer name", path.string()));
    }
    LayerGradient g;
    g.name = bytes.substr(pos, len);
    pos += len;
    const std::uint32_t m = get_u32(bytes, pos, path);
    const std::uint32_t n = get_u32(bytes, pos, path);
    if (pos + std::uint64_t{m} * n * 4 > bytes.size()) {
      throw LengthMismatchError(fmt::format("'{}': layer '{}' declares {} x {} values but the file is short",
                                            path.string(), g.name, m, n));
    }
    g.matrix.resize(m, n);
    for (Eigen::Index i = 0; i < g.matrix.size(); ++i) {
      const float f = std::bit_cast<float>(get_u32(bytes, pos, path));
      if (!std::isfinite(f)) {
        throw ValidationError(fmt::format("'{}': layer '{}' has a non-finite value at flat index {}",
                                          path.string(), g.name, i));
      }
      g.matrix.data()[i] = static_cast<double>(f);
    }
    out.push_back(std::move(g));
  }
  if (pos != bytes.size()) {
    throw LengthMismatchError(fmt::format("'{}': {} trailing bytes", path.string(), bytes.size() - pos));
  }
  return out;
}

void save_gradients(std::span<const LayerGradient> grads, const std::filesystem::path& path) {
  std::string out(kGradMagic.begin(), kGradMagic.end());
  put_u32(out, static_cast<std::uint32_t>(grads.size()));
  for (const auto& g : grads) {
    put_u32(out, static_cast<std::uint32_t>(g.name.size()));
    out += g.name;
    put_u32(out, static_cast<std::uint32_t>(g.matrix.rows()));
    put_u32(out, static_cast<std::uint32_t>(g.matrix.cols()));
    for (Eigen::Index i = 0; i < g.matrix.size(); ++i) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(g.matrix.data()[i])));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace dppkit
