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

#include "dppkit/kernels.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dppkit/errors.hpp"

namespace dppkit {
namespace {

// Both reductions use four interleaved accumulators in a fixed order, so the
// result is identical for (a, b) and (b, a).
double dot(const double* a, const double* b, std::size_t d) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= d; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < d; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

double squared_distance(const double* a, const double* b, std::size_t d) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= d; k += 4) {
    const double t0 = a[k] - b[k];
    const double t1 = a[k + 1] - b[k + 1];
    const double t2 = a[k + 2] - b[k + 2];
    const double t3 = a[k + 3] - b[k + 3];
    s0 += t0 * t0;
    s1 += t1 * t1;
    s2 += t2 * t2;
    s3 += t3 * t3;
  }
  for (; k < d; ++k) {
    const double t = a[k] - b[k];
    s0 += t * t;
  }
  return (s0 + s1) + (s2 + s3);
}

void check_index(std::size_t i, std::size_t n) {
  if (i >= n) throw std::out_of_range(fmt::format("kernel index {} out of range [0, {})", i, n));
}

}  // namespace

std::string_view to_string(KernelKind kind) {
  return kind == KernelKind::kRbf ? "rbf" : "inner-product";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "rbf") return KernelKind::kRbf;
  if (name == "inner-product" || name == "linear") return KernelKind::kInnerProduct;
  throw ValidationError(fmt::format("unknown kernel kind '{}'", name));
}

void KernelSpec::validate() const {
  if (kind == KernelKind::kRbf && !(gamma > 0.0 && std::isfinite(gamma))) {
    throw ValidationError(fmt::format("rbf kernel needs gamma > 0, got {}", gamma));
  }
  if (!(scale > 0.0 && std::isfinite(scale))) {
    throw ValidationError(fmt::format("kernel scale must be > 0, got {}", scale));
  }
}

double default_gamma(Representation rep) {
  switch (rep) {
    case Representation::kNormalizedGradient:
    case Representation::kEncoderEmbedding:
      return 1.0;
    case Representation::kDecoderEmbedding:
      return 10.0;
    case Representation::kUnnormalizedGradient:
      return 0.01;
  }
  return 1.0;
}

void KernelSource::entries(std::size_t i, std::span<const std::size_t> cols,
                           std::span<double> out) const {
  for (std::size_t k = 0; k < cols.size(); ++k) out[k] = entry(i, cols[k]);
}

std::vector<double> KernelSource::row(std::size_t i) const {
  const std::size_t n = size();
  check_index(i, n);
  std::vector<std::size_t> cols(n);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  std::vector<double> out(n);
  entries(i, cols, out);
  return out;
}

QualityMode parse_quality_mode(std::string_view name) {
  if (name == "rank" || name == "rank-normalize") return QualityMode::kRankNormalize;
  if (name == "minmax" || name == "min-max") return QualityMode::kMinMax;
  if (name == "identity") return QualityMode::kIdentity;
  throw ValidationError(fmt::format("unknown quality mode '{}'", name));
}

std::string_view to_string(QualityMode mode) {
  switch (mode) {
    case QualityMode::kRankNormalize:
      return "rank-normalize";
    case QualityMode::kMinMax:
      return "min-max";
    case QualityMode::kIdentity:
      return "identity";
  }
  return "?";
}

std::vector<double> quality_transform(std::span<const double> raw, QualityMode mode) {
  const std::size_t n = raw.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(raw[i])) {
      throw ValidationError(fmt::format("quality score {} is not finite", i));
    }
  }
  std::vector<double> out(n);
  switch (mode) {
    case QualityMode::kRankNormalize: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
      std::size_t start = 0;
      while (start < n) {
        std::size_t end = start + 1;
        while (end < n && raw[order[end]] == raw[order[start]]) ++end;
        // Ranks start+1 .. end share their average.
        const double avg_rank = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t k = start; k < end; ++k) {
          out[order[k]] = avg_rank / static_cast<double>(n);
        }
        start = end;
      }
      break;
    }
    case QualityMode::kMinMax: {
      if (n == 0) break;
      const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
      const double range = *hi - *lo;
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = range > 0.0 ? kMinMaxFloor + (1.0 - kMinMaxFloor) * (raw[i] - *lo) / range
                             : 1.0;
      }
      break;
    }
    case QualityMode::kIdentity:
      for (std::size_t i = 0; i < n; ++i) {
        if (!(raw[i] > 0.0)) {
          throw ValidationError(
              fmt::format("identity quality requires q > 0, entry {} is {}", i, raw[i]));
        }
        out[i] = raw[i];
      }
      break;
  }
  return out;
}

DppKernel::DppKernel(std::shared_ptr<const FeatureMatrix> features, KernelSpec spec,
                     std::optional<std::vector<double>> quality, double lambda)
    : features_(std::move(features)), spec_(spec), lambda_(lambda) {
  if (!features_) throw ValidationError("DppKernel: null feature matrix");
  spec_.validate();
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    throw ValidationError(fmt::format(
        "lambda must lie in [0, 1), got {}; use the rank strategy for pure-quality selection",
        lambda));
  }
  if (spec_.kind == KernelKind::kRbf && spec_.assume_unit_rows && !features_->normalized()) {
    throw ValidationError("kernel assumes unit rows but the features are not normalized");
  }
  beta_ = lambda / (2.0 * (1.0 - lambda));
  if (quality) {
    if (quality->size() != features_->rows()) {
      throw ValidationError(fmt::format("quality vector has {} entries, expected {}",
                                        quality->size(), features_->rows()));
    }
    weights_.resize(quality->size());
    for (std::size_t i = 0; i < quality->size(); ++i) {
      const double q = (*quality)[i];
      if (!(q > 0.0) || !std::isfinite(q)) {
        throw ValidationError(fmt::format("quality entry {} must be finite and > 0, got {}", i, q));
      }
      weights_[i] = std::exp(beta_ * q);
      if (!std::isfinite(weights_[i])) {
        throw NumericError(fmt::format("quality weight exp(beta q) overflows at entry {}", i));
      }
    }
  }
}

double DppKernel::similarity_unchecked(std::size_t i, std::size_t j) const {
  const std::size_t d = features_->cols();
  const double* xi = features_->row(i).data();
  const double* xj = features_->row(j).data();
  switch (spec_.kind) {
    case KernelKind::kRbf:
      if (i == j) return spec_.scale;
      if (spec_.assume_unit_rows) {
        return spec_.scale * std::exp(2.0 * spec_.gamma * dot(xi, xj, d) - 2.0 * spec_.gamma);
      }
      return spec_.scale * std::exp(-spec_.gamma * squared_distance(xi, xj, d));
    case KernelKind::kInnerProduct:
      return spec_.scale * dot(xi, xj, d);
  }
  return 0.0;
}

double DppKernel::similarity(std::size_t i, std::size_t j) const {
  check_index(i, size());
  check_index(j, size());
  return similarity_unchecked(i, j);
}

double DppKernel::entry(std::size_t i, std::size_t j) const {
  check_index(i, size());
  check_index(j, size());
  // The weight product is formed first so that entry(i, j) == entry(j, i).
  return similarity_unchecked(i, j) * (weight(i) * weight(j));
}

double DppKernel::diagonal(std::size_t i) const { return entry(i, i); }

void DppKernel::entries(std::size_t i, std::span<const std::size_t> cols,
                        std::span<double> out) const {
  const std::size_t n = size();
  check_index(i, n);
  const double wi = weight(i);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const std::size_t j = cols[k];
    check_index(j, n);
    out[k] = similarity_unchecked(i, j) * (wi * weight(j));
  }
}

DenseKernel::DenseKernel(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0) {
    throw ValidationError(fmt::format("dense kernel must be square and non-empty, got {} x {}",
                                      matrix_.rows(), matrix_.cols()));
  }
  for (Eigen::Index i = 0; i < matrix_.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix_.cols(); ++j) {
      if (!std::isfinite(matrix_(i, j))) {
        throw NumericError(fmt::format("dense kernel entry ({}, {}) is not finite", i, j));
      }
      if (matrix_(i, j) != matrix_(j, i)) {
        throw ValidationError(fmt::format("dense kernel is not symmetric at ({}, {})", i, j));
      }
    }
  }
}

double DenseKernel::entry(std::size_t i, std::size_t j) const {
  check_index(i, size());
  check_index(j, size());
  return matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

void DenseKernel::entries(std::size_t i, std::span<const std::size_t> cols,
                          std::span<double> out) const {
  check_index(i, size());
  const auto col = matrix_.col(static_cast<Eigen::Index>(i));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    check_index(cols[k], size());
    out[k] = col(static_cast<Eigen::Index>(cols[k]));
  }
}

DenseKernel materialize(const KernelSource& kernel, std::size_t cap) {
  const std::size_t n = kernel.size();
  if (n > cap) {
    throw ValidationError(
        fmt::format("refusing to materialize a {} x {} kernel (cap {})", n, n, cap));
  }
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = kernel.entry(i, j);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return DenseKernel(std::move(m));
}

Eigen::MatrixXd submatrix(const KernelSource& kernel, std::span<const std::size_t> subset) {
  const auto k = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      const double v = kernel.entry(subset[a], subset[b]);
      m(a, b) = v;
      m(b, a) = v;
    }
  }
  return m;
}

}  // namespace dppkit
