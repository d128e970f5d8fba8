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

#ifndef DPPKIT_KERNELS_HPP_
#define DPPKIT_KERNELS_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dppkit/features.hpp"

namespace dppkit {

enum class KernelKind { kRbf, kInnerProduct };

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view name);

// Similarity function k(x_i, x_j).
//
//   rbf:           scale * exp(-gamma * |x_i - x_j|^2)
//   rbf, unit:     scale * exp(2 gamma x_i.x_j - 2 gamma)   (rows assumed unit)
//   inner-product: scale * x_i.x_j
//
// The unit-row form keeps the exp(-2 gamma) constant so both rbf paths give
// the same matrix and K_ii = scale. The inner-product kernel has rank <= D and
// is only positive definite for subsets no larger than that; it exists for
// testing, not for selecting large subsets.
struct KernelSpec {
  KernelKind kind = KernelKind::kRbf;
  double gamma = 1.0;
  bool assume_unit_rows = false;
  double scale = 1.0;

  void validate() const;
  bool operator==(const KernelSpec&) const = default;
};

// Representation families with their customary rbf bandwidths.
enum class Representation {
  kNormalizedGradient,    // gamma = 1
  kEncoderEmbedding,      // gamma = 1
  kDecoderEmbedding,      // gamma = 10
  kUnnormalizedGradient,  // gamma = 0.01
};

double default_gamma(Representation rep);

// Default size cap for materializing a full N x N kernel.
inline constexpr std::size_t kMaterializeCap = 20000;

// Read-only access to a symmetric positive semi-definite N x N matrix.
class KernelSource {
 public:
  virtual ~KernelSource() = default;

  virtual std::size_t size() const = 0;
  virtual double entry(std::size_t i, std::size_t j) const = 0;
  virtual double diagonal(std::size_t i) const { return entry(i, i); }

  // out[k] = entry(i, cols[k]).
  virtual void entries(std::size_t i, std::span<const std::size_t> cols,
                       std::span<double> out) const;

  // Full row i.
  std::vector<double> row(std::size_t i) const;
};

// Maps raw scores onto positive values usable as a quality vector.
enum class QualityMode {
  kRankNormalize,  // fractional rank in (0, 1], ties get the average rank
  kMinMax,         // affine map onto [1e-3, 1]
  kIdentity,       // unchanged; every entry must be > 0
};

inline constexpr double kMinMaxFloor = 1e-3;

QualityMode parse_quality_mode(std::string_view name);
std::string_view to_string(QualityMode mode);

std::vector<double> quality_transform(std::span<const double> raw, QualityMode mode);

// Quality-weighted DPP kernel L = diag(exp(beta q)) K diag(exp(beta q)) with
// beta = lambda / (2 (1 - lambda)). Entries are computed on demand from the
// feature rows; nothing N x N is stored.
class DppKernel : public KernelSource {
 public:
  DppKernel(std::shared_ptr<const FeatureMatrix> features, KernelSpec spec,
            std::optional<std::vector<double>> quality = std::nullopt,
            double lambda = 0.0);

  std::size_t size() const override { return features_->rows(); }
  double entry(std::size_t i, std::size_t j) const override;
  double diagonal(std::size_t i) const override;
  void entries(std::size_t i, std::span<const std::size_t> cols,
               std::span<double> out) const override;

  const FeatureMatrix& features() const { return *features_; }
  const KernelSpec& spec() const { return spec_; }
  double lambda() const { return lambda_; }
  double beta() const { return beta_; }
  bool has_quality() const { return !weights_.empty(); }
  // exp(beta q_i); empty when no quality vector was given.
  std::span<const double> quality_weights() const { return weights_; }

  // K_ij, without quality weighting.
  double similarity(std::size_t i, std::size_t j) const;

 private:
  double similarity_unchecked(std::size_t i, std::size_t j) const;
  double weight(std::size_t i) const { return weights_.empty() ? 1.0 : weights_[i]; }

  std::shared_ptr<const FeatureMatrix> features_;
  KernelSpec spec_;
  double lambda_;
  double beta_;
  std::vector<double> weights_;
};

// An explicit matrix; used for small instances and tests.
class DenseKernel : public KernelSource {
 public:
  // Requires a square, finite, exactly symmetric matrix.
  explicit DenseKernel(Eigen::MatrixXd matrix);

  std::size_t size() const override { return static_cast<std::size_t>(matrix_.rows()); }
  double entry(std::size_t i, std::size_t j) const override;
  void entries(std::size_t i, std::span<const std::size_t> cols,
               std::span<double> out) const override;

  const Eigen::MatrixXd& matrix() const { return matrix_; }

 private:
  Eigen::MatrixXd matrix_;
};

// Copies the whole kernel into memory. Throws ValidationError if
// size() > cap.
DenseKernel materialize(const KernelSource& kernel, std::size_t cap = kMaterializeCap);

// L_Y for the given index list, in that order.
Eigen::MatrixXd submatrix(const KernelSource& kernel, std::span<const std::size_t> subset);

}  // namespace dppkit

#endif  // DPPKIT_KERNELS_HPP_
