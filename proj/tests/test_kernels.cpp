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

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <memory>

#include "dppkit/errors.hpp"
#include "dppkit/kernels.hpp"
#include "dppkit/rng.hpp"
#include "test_util.hpp"

namespace dppkit {
namespace {

std::shared_ptr<const FeatureMatrix> two_axes() {
  RowMatrix v(2, 2);
  v << 1, 0, 0, 1;
  return std::make_shared<const FeatureMatrix>(v);
}

std::shared_ptr<const FeatureMatrix> random_features(std::size_t n, std::size_t d,
                                                     std::uint64_t seed) {
  return std::make_shared<const FeatureMatrix>(test::random_unit_rows(n, d, seed));
}

TEST(Kernel, DiagonalIsOne) {
  const DppKernel k(random_features(5, 4, 1), {});
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(k.entry(i, i), 1.0);
}

TEST(Kernel, OrthogonalPair) {
  const DppKernel k(two_axes(), {});
  EXPECT_NEAR(k.entry(0, 1), std::exp(-2.0), 1e-15);
}

TEST(Kernel, QualityWeighted) {
  const DppKernel k(two_axes(), {}, std::vector<double>{1.0, 1.0}, 0.5);
  EXPECT_DOUBLE_EQ(k.beta(), 0.5);
  EXPECT_NEAR(k.entry(0, 1), std::exp(-2.0) * std::exp(1.0), 1e-15);
  EXPECT_NEAR(k.entry(0, 1), 0.367879, 1e-6);
  EXPECT_NEAR(k.entry(0, 0), std::exp(1.0), 1e-15);
}

TEST(Kernel, RowMatchesEntries) {
  const DppKernel k(random_features(30, 6, 2), {KernelKind::kRbf, 0.7},
                    quality_transform(std::vector<double>(30, 1.0), QualityMode::kMinMax), 0.3);
  for (std::size_t i : {0u, 7u, 29u}) {
    const auto row = k.row(i);
    for (std::size_t j = 0; j < 30; ++j) EXPECT_EQ(row[j], k.entry(i, j));
  }
}

TEST(Kernel, DuplicateRowsGiveQualityProduct) {
  RowMatrix v(3, 2);
  v << 1, 0, 1, 0, 0, 1;
  const std::vector<double> q{0.2, 0.9, 0.5};
  const DppKernel k(std::make_shared<const FeatureMatrix>(v), {}, q, 0.6);
  const double beta = 0.6 / 0.8;
  EXPECT_NEAR(k.row(0)[1], std::exp(beta * (0.2 + 0.9)), 1e-14);
  EXPECT_NEAR(k.row(1)[1], std::exp(2 * beta * 0.9), 1e-14);
}

TEST(Kernel, ExactSymmetry) {
  const std::size_t n = 40;
  Rng rng(5);
  std::vector<double> raw(n);
  for (auto& x : raw) x = rng.normal();
  const DppKernel k(random_features(n, 8, 3), {KernelKind::kRbf, 1.3},
                    quality_transform(raw, QualityMode::kRankNormalize), 0.9);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) ASSERT_EQ(k.entry(i, j), k.entry(j, i));
  }
}

TEST(Kernel, SubmatricesArePsd) {
  Rng rng(11);
  const std::size_t n = 60;
  std::vector<double> raw(n);
  for (auto& x : raw) x = rng.uniform();
  const DppKernel k(random_features(n, 5, 4), {},
                    quality_transform(raw, QualityMode::kRankNormalize), 0.7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t size = 1 + rng.below(8);
    std::vector<std::size_t> subset;
    while (subset.size() < size) {
      const std::size_t c = rng.below(n);
      if (std::find(subset.begin(), subset.end(), c) == subset.end()) subset.push_back(c);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(submatrix(k, subset));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
  }
}

TEST(Kernel, UnitFastPathAgrees) {
  auto f = random_features(50, 12, 6);
  const DppKernel general(f, {KernelKind::kRbf, 2.0, false});
  const DppKernel fast(f, {KernelKind::kRbf, 2.0, true});
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < 50; ++j) {
      EXPECT_NEAR(general.entry(i, j), fast.entry(i, j), 1e-12);
    }
  }
}

TEST(Kernel, UnitFastPathNeedsUnitRows) {
  RowMatrix v(1, 2);
  v << 3, 4;
  EXPECT_THROW(DppKernel(std::make_shared<const FeatureMatrix>(v), {KernelKind::kRbf, 1.0, true}),
               ValidationError);
}

TEST(Kernel, LambdaZeroIsPureSimilarity) {
  auto f = random_features(20, 4, 7);
  const DppKernel plain(f, {});
  const DppKernel weighted(f, {}, std::vector<double>(20, 0.5), 0.0);
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = 0; j < 20; ++j) EXPECT_EQ(plain.entry(i, j), weighted.entry(i, j));
  }
}

TEST(Kernel, LambdaScalesByWeights) {
  auto f = random_features(15, 4, 8);
  std::vector<double> q(15);
  for (std::size_t i = 0; i < 15; ++i) q[i] = 0.1 + 0.05 * static_cast<double>(i);
  const DppKernel plain(f, {});
  for (double lambda : {0.2, 0.5, 0.9}) {
    const DppKernel k(f, {}, q, lambda);
    const double beta = lambda / (2 * (1 - lambda));
    for (std::size_t i = 0; i < 15; ++i) {
      for (std::size_t j = 0; j < 15; ++j) {
        EXPECT_NEAR(k.entry(i, j), plain.entry(i, j) * std::exp(beta * (q[i] + q[j])),
                    1e-13 * k.entry(i, j));
      }
    }
  }
}

TEST(Kernel, RejectsBadArguments) {
  auto f = random_features(3, 2, 9);
  EXPECT_THROW(DppKernel(f, {KernelKind::kRbf, 0.0}), ValidationError);
  EXPECT_THROW(DppKernel(f, {}, std::vector<double>{1, 1, 1}, 1.0), ValidationError);
  EXPECT_THROW(DppKernel(f, {}, std::vector<double>{1, 1, 1}, -0.1), ValidationError);
  EXPECT_THROW(DppKernel(f, {}, std::vector<double>{1, 0, 1}, 0.5), ValidationError);
  EXPECT_THROW(DppKernel(f, {}, std::vector<double>{1, 1}, 0.5), ValidationError);
  const DppKernel k(f, {});
  EXPECT_THROW(k.entry(0, 3), std::out_of_range);
}

TEST(Kernel, LambdaMessagePointsToRank) {
  try {
    DppKernel(random_features(3, 2, 9), {}, std::vector<double>{1, 1, 1}, 1.0);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
  }
}

TEST(Kernel, ScaleMultipliesEverything) {
  auto f = random_features(10, 3, 10);
  const DppKernel a(f, {});
  const DppKernel b(f, {KernelKind::kRbf, 1.0, false, 3.5});
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(b.entry(i, j), 3.5 * a.entry(i, j), 1e-15);
  }
}

TEST(Kernel, DefaultGammas) {
  EXPECT_EQ(default_gamma(Representation::kNormalizedGradient), 1.0);
  EXPECT_EQ(default_gamma(Representation::kEncoderEmbedding), 1.0);
  EXPECT_EQ(default_gamma(Representation::kDecoderEmbedding), 10.0);
  EXPECT_EQ(default_gamma(Representation::kUnnormalizedGradient), 0.01);
}

TEST(Quality, RankNormalize) {
  EXPECT_EQ(quality_transform(std::vector<double>{10, 20, 30}, QualityMode::kRankNormalize),
            (std::vector<double>{1.0 / 3, 2.0 / 3, 1.0}));
  EXPECT_EQ(quality_transform(std::vector<double>{5, 5}, QualityMode::kRankNormalize),
            (std::vector<double>{0.75, 0.75}));
  EXPECT_EQ(quality_transform(std::vector<double>{3, 1, 3, 2}, QualityMode::kRankNormalize),
            (std::vector<double>{0.875, 0.25, 0.875, 0.5}));
}

TEST(Quality, MinMax) {
  const auto q = quality_transform(std::vector<double>{-1, 0, 1}, QualityMode::kMinMax);
  EXPECT_DOUBLE_EQ(q[0], 1e-3);
  EXPECT_DOUBLE_EQ(q[1], 1e-3 + (1 - 1e-3) * 0.5);
  EXPECT_DOUBLE_EQ(q[2], 1.0);
  EXPECT_EQ(quality_transform(std::vector<double>{4, 4}, QualityMode::kMinMax),
            (std::vector<double>{1, 1}));
}

TEST(Quality, Identity) {
  EXPECT_THROW(quality_transform(std::vector<double>{0, 1}, QualityMode::kIdentity),
               ValidationError);
  EXPECT_EQ(quality_transform(std::vector<double>{0.5, 2}, QualityMode::kIdentity),
            (std::vector<double>{0.5, 2}));
}

TEST(Dense, RequiresSymmetry) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 0.5, 0.4, 1;
  EXPECT_THROW(DenseKernel{m}, ValidationError);
  EXPECT_THROW(DenseKernel(Eigen::MatrixXd(2, 3)), ValidationError);
}

TEST(Dense, MaterializeMatchesAndCaps) {
  const DppKernel k(random_features(12, 3, 12), {});
  const DenseKernel d = materialize(k);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(d.entry(i, j), k.entry(i, j));
  }
  EXPECT_THROW(materialize(k, 11), ValidationError);
}

}  // namespace
}  // namespace dppkit
