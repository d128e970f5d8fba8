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

#include <cmath>
#include <limits>
#include <set>

#include "dppkit/errors.hpp"
#include "dppkit/features.hpp"
#include "test_util.hpp"

namespace dppkit {
namespace {

using test::TempDir;

std::string dsf1_header(std::uint32_t n, std::uint32_t d, unsigned char flag = 0) {
  std::string h = "DSF1";
  for (std::uint32_t v : {n, d}) {
    for (int k = 0; k < 4; ++k) h.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  }
  h.push_back(static_cast<char>(flag));
  h.append(3, '\0');
  return h;
}

std::string f32(std::initializer_list<float> vals) {
  std::string out;
  for (float v : vals) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
  }
  return out;
}

TEST(Features, LoadsUnitRowsAndSetsFlag) {
  TempDir tmp;
  test::spit(tmp / "a.dsf", dsf1_header(2, 3) + f32({1, 0, 0, 0, 1, 0}));
  const FeatureMatrix m = load_features(tmp / "a.dsf");
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_TRUE(m.normalized());
  EXPECT_EQ(m(1, 1), 1.0);
}

TEST(Features, FlagFollowsContentNotHeader) {
  TempDir tmp;
  test::spit(tmp / "a.dsf", dsf1_header(1, 2, 1) + f32({3, 4}));
  EXPECT_FALSE(load_features(tmp / "a.dsf").normalized());
}

TEST(Features, NanNamesRow) {
  TempDir tmp;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  test::spit(tmp / "a.dsf", dsf1_header(3, 2) + f32({1, 0, 0, 1, 0, nan}));
  try {
    load_features(tmp / "a.dsf");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Features, TruncatedPayload) {
  TempDir tmp;
  test::spit(tmp / "a.dsf", dsf1_header(5, 2) + f32({1, 0, 0, 1, 1, 0, 0, 1}));
  EXPECT_THROW(load_features(tmp / "a.dsf"), LengthMismatchError);
}

TEST(Features, MalformedHeader) {
  TempDir tmp;
  test::spit(tmp / "a.dsf", "DSF1\x01\x00");
  EXPECT_THROW(load_features(tmp / "a.dsf"), FormatError);
  test::spit(tmp / "b.dsf", dsf1_header(0, 3));
  EXPECT_THROW(load_features(tmp / "b.dsf"), FormatError);
  std::string bad = dsf1_header(1, 1) + f32({1});
  bad[13] = 7;
  test::spit(tmp / "c.dsf", bad);
  EXPECT_THROW(load_features(tmp / "c.dsf"), FormatError);
}

TEST(Features, CsvFallback) {
  TempDir tmp;
  test::spit(tmp / "a.csv", "3,4\n0.6, 0.8\n");
  const FeatureMatrix m = load_features(tmp / "a.csv");
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_FALSE(m.normalized());
  EXPECT_DOUBLE_EQ(m(0, 1), 4.0);
  test::spit(tmp / "b.csv", "1,2\n3\n");
  EXPECT_THROW(load_features(tmp / "b.csv"), FormatError);
  test::spit(tmp / "c.csv", "1,nan\n");
  EXPECT_THROW(load_features(tmp / "c.csv"), ValidationError);
}

TEST(Features, RoundTripIsFloat32) {
  TempDir tmp;
  RowMatrix v(2, 2);
  v << 0.1, 0.2, -1e-3, 7.0;
  save_features(FeatureMatrix(v), tmp / "a.dsf");
  const FeatureMatrix back = load_features(tmp / "a.dsf");
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_EQ(back.values().data()[i], static_cast<double>(static_cast<float>(v.data()[i])));
  }
}

TEST(Features, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(FeatureMatrix(RowMatrix(0, 3)), ValidationError);
  RowMatrix v(1, 2);
  v << 1.0, std::numeric_limits<double>::infinity();
  EXPECT_THROW(FeatureMatrix{v}, ValidationError);
}

TEST(Normalize, ThreeFourFive) {
  RowMatrix v(1, 2);
  v << 3, 4;
  const FeatureMatrix m = normalize_rows(FeatureMatrix(v));
  EXPECT_DOUBLE_EQ(m(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(m(0, 1), 0.8);
  EXPECT_TRUE(m.normalized());
}

TEST(Normalize, Idempotent) {
  const FeatureMatrix a(test::random_unit_rows(20, 7, 3));
  const FeatureMatrix b = normalize_rows(a);
  EXPECT_TRUE(b.normalized());
  EXPECT_LE((a.values() - b.values()).cwiseAbs().maxCoeff(), 4e-16);
}

TEST(Normalize, ZeroRow) {
  RowMatrix v = RowMatrix::Ones(3, 2);
  v.row(1).setZero();
  try {
    normalize_rows(FeatureMatrix(v));
    FAIL();
  } catch (const DegenerateInputError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(Synth, HypersphereIsUnitAndSeeded) {
  SynthSpec s{SynthKind::kHypersphere, 50, 9, 1, 0.0, 1, 7};
  const FeatureMatrix a = synthesize(s);
  EXPECT_TRUE(a.normalized());
  EXPECT_EQ(a.values(), synthesize(s).values());
  s.seed = 8;
  EXPECT_NE(a.values(), synthesize(s).values());
}

TEST(Synth, DuplicatedBlocks) {
  const SynthSpec s{SynthKind::kDuplicated, 100, 16, 1, 0.0, 5, 1};
  const FeatureMatrix m = synthesize(s);
  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    distinct.insert(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  }
  EXPECT_EQ(distinct.size(), 20u);
  EXPECT_EQ(m.values().row(0), m.values().row(4));
  EXPECT_NE(m.values().row(4), m.values().row(5));
}

TEST(Synth, ClusterSpreadGrowsWithScale) {
  auto mean_within = [](double scale) {
    const FeatureMatrix m = synthesize({SynthKind::kClusteredMixture, 200, 32, 4, scale, 1, 3});
    double sum = 0;
    int count = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = i + 4; j < m.rows(); j += 4) {
        sum += (m.values().row(i) - m.values().row(j)).norm();
        ++count;
      }
    }
    return sum / count;
  };
  EXPECT_LT(mean_within(0.05), mean_within(0.2));
  EXPECT_LT(mean_within(0.2), mean_within(0.5));
}

TEST(Synth, InvalidSpecs) {
  EXPECT_THROW((SynthSpec{SynthKind::kHypersphere, 0, 3, 1, 0, 1, 0}.validate()), ValidationError);
  EXPECT_THROW((SynthSpec{SynthKind::kClusteredMixture, 10, 3, 0, 0.1, 1, 0}.validate()),
               ValidationError);
  EXPECT_THROW((SynthSpec{SynthKind::kClusteredMixture, 10, 3, 2, -1, 1, 0}.validate()),
               ValidationError);
  EXPECT_THROW((SynthSpec{SynthKind::kDuplicated, 10, 3, 1, 0, 0, 0}.validate()), ValidationError);
  EXPECT_THROW(parse_synth_kind("cube"), ValidationError);
}

TEST(Scores, ColumnsAndRoundTrip) {
  TempDir tmp;
  ScoreTable t(3);
  t.add_column("a", {1.5, -2, 1e-300});
  t.add_column("b", {0.1, 0.2, 0.3});
  EXPECT_THROW(t.add_column("a", {1, 2, 3}), ValidationError);
  EXPECT_THROW(t.add_column("c", {1, 2}), LengthMismatchError);
  EXPECT_THROW(t.add_column("d", {1, std::nan(""), 2}), ValidationError);
  EXPECT_THROW(t.column("zz"), ValidationError);
  save_scores(t, tmp / "s.csv");
  const ScoreTable back = load_scores(tmp / "s.csv", 3);
  EXPECT_EQ(back.names(), t.names());
  EXPECT_EQ(back.column("a"), t.column("a"));
  EXPECT_EQ(back.column("b"), t.column("b"));
  EXPECT_THROW(load_scores(tmp / "s.csv", 4), LengthMismatchError);
}

TEST(Scores, JsonLines) {
  TempDir tmp;
  test::spit(tmp / "s.jsonl", "{\"index\":0,\"q\":2}\n{\"index\":1,\"q\":3.5}\n");
  const ScoreTable t = load_scores(tmp / "s.jsonl", 2);
  EXPECT_EQ(t.column("q"), (std::vector<double>{2, 3.5}));
  test::spit(tmp / "bad.jsonl", "{\"q\":2}\n{\"r\":3}\n");
  EXPECT_THROW(load_scores(tmp / "bad.jsonl", 2), FormatError);
}

TEST(Scores, CsvIndexMustMatchRow) {
  TempDir tmp;
  test::spit(tmp / "s.csv", "index,q\n1,2\n0,3\n");
  EXPECT_THROW(load_scores(tmp / "s.csv", 2), FormatError);
}

}  // namespace
}  // namespace dppkit
