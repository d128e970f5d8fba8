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

#include <cstdio>
#include <set>

#include "dppkit/cli.hpp"
#include "dppkit/diversity.hpp"
#include "dppkit/features.hpp"
#include "dppkit/sketch.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace dppkit {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  ::testing::internal::CaptureStdout();
  ::testing::internal::CaptureStderr();
  const int code = run_cli(args);
  std::fflush(stdout);
  CliRun r{code, ::testing::internal::GetCapturedStdout(), ::testing::internal::GetCapturedStderr()};
  return r;
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

class Cli : public ::testing::Test {
 protected:
  std::string p(const std::string& name) const { return (tmp_ / name).string(); }
  test::TempDir tmp_;
};

TEST_F(Cli, SynthWritesFileAndEcho) {
  const CliRun r = run({"synth", "--kind", "hypersphere", "-n", "1000", "-d", "512", "--seed", "7",
                     "-o", p("ref.dsf")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_features(p("ref.dsf")).rows(), 1000u);
  const auto echo = nlohmann::json::parse(test::slurp(p("ref.dsf.config.json")));
  EXPECT_EQ(echo["command"], "synth");
  EXPECT_EQ(echo["params"]["seed"], 7);
  EXPECT_EQ(echo["rng"], "mt19937_64/polar-normal/v1");
}

TEST_F(Cli, SynthIsDeterministic) {
  ASSERT_EQ(run({"synth", "--kind", "clustered", "-n", "50", "-d", "8", "--seed", "3", "-o", p("a.dsf")}).code, 0);
  ASSERT_EQ(run({"synth", "--kind", "clustered", "-n", "50", "-d", "8", "--seed", "3", "-o", p("b.dsf")}).code, 0);
  EXPECT_EQ(test::slurp(p("a.dsf")), test::slurp(p("b.dsf")));
}

TEST_F(Cli, MissingRequiredFlagIsUsageError) {
  const CliRun r = run({"synth", "-d", "4", "-o", p("x.dsf")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
  EXPECT_EQ(run({"synth", "-n", "4", "-d", "4", "--kind", "cube", "-o", p("x.dsf")}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, ToyThenSketch) {
  ASSERT_EQ(run({"toy", "-n", "100", "--seed", "2", "-o", p("corpus")}).code, 0);
  EXPECT_TRUE(std::filesystem::exists(p("corpus/scores.csv")));
  EXPECT_TRUE(std::filesystem::exists(p("corpus/labels.txt")));
  const CliRun r = run({"sketch", "--grads", p("corpus/grads"), "--r", "32", "--dout", "1024",
                     "-o", p("s.dsf")});
  ASSERT_EQ(r.code, 0) << r.err;
  const FeatureMatrix f = load_features(p("s.dsf"));
  EXPECT_EQ(f.rows(), 100u);
  EXPECT_EQ(f.cols(), 1024u);

  ASSERT_EQ(run({"sketch", "--manifest", p("corpus/manifest.txt"), "--r", "32", "--dout", "1024",
                 "-o", p("m.dsf")}).code, 0);
  EXPECT_EQ(test::slurp(p("s.dsf")), test::slurp(p("m.dsf")));

  ASSERT_EQ(run({"sketch", "--grads", p("corpus/grads"), "--r", "32", "--dout", "1024",
                 "--normalize", "-o", p("n.dsf")}).code, 0);
  const FeatureMatrix n = load_features(p("n.dsf"));
  EXPECT_TRUE(n.normalized());
  EXPECT_TRUE(rows_are_unit(n.values(), 1e-6));

  ASSERT_EQ(run({"--threads", "3", "sketch", "--grads", p("corpus/grads"), "--r", "32", "--dout",
                 "1024", "--normalize", "-o", p("n2.dsf")}).code, 0);
  EXPECT_EQ(test::slurp(p("n.dsf")), test::slurp(p("n2.dsf")));
}

TEST_F(Cli, SketchRejectsInconsistentShapes) {
  std::filesystem::create_directories(p("g"));
  const std::vector<LayerGradient> a{{"W", RowMatrix::Ones(2, 3)}};
  const std::vector<LayerGradient> b{{"W", RowMatrix::Ones(3, 3)}};
  save_gradients(a, p("g/0.dgf"));
  save_gradients(a, p("g/1.dgf"));
  save_gradients(b, p("g/2.dgf"));
  const CliRun r = run({"sketch", "--grads", p("g"), "--dout", "16", "-o", p("s.dsf")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("example 2"), std::string::npos) << r.err;
}

TEST_F(Cli, SelectDppWritesTrace) {
  ASSERT_EQ(run({"synth", "-n", "200", "-d", "16", "-o", p("f.dsf")}).code, 0);
  const CliRun r = run({"select", "--features", p("f.dsf"), "--strategy", "dpp", "--budget", "20%",
                     "--gamma", "1", "--lambda", "0", "--out", p("sel.json"), "--trace", p("t.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "40\n");
  EXPECT_EQ(csv_lines(test::slurp(p("t.csv"))).size(), 41u);
  const auto j = nlohmann::json::parse(test::slurp(p("sel.json")));
  EXPECT_EQ(j["indices"].size(), 40u);
  EXPECT_EQ(j["strategy"]["name"], "dpp");
}

TEST_F(Cli, SelectRankMatchesLibrary) {
  test::spit(p("f.csv"), "1,0\n0,1\n1,1\n2,1\n");
  test::spit(p("s.csv"), "index,n_output_tokens\n0,5\n1,9\n2,9\n3,1\n");
  const CliRun r = run({"select", "--features", p("f.csv"), "--scores", p("s.csv"), "--strategy",
                     "rank", "--rank-col", "n_output_tokens", "--direction", "desc", "--budget",
                     "2", "--out", p("sel.json"), "--indices", p("idx.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(test::slurp(p("idx.txt")), "1\n2\n");
}

TEST_F(Cli, SelectFlagMismatches) {
  ASSERT_EQ(run({"synth", "-n", "20", "-d", "4", "-o", p("f.dsf")}).code, 0);
  const CliRun l = run({"select", "--features", p("f.dsf"), "--strategy", "dpp", "--budget", "5",
                     "--lambda", "1.0", "--out", p("o.json")});
  EXPECT_EQ(l.code, 2);
  EXPECT_NE(l.err.find("rank"), std::string::npos) << l.err;
  EXPECT_EQ(run({"select", "--features", p("f.dsf"), "--strategy", "dpp", "--budget", "5",
                 "--tau", "0.9", "--out", p("o.json")}).code, 2);
  EXPECT_EQ(run({"select", "--features", p("f.dsf"), "--strategy", "random", "--budget", "5",
                 "--lambda", "0.5", "--out", p("o.json")}).code, 2);
  EXPECT_EQ(run({"select", "--features", p("f.dsf"), "--strategy", "dedup", "--budget", "5",
                 "--out", p("o.json")}).code, 2);
  EXPECT_EQ(run({"select", "--features", p("f.dsf"), "--strategy", "random", "--budget", "50",
                 "--out", p("o.json")}).code, 2);
  EXPECT_EQ(run({"select", "--features", p("missing.dsf"), "--strategy", "random", "--budget",
                 "5", "--out", p("o.json")}).code, 1);
}

TEST_F(Cli, DiversityAgainstItself) {
  ASSERT_EQ(run({"synth", "--kind", "clustered", "-n", "150", "-d", "16", "-o", p("f.dsf")}).code, 0);
  const CliRun r = run({"diversity", "--features", p("f.dsf"), "--ref", "file", "--ref-file",
                     p("f.dsf")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0.000000\n");
}

TEST_F(Cli, DiversityOrderingAndCurve) {
  ASSERT_EQ(run({"synth", "--kind", "duplicated", "--dup", "4", "-n", "400", "-d", "64", "-o", p("dup.dsf")}).code, 0);
  ASSERT_EQ(run({"synth", "-n", "400", "-d", "64", "--seed", "5", "-o", p("fresh.dsf")}).code, 0);
  const CliRun a = run({"diversity", "--features", p("dup.dsf"), "--ref-dim", "64", "--out-curve", p("c.csv")});
  const CliRun b = run({"diversity", "--features", p("fresh.dsf"), "--ref-dim", "64"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_GT(std::stod(a.out), std::stod(b.out));
  const auto lines = csv_lines(test::slurp(p("c.csv")));
  ASSERT_EQ(lines.size(), 401u);
  const std::string last = lines.back().substr(lines.back().rfind(',') + 1);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f\n", std::stod(last));
  EXPECT_EQ(a.out, buf);
}

TEST_F(Cli, ReportMergesComparableReports) {
  for (const char* s : {"1", "2", "3"}) {
    ASSERT_EQ(run({"synth", "--kind", "clustered", "-n", "30", "-d", "8", "--seed", s, "-o",
                   p(std::string("f") + s + ".dsf")}).code, 0);
    ASSERT_EQ(run({"diversity", "--features", p(std::string("f") + s + ".dsf"), "--ref-dim", "8",
                   "--out-report", p(std::string("r") + s + ".json")}).code, 0);
  }
  ASSERT_EQ(run({"diversity", "--features", p("f1.dsf"), "--ref-dim", "8", "--gamma", "2",
                 "--out-report", p("g2.json")}).code, 0);
  const CliRun ok = run({"report", p("r1.json"), p("r2.json"), p("r3.json"), "-o", p("all.csv")});
  ASSERT_EQ(ok.code, 0) << ok.err;
  const auto lines = csv_lines(test::slurp(p("all.csv")));
  EXPECT_EQ(lines[0], "dataset,step,gain,ldd_curve");
  EXPECT_EQ(lines.size(), 91u);
  std::set<std::string> groups;
  for (std::size_t i = 1; i < lines.size(); ++i) groups.insert(lines[i].substr(0, lines[i].find(',')));
  EXPECT_EQ(groups, (std::set<std::string>{"f1", "f2", "f3"}));
  EXPECT_EQ(run({"report", p("r1.json"), p("g2.json"), "-o", p("bad.csv")}).code, 2);
  EXPECT_EQ(run({"report", "-o", p("none.csv")}).code, 2);
}

TEST_F(Cli, ReplayReproducesOutputs) {
  ASSERT_EQ(run({"--out-dir", p("first"), "synth", "-n", "60", "-d", "8", "--seed", "4", "-o",
                 "f.dsf"}).code, 0);
  ASSERT_EQ(run({"replay", p("first/f.dsf.config.json"), "--into", p("second")}).code, 0);
  EXPECT_EQ(test::slurp(p("first/f.dsf")), test::slurp(p("second/f.dsf")));
  EXPECT_EQ(run({"replay", p("nothing.json")}).code, 1);
}

}  // namespace
}  // namespace dppkit
