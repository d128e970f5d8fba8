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

#ifndef DPPKIT_TOYMODEL_HPP_
#define DPPKIT_TOYMODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dppkit/features.hpp"
#include "dppkit/sketch.hpp"

namespace dppkit {

struct ToyExample {
  std::vector<int> instruction;
  std::vector<int> response;  // non-empty
};

// A one-layer conditional language model over a vocabulary of size V:
//
//   f(ctx)  = mean of E[bos] and E[tok] for tok in ctx        (in R^F)
//   p(.|ctx) = softmax(W f(ctx))                               (W is V x F)
//
// The embedding table E is fixed; W is the only trainable weight and the
// one whose gradient serves as the example's representation.
class ToyModel {
 public:
  ToyModel(RowMatrix weights, RowMatrix embeddings);

  std::size_t vocab_size() const { return static_cast<std::size_t>(weights_.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(weights_.cols()); }
  const RowMatrix& weights() const { return weights_; }
  // (V + 1) x F; the last row is the begin-of-sequence embedding.
  const RowMatrix& embeddings() const { return embeddings_; }

  ToyModel with_weights(RowMatrix weights) const;

 private:
  RowMatrix weights_;
  RowMatrix embeddings_;
};

// Random model: W entries N(0, weight_scale^2), embeddings N(0, 1).
ToyModel make_toy_model(std::size_t vocab, std::size_t feature_dim, std::uint64_t seed,
                        double weight_scale = 0.5);

struct LossAndGrad {
  // Mean log-likelihood of the response tokens given the instruction and
  // the preceding response tokens.
  double loss = 0.0;
  // d loss / d W, named "W".
  LayerGradient grad;
};

LossAndGrad loss_and_grad(const ToyModel& model, const ToyExample& ex);

struct QualityScores {
  double grad_norm = 0.0;   // ||vec(dl/dW)||_2
  double perplexity = 0.0;  // exp(-loss)
  double ifd = 0.0;         // perplexity with instruction / without
  double el2n = 0.0;        // mean_t ||p_t - onehot(y_t)||_2
  double n_input_tokens = 0.0;
  double n_output_tokens = 0.0;
  double n_total_tokens = 0.0;
};

QualityScores quality_scores(const ToyModel& model, const ToyExample& ex);

// Column names emitted by score_corpus, in order.
std::vector<std::string> quality_score_names();

// One row per example with every QualityScores field as a column.
ScoreTable score_corpus(const ToyModel& model, std::span<const ToyExample> examples);

struct ToyCorpusConfig {
  std::size_t vocab = 64;
  // Members per redundant template; the number of redundant templates is
  // ceil(n_redundant / pool_members), capped at max_pool_templates.
  std::size_t pool_members = 20;
  std::size_t max_pool_templates = 50;
  std::size_t instruction_min = 4, instruction_max = 12;
  // Redundant templates get long responses, unique ones shorter ones.
  std::size_t pool_response_min = 20, pool_response_max = 32;
  std::size_t unique_response_min = 4, unique_response_max = 20;
  // Per-token substitution probability for near-duplicates.
  double mutation_rate = 0.05;
};

struct ToyCorpus {
  std::vector<ToyExample> examples;
  // Template (cluster) id per example.
  std::vector<std::size_t> labels;
  std::size_t n_templates = 0;
  std::size_t n_redundant = 0;
};

// round(redundancy * n) examples are near-duplicates drawn from a small
// pool of templates; every other example has a template of its own. The
// example order is shuffled.
ToyCorpus make_toy_corpus(std::size_t n, std::uint64_t seed, double redundancy,
                          const ToyCorpusConfig& config = {});

}  // namespace dppkit

#endif  // DPPKIT_TOYMODEL_HPP_
