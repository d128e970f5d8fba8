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

#include "dppkit/toymodel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "dppkit/errors.hpp"
#include "dppkit/rng.hpp"

namespace dppkit {
namespace {

void check_tokens(const ToyExample& ex, std::size_t vocab) {
  if (ex.response.empty()) throw ValidationError("toy example has an empty response");
  auto check = [&](const std::vector<int>& toks, const char* what) {
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (toks[t] < 0 || static_cast<std::size_t>(toks[t]) >= vocab) {
        throw ValidationError(fmt::format("{} token {} at position {} outside [0, {})", what,
                                          toks[t], t, vocab));
      }
    }
  };
  check(ex.instruction, "instruction");
  check(ex.response, "response");
}

struct Pass {
  // mean_t (NLL_t - log V); zero for the uniform model.
  double excess_nll = 0.0;
  double el2n = 0.0;
  RowMatrix grad;
};

// One pass over the response positions. With `conditioned` false the
// instruction is dropped from the context.
Pass run(const ToyModel& model, const ToyExample& ex, bool conditioned, bool want_grad) {
  const std::size_t vocab = model.vocab_size();
  const std::size_t fdim = model.feature_dim();
  const RowMatrix& w = model.weights();
  const RowMatrix& e = model.embeddings();
  const double log_v = std::log(static_cast<double>(vocab));

  Eigen::RowVectorXd ctx_sum = e.row(static_cast<Eigen::Index>(vocab));
  std::size_t ctx_len = 1;
  if (conditioned) {
    for (int tok : ex.instruction) {
      ctx_sum += e.row(tok);
      ++ctx_len;
    }
  }
  Pass out;
  if (want_grad) out.grad = RowMatrix::Zero(static_cast<Eigen::Index>(vocab), static_cast<Eigen::Index>(fdim));
  Eigen::VectorXd logits(vocab), p(vocab);
  for (int y : ex.response) {
    const Eigen::VectorXd f = (ctx_sum / static_cast<double>(ctx_len)).transpose();
    logits.noalias() = w * f;
    const double mx = logits.maxCoeff();
    p = (logits.array() - mx).exp();
    const double z = p.sum();
    p /= z;
    out.excess_nll += (std::log(z) - (logits(y) - mx)) - log_v;
    double sq = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) {
      const double r = p(static_cast<Eigen::Index>(v)) - (static_cast<int>(v) == y ? 1.0 : 0.0);
      sq += r * r;
    }
    out.el2n += std::sqrt(sq);
    if (want_grad) {
      Eigen::VectorXd resid = -p;
      resid(y) += 1.0;
      out.grad.noalias() += resid * f.transpose();
    }
    ctx_sum += e.row(y);
    ++ctx_len;
  }
  const auto t = static_cast<double>(ex.response.size());
  out.excess_nll /= t;
  out.el2n /= t;
  if (want_grad) out.grad /= t;
  return out;
}

double perplexity_of(const Pass& pass, std::size_t vocab) {
  // exp(mean NLL) written relative to the uniform baseline log V.
  return static_cast<double>(vocab) * std::exp(pass.excess_nll);
}

}  // namespace

ToyModel::ToyModel(RowMatrix weights, RowMatrix embeddings)
    : weights_(std::move(weights)), embeddings_(std::move(embeddings)) {
  if (weights_.rows() < 1 || weights_.cols() < 1) {
    throw ValidationError("toy model needs V >= 1 and F >= 1");
  }
  if (embeddings_.rows() != weights_.rows() + 1 || embeddings_.cols() != weights_.cols()) {
    throw ValidationError(fmt::format("embedding table must be {} x {}, got {} x {}",
                                      weights_.rows() + 1, weights_.cols(), embeddings_.rows(),
                                      embeddings_.cols()));
  }
  if (!weights_.allFinite() || !embeddings_.allFinite()) {
    throw ValidationError("toy model parameters must be finite");
  }
}

ToyModel ToyModel::with_weights(RowMatrix weights) const {
  return ToyModel(std::move(weights), embeddings_);
}

ToyModel make_toy_model(std::size_t vocab, std::size_t feature_dim, std::uint64_t seed,
                        double weight_scale) {
  Rng rng(seed);
  RowMatrix emb(vocab + 1, feature_dim);
  for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = rng.normal();
  RowMatrix w(vocab, feature_dim);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = weight_scale * rng.normal();
  return ToyModel(std::move(w), std::move(emb));
}

LossAndGrad loss_and_grad(const ToyModel& model, const ToyExample& ex) {
  check_tokens(ex, model.vocab_size());
  Pass pass = run(model, ex, true, true);
  LossAndGrad out;
  out.loss = -(pass.excess_nll + std::log(static_cast<double>(model.vocab_size())));
  out.grad.name = "W";
  out.grad.matrix = std::move(pass.grad);
  return out;
}

QualityScores quality_scores(const ToyModel& model, const ToyExample& ex) {
  check_tokens(ex, model.vocab_size());
  const Pass cond = run(model, ex, true, true);
  const Pass uncond = run(model, ex, false, false);
  QualityScores s;
  s.grad_norm = cond.grad.norm();
  s.perplexity = perplexity_of(cond, model.vocab_size());
  s.ifd = s.perplexity / perplexity_of(uncond, model.vocab_size());
  s.el2n = cond.el2n;
  s.n_input_tokens = static_cast<double>(ex.instruction.size());
  s.n_output_tokens = static_cast<double>(ex.response.size());
  s.n_total_tokens = s.n_input_tokens + s.n_output_tokens;
  return s;
}

std::vector<std::string> quality_score_names() {
  return {"grad_norm", "perplexity", "ifd", "el2n",
          "n_input_tokens", "n_output_tokens", "n_total_tokens"};
}

ScoreTable score_corpus(const ToyModel& model, std::span<const ToyExample> examples) {
  const std::size_t n = examples.size();
  std::vector<std::vector<double>> cols(7, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const QualityScores s = quality_scores(model, examples[i]);
    cols[0][i] = s.grad_norm;
    cols[1][i] = s.perplexity;
    cols[2][i] = s.ifd;
    cols[3][i] = s.el2n;
    cols[4][i] = s.n_input_tokens;
    cols[5][i] = s.n_output_tokens;
    cols[6][i] = s.n_total_tokens;
  }
  ScoreTable table(n);
  const auto names = quality_score_names();
  for (std::size_t c = 0; c < names.size(); ++c) table.add_column(names[c], std::move(cols[c]));
  return table;
}

ToyCorpus make_toy_corpus(std::size_t n, std::uint64_t seed, double redundancy,
                          const ToyCorpusConfig& cfg) {
  if (n < 1) throw ValidationError("toy corpus needs n >= 1");
  if (!(redundancy >= 0.0 && redundancy <= 1.0)) {
    throw ValidationError(fmt::format("redundancy must lie in [0, 1], got {}", redundancy));
  }
  if (cfg.vocab < 2 || cfg.pool_members < 1 || cfg.max_pool_templates < 1 ||
      cfg.instruction_min > cfg.instruction_max || cfg.pool_response_min < 1 ||
      cfg.pool_response_min > cfg.pool_response_max || cfg.unique_response_min < 1 ||
      cfg.unique_response_min > cfg.unique_response_max) {
    throw ValidationError("invalid toy corpus configuration");
  }
  Rng rng(seed);
  auto length = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
  };
  auto tokens = [&](std::size_t len) {
    std::vector<int> t(len);
    for (auto& x : t) x = static_cast<int>(rng.below(cfg.vocab));
    return t;
  };
  auto mutate = [&](std::vector<int> t) {
    for (auto& x : t) {
      if (rng.uniform() < cfg.mutation_rate) x = static_cast<int>(rng.below(cfg.vocab));
    }
    return t;
  };

  ToyCorpus corpus;
  const auto n_redundant = static_cast<std::size_t>(std::llround(redundancy * static_cast<double>(n)));
  const std::size_t n_pool =
      n_redundant == 0
          ? 0
          : std::min(cfg.max_pool_templates, (n_redundant + cfg.pool_members - 1) / cfg.pool_members);
  std::vector<ToyExample> pool(n_pool);
  for (auto& t : pool) {
    t.instruction = tokens(length(cfg.instruction_min, cfg.instruction_max));
    t.response = tokens(length(cfg.pool_response_min, cfg.pool_response_max));
  }
  std::vector<ToyExample> examples;
  std::vector<std::size_t> labels;
  examples.reserve(n);
  labels.reserve(n);
  for (std::size_t i = 0; i < n_redundant; ++i) {
    const std::size_t t = i % n_pool;
    examples.push_back({mutate(pool[t].instruction), mutate(pool[t].response)});
    labels.push_back(t);
  }
  for (std::size_t i = n_redundant; i < n; ++i) {
    ToyExample ex;
    ex.instruction = tokens(length(cfg.instruction_min, cfg.instruction_max));
    ex.response = tokens(length(cfg.unique_response_min, cfg.unique_response_max));
    examples.push_back(std::move(ex));
    labels.push_back(n_pool + (i - n_redundant));
  }
  // Fisher-Yates with the portable bounded draw.
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(examples[i - 1], examples[j]);
    std::swap(labels[i - 1], labels[j]);
  }
  corpus.examples = std::move(examples);
  corpus.labels = std::move(labels);
  corpus.n_templates = n_pool + (n - n_redundant);
  corpus.n_redundant = n_redundant;
  return corpus;
}

}  // namespace dppkit
