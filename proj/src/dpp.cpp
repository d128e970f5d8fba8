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

#include "dppkit/dpp.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dppkit/errors.hpp"
#include "dppkit/parallel.hpp"

namespace dppkit {

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kBudgetReached:
      return "budget-reached";
    case StopReason::kVarianceFloor:
      return "variance-floor";
    case StopReason::kExhausted:
      return "exhausted";
  }
  return "?";
}

GreedyTrace greedy_map(const KernelSource& kernel, const Budget& budget, int threads) {
  const std::size_t n = kernel.size();
  if (n == 0) throw ValidationError("greedy_map: empty dataset");
  if (!(budget.variance_floor > 0.0)) {
    throw ValidationError("greedy_map: variance floor must be positive");
  }
  const std::size_t target = budget.run_to_exhaustion ? n : budget.m;
  if (target < 1 || target > n) {
    throw ValidationError(fmt::format("greedy_map: budget {} outside [1, {}]", target, n));
  }
  const double floor = budget.variance_floor;

  // Per-candidate state lives in compact arrays indexed by position p; the
  // selected candidate is swapped with the last active one, so positions
  // shift but every per-candidate computation is position independent.
  std::vector<std::size_t> cand(n);
  std::iota(cand.begin(), cand.end(), std::size_t{0});
  std::vector<double> d2(n);
  std::vector<unsigned char> at_floor(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = kernel.diagonal(i);
    if (!std::isfinite(v)) {
      throw NumericError(fmt::format("greedy_map: kernel entry ({}, {}) is not finite", i, i));
    }
    d2[i] = v;
    if (v < floor) {
      d2[i] = floor;
      at_floor[i] = 1;
    }
  }

  // chol[k][p] is the k-th Cholesky coefficient of the candidate at p.
  std::vector<std::vector<double>> chol;
  chol.reserve(target);
  std::vector<double> lrow(n), acc(n), cj;
  cj.reserve(target);

  GreedyTrace trace;
  trace.selected.reserve(target);
  trace.gains.reserve(target);
  trace.cum_logdet.reserve(target);
  trace.clamped.reserve(target);
  trace.stop_reason = budget.run_to_exhaustion ? StopReason::kExhausted
                                               : StopReason::kBudgetReached;
  std::size_t active = n;
  double running = 0.0;

  for (std::size_t it = 0; it < target; ++it) {
    std::size_t best = 0;
    for (std::size_t p = 1; p < active; ++p) {
      if (d2[p] > d2[best] || (d2[p] == d2[best] && cand[p] < cand[best])) best = p;
    }
    if (budget.stop_on_floor && at_floor[best]) {
      trace.stop_reason = StopReason::kVarianceFloor;
      break;
    }
    const std::size_t j = cand[best];
    const double dj2 = d2[best];
    const double gain = std::log(dj2);
    running += gain;
    trace.selected.push_back(j);
    trace.gains.push_back(gain);
    trace.cum_logdet.push_back(running);
    trace.clamped.push_back(at_floor[best]);
    if (at_floor[best]) ++trace.clamped_steps;

    cj.clear();
    for (std::size_t k = 0; k < it; ++k) cj.push_back(chol[k][best]);

    const std::size_t last = active - 1;
    cand[best] = cand[last];
    d2[best] = d2[last];
    at_floor[best] = at_floor[last];
    for (std::size_t k = 0; k < it; ++k) chol[k][best] = chol[k][last];
    active = last;
    if (it + 1 == target || active == 0) break;

    const double dj = std::sqrt(dj2);
    chol.emplace_back(active);
    std::vector<double>& fresh = chol.back();
    const std::span<const std::size_t> cols(cand.data(), active);

    parallel_for(active, threads, [&](std::size_t b, std::size_t e) {
      kernel.entries(j, cols.subspan(b, e - b), std::span<double>(lrow.data() + b, e - b));
      std::fill(acc.begin() + static_cast<std::ptrdiff_t>(b),
                acc.begin() + static_cast<std::ptrdiff_t>(e), 0.0);
      for (std::size_t k = 0; k < it; ++k) {
        const double c = cj[k];
        const double* row = chol[k].data();
        for (std::size_t p = b; p < e; ++p) acc[p] += c * row[p];
      }
      for (std::size_t p = b; p < e; ++p) {
        const double ep = (lrow[p] - acc[p]) / dj;
        fresh[p] = ep;
        d2[p] -= ep * ep;
        if (!(d2[p] >= floor)) {
          d2[p] = floor;
          at_floor[p] = 1;
        }
      }
    });

    for (std::size_t p = 0; p < active; ++p) {
      if (!std::isfinite(lrow[p])) {
        throw NumericError(fmt::format("greedy_map: kernel entry ({}, {}) is not finite", j,
                                       cand[p]));
      }
    }
  }
  return trace;
}

namespace {

double log_det_or_neg_inf(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const auto diag = llt.matrixLLT().diagonal();
  double s = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0)) return -std::numeric_limits<double>::infinity();
    s += std::log(diag(i));
  }
  return 2.0 * s;
}

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

}  // namespace

std::vector<std::size_t> brute_force_map(const KernelSource& kernel, std::size_t m) {
  const std::size_t n = kernel.size();
  if (m < 1 || m > n) {
    throw ValidationError(fmt::format("brute_force_map: m = {} outside [1, {}]", m, n));
  }
  if (binomial(n, m) > kBruteForceLimit) {
    throw ValidationError(fmt::format(
        "brute_force_map: C({}, {}) subsets exceeds the limit of {}", n, m, kBruteForceLimit));
  }
  const Eigen::MatrixXd full = materialize(kernel).matrix();
  std::vector<std::size_t> comb(m);
  std::iota(comb.begin(), comb.end(), std::size_t{0});
  std::vector<std::size_t> best = comb;
  double best_value = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  Eigen::MatrixXd sub(m, m);
  while (true) {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            full(static_cast<Eigen::Index>(comb[a]), static_cast<Eigen::Index>(comb[b]));
      }
    }
    const double v = log_det_or_neg_inf(sub);
    // Lexicographic enumeration plus a strict comparison keeps the smallest
    // set among ties.
    if (!have_best || v > best_value) {
      best_value = v;
      best = comb;
      have_best = true;
    }
    // Next combination in lexicographic order.
    std::size_t i = m;
    while (i > 0 && comb[i - 1] == n - m + (i - 1)) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t k = i; k < m; ++k) comb[k] = comb[k - 1] + 1;
  }
  return best;
}

LogDet logdet_direct(const KernelSource& kernel, std::span<const std::size_t> subset) {
  if (subset.size() > kMaterializeCap) {
    throw ValidationError(fmt::format("logdet_direct: subset of {} exceeds cap {}",
                                      subset.size(), kMaterializeCap));
  }
  if (subset.empty()) return {};
  Eigen::MatrixXd m = submatrix(kernel, subset);
  LogDet out;
  out.value = log_det_or_neg_inf(m);
  if (std::isfinite(out.value)) return out;
  m.diagonal().array() += kMaxJitter;
  out.jitter = kMaxJitter;
  out.value = log_det_or_neg_inf(m);
  if (!std::isfinite(out.value)) {
    throw NumericError(fmt::format(
        "logdet_direct: {} x {} sub-matrix is not positive definite even with jitter {}",
        subset.size(), subset.size(), kMaxJitter));
  }
  return out;
}

void write_trace_csv(const GreedyTrace& trace, const std::filesystem::path& path) {
  try {
    auto out = fmt::output_file(path.string());
    out.print("step,index,gain,cum_logdet,clamped\n");
    for (std::size_t k = 0; k < trace.size(); ++k) {
      out.print("{},{},{},{},{}\n", k + 1, trace.selected[k], trace.gains[k],
                trace.cum_logdet[k], static_cast<int>(trace.clamped[k]));
    }
  } catch (const std::system_error& e) {
    throw IoError(fmt::format("cannot write '{}': {}", path.string(), e.what()));
  }
}

}  // namespace dppkit
