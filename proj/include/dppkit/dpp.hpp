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

#ifndef DPPKIT_DPP_HPP_
#define DPPKIT_DPP_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dppkit/kernels.hpp"

namespace dppkit {

enum class StopReason { kBudgetReached, kVarianceFloor, kExhausted };

std::string_view to_string(StopReason reason);

struct Budget {
  std::size_t m = 0;
  double variance_floor = 1e-12;
  // Select all N items; m is ignored.
  bool run_to_exhaustion = false;
  // Stop as soon as the best remaining conditional variance sits at the floor
  // instead of clamping and continuing.
  bool stop_on_floor = false;

  static Budget of_size(std::size_t m) {
    Budget b;
    b.m = m;
    return b;
  }
  static Budget exhaustive() {
    Budget b;
    b.run_to_exhaustion = true;
    return b;
  }
};

// Output of a greedy MAP run. gains[n] is the log of the conditional
// variance of the n-th selected item given the previous ones, so
// cum_logdet[n] = gains[0] + ... + gains[n] = log det(L_{S_n}).
struct GreedyTrace {
  std::vector<std::size_t> selected;
  std::vector<double> gains;
  std::vector<double> cum_logdet;
  // 1 where the selected item's conditional variance had been clamped to
  // the floor; the corresponding gain is log(variance_floor).
  std::vector<unsigned char> clamped;
  std::size_t clamped_steps = 0;
  StopReason stop_reason = StopReason::kBudgetReached;

  std::size_t size() const { return selected.size(); }
  double logdet() const { return cum_logdet.empty() ? 0.0 : cum_logdet.back(); }
};

// Greedy MAP inference for a cardinality-constrained DPP using incremental
// Cholesky updates (Chen, Zhang & Zhou 2018). Each step selects the
// candidate with the largest conditional variance d_i^2, ties going to the
// lowest index, and updates every remaining candidate:
//
//   e_i  = (L_ji - <c_j, c_i>) / d_j
//   c_i  = [c_i, e_i]
//   d_i^2 -= e_i^2          (clamped below at variance_floor)
//
// Time O(N M (M + D)) for a feature-backed kernel, memory O(N M). The
// candidate update runs on `threads` workers; results do not depend on it.
GreedyTrace greedy_map(const KernelSource& kernel, const Budget& budget, int threads = 1);

// Exact argmax of det(L_Y) over |Y| = m by enumeration. Ties resolve to the
// lexicographically smallest set. Throws ValidationError when C(N, m)
// exceeds kBruteForceLimit.
inline constexpr double kBruteForceLimit = 1e6;
std::vector<std::size_t> brute_force_map(const KernelSource& kernel, std::size_t m);

struct LogDet {
  double value = 0.0;
  // Diagonal jitter that had to be added before the factorization
  // succeeded; 0 when none was needed.
  double jitter = 0.0;
};

inline constexpr double kMaxJitter = 1e-10;

// log det(L_Y) via Cholesky of the materialized sub-matrix. On failure the
// factorization is retried once with kMaxJitter on the diagonal; a second
// failure raises NumericError.
LogDet logdet_direct(const KernelSource& kernel, std::span<const std::size_t> subset);

// CSV with header step,index,gain,cum_logdet,clamped. Steps are 1-based.
void write_trace_csv(const GreedyTrace& trace, const std::filesystem::path& path);

}  // namespace dppkit

#endif  // DPPKIT_DPP_HPP_
