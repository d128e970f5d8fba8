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

#ifndef DPPKIT_RNG_HPP_
#define DPPKIT_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace dppkit {

// Portable random stream. std::mt19937_64 is bit-exact across standard
// libraries but the std distributions are not, so uniform, bounded-integer
// and Gaussian draws are derived here from the raw engine output.
class Rng {
 public:
  // Recorded in file metadata; bump when any derived draw changes.
  static constexpr std::string_view kAlgorithm = "mt19937_64/polar-normal/v1";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via the Marsaglia polar method.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);

// Stable 64-bit hash of a string (FNV-1a followed by mix64).
std::uint64_t hash_string(std::string_view s);

}  // namespace dppkit

#endif  // DPPKIT_RNG_HPP_
