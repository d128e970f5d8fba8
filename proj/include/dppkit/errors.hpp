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

#ifndef DPPKIT_ERRORS_HPP_
#define DPPKIT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dppkit {

// Base class for every error raised by the library. The CLI maps
// ValidationError-derived failures to exit code 2 and the rest to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied something inconsistent: bad parameters, mismatched sizes,
// unknown column names.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A file could not be parsed (bad magic, malformed header or cell).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A file declares more payload than it contains, or a table has the wrong
// number of rows.
class LengthMismatchError : public Error {
 public:
  using Error::Error;
};

// Input that is well formed but mathematically unusable, e.g. a zero row
// that cannot be normalized.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or failed factorizations during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dppkit

#endif  // DPPKIT_ERRORS_HPP_
