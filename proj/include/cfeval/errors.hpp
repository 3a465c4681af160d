// Copyright 2026 The cfeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace cfeval {

// Malformed input, violated invariant, unknown id.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric routine failed (e.g. transport solver did not converge).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative solver stopped at its cap with the residual still too large.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Inconsistent arguments to an algorithm (sizes, ranges).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace cfeval
