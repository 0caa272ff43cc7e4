// Copyright 2026 The n2l Authors
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

#ifndef N2L_ERRORS_H_
#define N2L_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace n2l {

// Base of every error thrown by the library. The CLI maps each subclass to
// its own process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (shape mismatch, bad argument).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Model or image configuration cannot be satisfied (e.g. image too small for
// the coarsest noise scale, unknown setting id).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Image file missing, unreadable or in an unsupported pixel layout.
class ImageIoError : public Error {
 public:
  using Error::Error;
};

class ImageTooSmall : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Optimization produced non-finite values or parameters too large to code.
class TrainingDivergence : public Error {
 public:
  using Error::Error;
};

// Stream is not a version-1 n2l stream.
class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

// Stream has the right magic but its content is inconsistent or truncated.
class MalformedBitstream : public Error {
 public:
  MalformedBitstream(const std::string& what, std::size_t bit_offset)
      : Error(what + " (at bit offset " + std::to_string(bit_offset) + ")"),
        bit_offset_(bit_offset) {}

  std::size_t bit_offset() const { return bit_offset_; }

 private:
  std::size_t bit_offset_;
};

}  // namespace n2l

#endif  // N2L_ERRORS_H_
