// Copyright 2026 The mfwlab Authors
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

#ifndef MFWLAB_ERROR_HPP
#define MFWLAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mfw {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter is outside its documented domain (non-positive alpha, n = 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A file does not follow its binary or text format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, int epoch, int step)
      : Error(what), epoch_(epoch), step_(step) {}

  int epoch() const noexcept { return epoch_; }
  int step() const noexcept { return step_; }

 private:
  int epoch_;
  int step_;
};

}  // namespace mfw

#endif  // MFWLAB_ERROR_HPP
