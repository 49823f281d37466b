/*
 * Copyright 2026 The relfsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace relfsim {

/// Bad or unreadable input data: I/O failures, parse failures, empty
/// datasets, empty joins. Maps to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf reached a trained vector. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A user, item or token id that the loaded model does not know.
/// Maps to CLI exit code 4.
class UnknownIdError : public std::runtime_error {
 public:
  UnknownIdError(const std::string& what, std::string id)
      : std::runtime_error(what + ": " + id), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

/// Caller broke a precondition (dimension mismatch, invalid config, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cosine of a zero vector.
class UndefinedSimilarityError : public ContractError {
 public:
  using ContractError::ContractError;
};

}  // namespace relfsim
