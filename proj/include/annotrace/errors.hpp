// Copyright 2026 The annotrace Authors
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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace annotrace {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad identifier, bad date,
/// non-canonical sentence text, malformed manifest, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A lookup named something the workspace does not contain.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// The requested operation conflicts with the workspace state, e.g. a
/// release that was already ingested.
class StateError : public Error {
 public:
  using Error::Error;
};

/// On-disk data is inconsistent, or two different sentences share a
/// fingerprint.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Unrecoverable structural damage in a release file.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::uint64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

}  // namespace annotrace
