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

// UTF-8 helpers shared by the normalizer and the release parsers.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace annotrace::unicode {

inline constexpr char32_t kReplacement = 0xFFFD;

enum class DecodeStatus { kOk, kInvalid, kIncomplete };

/// Decodes one code point at `pos` and advances past it.  On kInvalid the
/// maximal ill-formed subpart is skipped and `cp` is U+FFFD.  kIncomplete
/// means the input ended inside an otherwise valid sequence; `pos` is left
/// unchanged.
DecodeStatus decode(std::string_view s, std::size_t& pos, char32_t& cp);

void append_utf8(std::string& out, char32_t cp);

/// Unicode White_Space property.
bool is_whitespace(char32_t cp);

/// Simple (one-to-one) case folding, locale independent.
char32_t fold_case(char32_t cp);

bool is_letter(char32_t cp);

/// Streaming repair of UTF-8: valid input passes through byte-identical,
/// each ill-formed subpart becomes U+FFFD.  Sequences split across feed()
/// calls are reassembled.
class Utf8Sanitizer {
 public:
  void feed(std::string_view chunk, std::string& out);
  /// Flushes a dangling partial sequence as a replacement character.
  void finish(std::string& out);

  std::uint64_t replacements() const { return replacements_; }

 private:
  void consume(std::string_view data, std::string& out, bool final);

  std::string carry_;
  std::uint64_t replacements_ = 0;
};

}  // namespace annotrace::unicode
