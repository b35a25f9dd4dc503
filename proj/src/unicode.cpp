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

#include "annotrace/unicode.hpp"

#include <unicode/uchar.h>

namespace annotrace::unicode {

DecodeStatus decode(std::string_view s, std::size_t& pos, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    cp = b0;
    ++pos;
    return DecodeStatus::kOk;
  }

  std::size_t len = 0;
  unsigned char lo = 0x80, hi = 0xBF;
  char32_t value = 0;
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    len = 2;
    value = b0 & 0x1F;
  } else if (b0 >= 0xE0 && b0 <= 0xEF) {
    len = 3;
    value = b0 & 0x0F;
    if (b0 == 0xE0) lo = 0xA0;
    if (b0 == 0xED) hi = 0x9F;
  } else if (b0 >= 0xF0 && b0 <= 0xF4) {
    len = 4;
    value = b0 & 0x07;
    if (b0 == 0xF0) lo = 0x90;
    if (b0 == 0xF4) hi = 0x8F;
  } else {
    cp = kReplacement;
    ++pos;
    return DecodeStatus::kInvalid;
  }

  std::size_t i = 1;
  for (; i < len; ++i) {
    if (pos + i >= s.size()) return DecodeStatus::kIncomplete;
    const auto b = static_cast<unsigned char>(s[pos + i]);
    const unsigned char want_lo = (i == 1) ? lo : 0x80;
    const unsigned char want_hi = (i == 1) ? hi : 0xBF;
    if (b < want_lo || b > want_hi) {
      cp = kReplacement;
      pos += i;
      return DecodeStatus::kInvalid;
    }
    value = (value << 6) | (b & 0x3F);
  }
  cp = value;
  pos += len;
  return DecodeStatus::kOk;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_whitespace(char32_t cp) {
  if (cp < 0x80) return cp == ' ' || (cp >= 0x09 && cp <= 0x0D);
  return u_isUWhiteSpace(static_cast<UChar32>(cp));
}

char32_t fold_case(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  return static_cast<char32_t>(u_foldCase(static_cast<UChar32>(cp), U_FOLD_CASE_DEFAULT));
}

bool is_letter(char32_t cp) {
  if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  return u_isalpha(static_cast<UChar32>(cp));
}

void Utf8Sanitizer::feed(std::string_view chunk, std::string& out) {
  if (carry_.empty()) {
    consume(chunk, out, false);
    return;
  }
  std::string joined = std::move(carry_);
  carry_.clear();
  joined.append(chunk);
  consume(joined, out, false);
}

void Utf8Sanitizer::finish(std::string& out) {
  if (carry_.empty()) return;
  std::string rest = std::move(carry_);
  carry_.clear();
  consume(rest, out, true);
}

void Utf8Sanitizer::consume(std::string_view data, std::string& out, bool final) {
  std::size_t pos = 0;
  while (pos < data.size()) {
    const auto b = static_cast<unsigned char>(data[pos]);
    if (b < 0x80) {
      out.push_back(static_cast<char>(b));
      ++pos;
      continue;
    }
    const std::size_t start = pos;
    char32_t cp = 0;
    switch (decode(data, pos, cp)) {
      case DecodeStatus::kOk:
        out.append(data.substr(start, pos - start));
        break;
      case DecodeStatus::kInvalid:
        append_utf8(out, kReplacement);
        ++replacements_;
        break;
      case DecodeStatus::kIncomplete:
        if (!final) {
          carry_.assign(data.substr(start));
          return;
        }
        // A truncated sequence at end of input is one ill-formed subpart.
        append_utf8(out, kReplacement);
        ++replacements_;
        return;
    }
  }
}

}  // namespace annotrace::unicode
