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

#include "annotrace/corpus.hpp"

#include <sodium.h>

#include <charconv>
#include <cstring>
#include <mutex>

#include "annotrace/errors.hpp"
#include "annotrace/unicode.hpp"

namespace annotrace {

namespace {

int parse_digits(std::string_view s, std::string_view whole) {
  int value = 0;
  for (char c : s) {
    if (c < '0' || c > '9') throw InvalidInput("malformed date '" + std::string(whole) + "'");
  }
  std::from_chars(s.data(), s.data() + s.size(), value);
  return value;
}

void init_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw Error("libsodium initialisation failed");
  });
}

}  // namespace

Date Date::parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw InvalidInput("malformed date '" + std::string(iso) + "', expected YYYY-MM-DD");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{parse_digits(iso.substr(0, 4), iso)},
                           month{static_cast<unsigned>(parse_digits(iso.substr(5, 2), iso))},
                           day{static_cast<unsigned>(parse_digits(iso.substr(8, 2), iso))}};
  if (!ymd.ok()) throw InvalidInput("invalid calendar date '" + std::string(iso) + "'");
  return Date(std::chrono::sys_days{ymd});
}

std::string Date::iso() const {
  using namespace std::chrono;
  const year_month_day ymd{days_};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

DatabaseId::DatabaseId(std::string_view name) {
  if (name.empty()) throw InvalidInput("database name must not be empty");
  name_.reserve(name.size());
  for (char c : name) {
    const char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c;
    const bool ok = (lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9') ||
                    lower == '.' || lower == '_' || lower == '-';
    if (!ok) {
      throw InvalidInput("database name '" + std::string(name) +
                         "' may only contain letters, digits, '.', '_' and '-'");
    }
    name_.push_back(lower);
  }
  if (name_.front() == '.') throw InvalidInput("database name must not start with '.'");
}

void validate_accession(std::string_view accession) {
  if (accession.empty()) throw InvalidInput("record accession must not be empty");
  if (accession.find_first_of("\t\r\n") != std::string_view::npos) {
    throw InvalidInput("record accession '" + std::string(accession) +
                       "' contains a tab or line break");
  }
}

RecordId::RecordId(DatabaseId db, std::string acc) : database(std::move(db)), accession(std::move(acc)) {
  validate_accession(accession);
}

std::string Fingerprint::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(32, '0');
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out[2 * i] = kDigits[bytes[i] >> 4];
    out[2 * i + 1] = kDigits[bytes[i] & 0x0F];
  }
  return out;
}

Fingerprint Fingerprint::from_hex(std::string_view hex) {
  if (hex.size() != 32) throw InvalidInput("fingerprint must be 32 hex digits");
  auto nibble = [&](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw InvalidInput("fingerprint contains non-hex character '" + std::string(1, c) + "'");
  };
  Fingerprint fp;
  for (std::size_t i = 0; i < fp.bytes.size(); ++i) {
    fp.bytes[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  }
  return fp;
}

std::size_t FingerprintHash::operator()(const Fingerprint& fp) const noexcept {
  std::size_t h;
  std::memcpy(&h, fp.bytes.data(), sizeof h);
  return h;
}

Fingerprint fingerprint_unchecked(std::string_view text) {
  init_sodium();
  Fingerprint fp;
  crypto_generichash(fp.bytes.data(), fp.bytes.size(),
                     reinterpret_cast<const unsigned char*>(text.data()), text.size(), nullptr, 0);
  return fp;
}

Fingerprint fingerprint(std::string_view text) {
  if (!is_canonical(text)) {
    throw InvalidInput("text is not a normalized sentence: '" + std::string(text) + "'");
  }
  return fingerprint_unchecked(text);
}

namespace {

// Returns the canonical form of `raw` (possibly empty).
std::string canonicalize(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    char32_t cp = 0;
    if (unicode::decode(raw, pos, cp) == unicode::DecodeStatus::kIncomplete) {
      cp = unicode::kReplacement;
      pos = raw.size();
    }
    if (unicode::is_whitespace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    unicode::append_utf8(out, unicode::fold_case(cp));
  }
  return out;
}

}  // namespace

std::optional<NormalizedSentence> normalize(std::string_view raw) {
  std::string text = canonicalize(raw);
  if (text.empty()) return std::nullopt;
  const Fingerprint fp = fingerprint_unchecked(text);
  return NormalizedSentence(std::move(text), fp);
}

bool is_canonical(std::string_view text) {
  return !text.empty() && canonicalize(text) == text;
}

NormalizedSentence NormalizedSentence::from_canonical(std::string text) {
  const Fingerprint fp = annotrace::fingerprint(text);
  return NormalizedSentence(std::move(text), fp);
}

std::vector<Occurrence> SentenceTimeline::occurrences() const {
  std::vector<Occurrence> out;
  for (const auto& [db, records] : databases) {
    const DatabaseId id(db);
    for (const auto& [accession, ordinals] : records) {
      for (const std::uint32_t ordinal : ordinals) {
        out.push_back(Occurrence{sentence, RecordId(id, accession), ordinal});
      }
    }
  }
  return out;
}

}  // namespace annotrace
