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

// Shared vocabulary: databases, releases, records, sentences, occurrences.

#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace annotrace {

/// Calendar date with day precision.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days days) : days_(days) {}

  /// Parses "YYYY-MM-DD"; throws InvalidInput on anything else.
  static Date parse(std::string_view iso);

  std::string iso() const;
  std::chrono::sys_days days() const { return days_; }
  Date plus_days(int n) const { return Date(days_ + std::chrono::days(n)); }

  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

/// Closed interval of dates.  A sentence observed in a release is known to
/// have entered somewhere in [previous release date, release date].
struct DateInterval {
  Date lo;
  Date hi;

  /// True when this interval ends strictly before `other` begins.
  bool strictly_before(const DateInterval& other) const { return hi < other.lo; }
  bool operator==(const DateInterval&) const = default;
};

/// Short case-insensitive database identifier.  Stored case-folded;
/// restricted to [a-z0-9._-] and never starting with '.'.
class DatabaseId {
 public:
  DatabaseId() = default;
  explicit DatabaseId(std::string_view name);

  const std::string& str() const { return name_; }
  auto operator<=>(const DatabaseId&) const = default;

 private:
  std::string name_;
};

/// One dated snapshot of a database.  The date is an upper bound on when
/// the content of the release entered the database.
struct ReleaseVersion {
  DatabaseId database;
  std::string label;
  std::uint32_t ordinal = 0;
  Date date;
  bool date_estimated = false;

  bool operator==(const ReleaseVersion&) const = default;
};

/// Record identity is the accession verbatim; it is stable across releases.
struct RecordId {
  DatabaseId database;
  std::string accession;

  RecordId() = default;
  RecordId(DatabaseId db, std::string acc);

  auto operator<=>(const RecordId&) const = default;
};

/// Throws InvalidInput if `accession` is empty or contains TAB, CR or LF.
void validate_accession(std::string_view accession);

/// 128-bit content hash of a canonical sentence.  Ordered bytewise.
struct Fingerprint {
  std::array<std::uint8_t, 16> bytes{};

  std::string hex() const;
  static Fingerprint from_hex(std::string_view hex);

  auto operator<=>(const Fingerprint&) const = default;
};

struct FingerprintHash {
  std::size_t operator()(const Fingerprint& fp) const noexcept;
};

/// Hashes a canonical sentence.  Throws InvalidInput if `text` is not a
/// fixed point of normalize().  Deterministic across platforms and runs
/// (BLAKE2b with a 16-byte digest).
Fingerprint fingerprint(std::string_view text);

/// Hashes without validating; callers guarantee canonical input.
Fingerprint fingerprint_unchecked(std::string_view text);

/// A sentence in canonical form: case-folded, single-spaced, trimmed,
/// non-empty.  Only normalize() and from_canonical() create one.
class NormalizedSentence {
 public:
  /// Validates `text` and wraps it; throws InvalidInput if not canonical.
  static NormalizedSentence from_canonical(std::string text);

  const std::string& text() const { return text_; }
  const Fingerprint& fingerprint() const { return fingerprint_; }

  bool operator==(const NormalizedSentence& other) const {
    return fingerprint_ == other.fingerprint_ && text_ == other.text_;
  }

 private:
  NormalizedSentence(std::string text, Fingerprint fp)
      : text_(std::move(text)), fingerprint_(fp) {}

  friend std::optional<NormalizedSentence> normalize(std::string_view raw);

  std::string text_;
  Fingerprint fingerprint_;
};

/// Canonicalizes a raw sentence: simple Unicode case folding, every maximal
/// whitespace run collapsed to one U+0020, ends trimmed.  Invalid UTF-8
/// bytes become U+FFFD.  Returns nullopt when nothing remains.
std::optional<NormalizedSentence> normalize(std::string_view raw);

/// True iff normalize(text) would return `text` unchanged.
bool is_canonical(std::string_view text);

/// The atomic observation: a sentence present in a record in a release.
/// The release is `record.database`'s release with this ordinal.
struct Occurrence {
  Fingerprint sentence;
  RecordId record;
  std::uint32_t ordinal = 0;

  auto operator<=>(const Occurrence&) const = default;
};

/// Presence history of one sentence: database -> accession -> sorted
/// ordinals.  Records without presence are absent rather than empty.
struct SentenceTimeline {
  Fingerprint sentence;
  std::map<std::string, std::map<std::string, std::vector<std::uint32_t>>> databases;

  /// Flattens back into occurrences, ordered by database, record, ordinal.
  std::vector<Occurrence> occurrences() const;

  bool operator==(const SentenceTimeline&) const = default;
};

}  // namespace annotrace
