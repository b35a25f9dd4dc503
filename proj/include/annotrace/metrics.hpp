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

// Reuse measures per release and per database lifetime.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "annotrace/store.hpp"

namespace annotrace {

/// total counts occurrences (a sentence in k records counts k times);
/// unique counts distinct fingerprints; singleton counts fingerprints that
/// occur exactly once in the release.
struct ReleaseCounts {
  ReleaseVersion release;
  std::uint64_t total = 0;
  std::uint64_t unique = 0;
  std::uint64_t singleton = 0;
};

struct LifetimeCounts {
  DatabaseId database;
  std::uint64_t total_unique = 0;
  std::uint64_t releases = 0;  // ingested releases contributing
};

/// Percentage with two exact decimals, stored in hundredths of a percent.
struct Percentage {
  std::int64_t hundredths = 0;

  std::string str() const;
  double value() const { return static_cast<double>(hundredths) / 100.0; }
  auto operator<=>(const Percentage&) const = default;
};

/// 100 * part / total rounded half-to-even to two decimals; 0 if total is 0.
Percentage percent(std::uint64_t part, std::uint64_t total);

/// Counts a run of fingerprints sorted ascending.
ReleaseCounts count_sorted(std::span<const Fingerprint> sorted);

ReleaseCounts release_counts(const Workspace& ws, const DatabaseId& db, std::uint32_t ordinal);

/// NotFound if the database has no ingested release.
LifetimeCounts lifetime_unique(const Workspace& ws, const DatabaseId& db);

enum class ReleaseSelector { kLatest, kAll };

struct ProfileRow {
  ReleaseVersion release;
  bool ingested = false;  // false: selected but not ingested, counts are zero
  bool empty = false;     // total is zero, percentages forced to 0
  ReleaseCounts counts;
  Percentage unique_pct;
  Percentage singleton_pct;
};

/// Rows sorted by database name then ordinal.  An empty `dbs` selects every
/// database.  kLatest picks each database's last registered release.
std::vector<ProfileRow> redundancy_profile(const Workspace& ws, const std::vector<DatabaseId>& dbs,
                                           ReleaseSelector selector);

}  // namespace annotrace
