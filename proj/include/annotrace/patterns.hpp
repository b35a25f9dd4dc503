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

// Per-entry propagation patterns within one database.
//
// For a sentence and a record let R be the set of ordinals at which the
// record holds the sentence, and L the database's latest ordinal.
//
//   Transient          |R| = 1 and R != {L}
//   PossiblyTransient  |R| = 1 and R == {L}
//   MissingOrigin      v0 = first ordinal the sentence appears anywhere in
//                      the database; exactly one record o holds it at v0;
//                      some other record s holds it at an ordinal where o
//                      does not.  Such records are the secondaries.
//                      Witnesses: v0, the earliest first presence among
//                      the secondaries, and the earliest ordinal at which
//                      o lacks the sentence while a secondary has it.
//
// A sentence held by several records at v0 has no single origin; it is
// counted as ambiguous instead of reported.

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "annotrace/store.hpp"

namespace annotrace {

enum class PatternLabel { kTransient, kPossiblyTransient, kMissingOrigin };

std::string_view to_string(PatternLabel label);
PatternLabel parse_pattern_label(std::string_view name);

struct PatternInstance {
  PatternLabel label = PatternLabel::kTransient;
  Fingerprint sentence;
  DatabaseId database;
  std::string record;                    // the entry, or the origin for MissingOrigin
  std::vector<std::string> secondaries;  // MissingOrigin only, sorted
  std::vector<std::uint32_t> witnesses;  // one ordinal, or (v0, v1, v2)
  // Releases after the first witness in which `record` has no occurrence
  // at all, i.e. the absence may be a deleted record rather than a removed
  // sentence.
  std::uint32_t record_absent_releases = 0;

  bool operator==(const PatternInstance&) const = default;
};

/// Canonical ordering: label, fingerprint, database, record.
bool instance_less(const PatternInstance& a, const PatternInstance& b);

/// Presence of one sentence in one database: (accession, sorted ordinals)
/// for every record holding it, sorted by accession.
using EntryHistory = std::vector<std::pair<std::string, std::vector<std::uint32_t>>>;

struct PatternCounts {
  std::uint64_t instances = 0;
  std::uint64_t sentences = 0;          // distinct sentences with >= 1 instance
  std::uint64_t record_absence = 0;     // instances with record_absent_releases > 0
};

struct PatternReport {
  std::string scope;  // database name, or merge-group name
  std::vector<std::string> databases;
  std::vector<PatternInstance> instances;  // canonical order
  PatternCounts transient;
  PatternCounts possibly_transient;
  PatternCounts missing_origin;
  std::uint64_t ambiguous_origin = 0;  // sentences with several records at their first release
  std::uint64_t sentences_scanned = 0;

  const PatternCounts& counts(PatternLabel label) const;
};

/// Labels of the Transient/PossiblyTransient component for one entry.
/// Empty if the record never holds the sentence.
std::set<PatternLabel> classify_entry(const Workspace& ws, const Fingerprint& sentence, const RecordId& record);

/// Applies every predicate to one sentence history.  `ambiguous` is set
/// when the MissingOrigin clause was skipped for lack of a unique origin.
std::vector<PatternInstance> classify_history(const Fingerprint& sentence, const DatabaseId& database,
                                              const EntryHistory& history, std::uint32_t latest,
                                              bool* ambiguous = nullptr);

/// Full detection over one database.  StateError unless every registered
/// release of the database is ingested.
PatternReport detect_patterns(const Workspace& ws, const DatabaseId& db);

std::vector<PatternInstance> detect_transient(const Workspace& ws, const DatabaseId& db);
std::vector<PatternInstance> detect_possibly_transient(const Workspace& ws, const DatabaseId& db);
std::vector<PatternInstance> detect_missing_origin(const Workspace& ws, const DatabaseId& db,
                                                   std::uint64_t* ambiguous_origin = nullptr);

/// Union of per-database reports under one name; sentence counts are over
/// distinct fingerprints across the members.
PatternReport merge_reports(const std::string& scope, const std::vector<PatternReport>& members);

/// Re-checks an instance's defining predicate and witnesses against the
/// store.  Returns an empty string if it holds, otherwise the reason.
std::string replay_instance(const Workspace& ws, const PatternInstance& instance);

}  // namespace annotrace
