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

// Versioned occurrence index.
//
// A workspace is a directory:
//
//   workspace.json          registry, commit point, format tag
//   sentences.log           append-only (fingerprint, text) table
//   db/<name>/records.log   append-only accession table, id = position
//   db/<name>/<n>.rel       release n, rows sorted by (accession, fingerprint)
//   db/<name>/<n>.sen       release n, rows sorted by (fingerprint, accession)
//
// Release files are written once and renamed into place; workspace.json is
// replaced atomically last, so a failed ingest leaves no visible trace.
// Readers only look at what workspace.json declares ingested.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "annotrace/corpus.hpp"

namespace annotrace {

inline constexpr std::string_view kWorkspaceFormat = "annotrace-workspace/1";

struct IngestSummary {
  ReleaseVersion release;
  std::uint64_t records = 0;  // records contributing at least one occurrence
  std::uint64_t occurrences = 0;
  std::uint64_t duplicates_collapsed = 0;
  std::uint64_t empty_dropped = 0;
  std::uint64_t parse_damage = 0;
  std::uint64_t replacement_chars = 0;
};

/// Counters gathered upstream of the store (by extraction) and recorded in
/// the summary of the release they belong to.
struct UpstreamCounts {
  std::uint64_t empty_dropped = 0;
  std::uint64_t duplicates_in_record = 0;
  std::uint64_t parse_damage = 0;
  std::uint64_t replacement_chars = 0;
};

/// Registration request for one database.  Releases are listed in order;
/// re-registering an existing database may only append releases.
struct DatabaseSpec {
  struct Release {
    std::string label;
    Date date;
    bool date_estimated = false;
  };
  DatabaseId name;
  std::optional<Date> epoch;  // defaults to the first release date
  std::vector<Release> releases;
};

struct ReleaseState {
  ReleaseVersion version;
  bool ingested = false;
  std::uint64_t rows = 0;
  IngestSummary summary;
};

struct DatabaseInfo {
  DatabaseId id;
  Date epoch;
  std::vector<ReleaseState> releases;

  std::uint32_t latest_ordinal() const { return static_cast<std::uint32_t>(releases.size() - 1); }
  bool fully_ingested() const;
  std::size_t ingested_count() const;
};

/// One (record, release) presence of a sentence inside a scan.  `database`
/// indexes Workspace::databases(); `record` is the per-database record id.
struct PresenceHit {
  std::uint32_t database;
  std::uint32_t record;
  std::uint32_t ordinal;

  auto operator<=>(const PresenceHit&) const = default;
};

struct IntegrityReport {
  std::vector<std::string> problems;
  std::uint64_t releases_checked = 0;
  std::uint64_t rows_checked = 0;
  std::uint64_t sentences_checked = 0;

  bool ok() const { return problems.empty(); }
};

class Workspace {
 public:
  struct State;
  class Ingest;

  /// Opens an existing workspace.  NotFound if `root` has no workspace;
  /// IntegrityError if its format tag is not kWorkspaceFormat.
  static Workspace open(const std::filesystem::path& root);
  /// Opens, creating an empty workspace first when `root` has none.
  static Workspace open_or_create(const std::filesystem::path& root);

  Workspace(Workspace&&) noexcept;
  Workspace& operator=(Workspace&&) noexcept;
  ~Workspace();

  const std::filesystem::path& root() const;
  const std::string& id() const;

  /// Re-reads state committed by other writers since open().
  void refresh();

  // Registry ---------------------------------------------------------------

  void register_database(const DatabaseSpec& spec);
  /// Registered databases, sorted by name.
  const std::vector<DatabaseId>& databases() const;
  const DatabaseInfo& database(const DatabaseId& id) const;
  std::uint32_t database_index(const DatabaseId& id) const;
  const ReleaseVersion& release(const DatabaseId& id, std::string_view label) const;
  const ReleaseVersion& release(const DatabaseId& id, std::uint32_t ordinal) const;
  bool is_ingested(const DatabaseId& id, std::uint32_t ordinal) const;

  // Ingestion --------------------------------------------------------------

  /// Starts an exclusive ingest of a registered, not yet ingested release.
  /// Throws StateError if the release is ingested or another writer holds
  /// the workspace lock.
  Ingest begin_ingest(const DatabaseId& id, std::string_view label);

  /// Convenience wrapper around begin_ingest()/commit().
  IngestSummary ingest(const DatabaseId& id, std::string_view label,
                       const std::vector<std::pair<std::string, NormalizedSentence>>& occurrences);

  // Queries ----------------------------------------------------------------

  std::size_t sentence_count() const;
  bool contains(const Fingerprint& fp) const;
  /// Stored text of a fingerprint; NotFound if unknown.
  const std::string& sentence_text(const Fingerprint& fp) const;
  const std::string& accession(std::uint32_t database, std::uint32_t record) const;

  /// Presence of one sentence across every ingested release.  NotFound if
  /// the fingerprint was never ingested.
  SentenceTimeline timeline(const Fingerprint& fp) const;
  /// Normalizes `raw`, then looks it up.
  SentenceTimeline timeline_for_text(std::string_view raw) const;

  /// Every occurrence of an ingested release ordered by record accession,
  /// then fingerprint.  NotFound for unknown or uningested releases.
  std::vector<Occurrence> release_occurrences(const DatabaseId& id, std::uint32_t ordinal) const;
  void for_each_release_occurrence(const DatabaseId& id, std::uint32_t ordinal,
                                   const std::function<void(std::string_view, const Fingerprint&)>& fn) const;

  /// Fingerprints of one ingested release in ascending order, one entry per
  /// occurrence (so a sentence in k records appears k times consecutively).
  std::vector<Fingerprint> release_fingerprints(const DatabaseId& id, std::uint32_t ordinal) const;
  /// Same, streamed without materializing.
  void for_each_release_fingerprint(const DatabaseId& id, std::uint32_t ordinal,
                                    const std::function<void(const Fingerprint&)>& fn) const;

  /// Distinct record ids with at least one occurrence in an ingested release.
  std::vector<std::uint32_t> release_records(const DatabaseId& id, std::uint32_t ordinal) const;

  using SentenceScan = std::function<void(const Fingerprint&, std::span<const PresenceHit>)>;
  /// Streams every sentence present in any ingested release of `dbs`, in
  /// ascending fingerprint order, with its hits sorted by (database,
  /// record, ordinal).  An empty `dbs` means all databases.
  void scan_sentences(const std::vector<DatabaseId>& dbs, const SentenceScan& fn) const;

  /// Builds a timeline from scan hits.
  SentenceTimeline to_timeline(const Fingerprint& fp, std::span<const PresenceHit> hits) const;

  IntegrityReport check_integrity() const;

 private:
  explicit Workspace(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

/// Exclusive, atomic ingest of one release.  Destroying an uncommitted
/// session discards everything it buffered.
class Workspace::Ingest {
 public:
  Ingest(Ingest&&) noexcept;
  Ingest& operator=(Ingest&&) = delete;
  ~Ingest();

  const ReleaseVersion& release() const;

  void add(std::string_view accession, const NormalizedSentence& sentence);
  void add_upstream(const UpstreamCounts& counts);
  IngestSummary commit();

  struct Buffer;

 private:
  friend class Workspace;
  Ingest(Workspace& ws, std::uint32_t db, std::uint32_t ordinal);

  Workspace* ws_;
  std::unique_ptr<Buffer> buf_;
};

}  // namespace annotrace
