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

// Synthetic corpora with planted pattern instances, and a brute-force
// reference detector over dense presence tables.
//
// Background content evolves release by release: every present
// (record, sentence) pair is dropped with probability `remove`, and every
// record gains a fresh vocabulary sentence with probability `add`, a
// sentence copied from another record of the same database with
// probability `copy_within`, and one copied from another database with
// probability `copy_cross`.  Planted instances use dedicated sentences that
// background actions never touch, so noise cannot break them.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annotrace/crossdb.hpp"
#include "annotrace/patterns.hpp"

namespace annotrace {

struct SynthDatabase {
  std::string name;
  std::vector<Date> dates;  // one per release, non-decreasing
  std::optional<Date> epoch;

  /// `releases` dates starting at `start`, `interval_days` apart.
  static SynthDatabase regular(std::string name, std::uint32_t releases, Date start, int interval_days);
};

struct ActionRates {
  double copy_within = 0.1;
  double copy_cross = 0.0;
  double remove = 0.1;
  double add = 0.2;
};

struct GeneratorSpec {
  std::uint64_t seed = 1;
  std::vector<SynthDatabase> databases;
  std::uint32_t records = 20;              // per database
  std::uint32_t vocabulary = 200;
  std::uint32_t initial_per_record = 3;    // background sentences per record in release 0
  ActionRates rates;
  std::map<PatternLabel, std::uint32_t> quotas;
  std::uint32_t cross_quota = 0;

  /// Throws InvalidInput if a rate is outside [0, 1], a calendar is empty
  /// or decreasing, or a quota cannot be met by these databases.
  void validate() const;

  static GeneratorSpec from_json(const std::string& text);
  std::string to_json() const;
};

struct TruthManifest {
  std::vector<PatternInstance> patterns;  // canonical order
  std::vector<CrossInstance> cross;       // by fingerprint
  std::map<Fingerprint, std::string> texts;

  std::string to_json() const;
  static TruthManifest from_json(const std::string& text);
};

/// Dense (sentence, database, record, release) presence table.
class PresenceTable {
 public:
  static constexpr std::uint64_t kMaxCells = 1'000'000;

  struct Database {
    DatabaseId id;
    Date epoch;
    std::vector<Date> dates;
    std::vector<std::string> records;  // sorted accessions
  };

  /// InvalidInput when the table would exceed kMaxCells.
  PresenceTable(std::vector<Database> databases, std::vector<std::string> sentences);

  /// Materializes a fully ingested workspace from its by-release index.
  static PresenceTable from_workspace(const Workspace& ws);

  const std::vector<Database>& databases() const { return dbs_; }
  const std::vector<std::string>& sentences() const { return sentences_; }
  std::uint64_t cells() const { return cells_.size(); }

  bool at(std::size_t sentence, std::size_t db, std::size_t record, std::size_t release) const {
    return cells_[index(sentence, db, record, release)] != 0;
  }
  void set(std::size_t sentence, std::size_t db, std::size_t record, std::size_t release, bool value = true) {
    cells_[index(sentence, db, record, release)] = value ? 1 : 0;
  }

 private:
  std::size_t index(std::size_t s, std::size_t db, std::size_t r, std::size_t v) const {
    return s * stride_ + offsets_[db] + r * dbs_[db].dates.size() + v;
  }
  std::vector<Database> dbs_;
  std::vector<std::string> sentences_;
  std::vector<std::size_t> offsets_;
  std::size_t stride_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct OracleResult {
  std::vector<PatternInstance> patterns;  // canonical order
  std::map<std::string, std::uint64_t> ambiguous_origin;  // by database name
  std::vector<CrossInstance> cross;       // by fingerprint
};

/// Applies every predicate literally to every cell.  Cross instances use
/// every group as a potential origin and all others as destinations.
OracleResult brute_force_detect(const PresenceTable& table, const std::vector<MergeGroup>& merges = {});

/// One generated corpus held in memory.
struct SynthCorpus {
  GeneratorSpec spec;
  // content[db][release] = sorted (record index, sentence id) pairs
  std::vector<std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>>> content;
  std::uint32_t sentence_ids = 0;  // ids below this are in use
  TruthManifest truth;

  static std::string sentence_text(std::uint32_t id);
  static std::string record_name(std::uint32_t index);
  std::uint64_t occurrences() const;
  std::string release_label(std::size_t release) const { return "r" + std::to_string(release); }

  /// Presence restricted to the given sentence ids (all when empty).
  PresenceTable presence(const std::vector<std::uint32_t>& sentence_ids = {}) const;
};

/// Deterministic given spec.seed.  Every planted instance is checked with
/// brute_force_detect on its own sentence and re-rolled if it fails.
SynthCorpus synthesize(const GeneratorSpec& spec);

struct GeneratedFiles {
  std::filesystem::path manifest;
  std::filesystem::path truth;
  std::uint64_t occurrences = 0;
};

/// Writes <dir>/manifest.json, <dir>/truth.json and one generic-tsv file
/// per release under <dir>/<database>/.
GeneratedFiles write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

/// synthesize() followed by write_corpus().
GeneratedFiles generate(const GeneratorSpec& spec, const std::filesystem::path& dir);

}  // namespace annotrace
