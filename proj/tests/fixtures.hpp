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

// Shared test helpers: scratch directories and small hand-built corpora.

#pragma once

#include <stdlib.h>

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "annotrace/corpus.hpp"
#include "annotrace/store.hpp"

namespace annotrace::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "annotrace-test-XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline NormalizedSentence sentence(const std::string& text) { return *normalize(text); }

/// A corpus described in memory: per database, its dated releases and per
/// release the (accession, sentence text) occurrences.
struct ToyDatabase {
  std::string name;
  std::vector<std::pair<std::string, std::string>> releases;  // label, date
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> content;  // label -> occurrences
  std::string epoch;
};

inline DatabaseSpec to_spec(const ToyDatabase& db) {
  DatabaseSpec spec;
  spec.name = DatabaseId(db.name);
  if (!db.epoch.empty()) spec.epoch = Date::parse(db.epoch);
  for (const auto& [label, date] : db.releases) spec.releases.push_back({label, Date::parse(date), false});
  return spec;
}

inline IngestSummary ingest_toy_release(Workspace& ws, const ToyDatabase& db, const std::string& label) {
  std::vector<std::pair<std::string, NormalizedSentence>> occ;
  auto it = db.content.find(label);
  if (it != db.content.end()) {
    for (const auto& [acc, text] : it->second) occ.emplace_back(acc, sentence(text));
  }
  return ws.ingest(DatabaseId(db.name), label, occ);
}

inline void load_toy(Workspace& ws, const std::vector<ToyDatabase>& dbs) {
  for (const auto& db : dbs) ws.register_database(to_spec(db));
  for (const auto& db : dbs) {
    for (const auto& [label, date] : db.releases) ingest_toy_release(ws, db, label);
  }
}

// Toy corpus T1: database X, releases v0..v2 yearly from 2001.
//   s1 in A at 0; s2 in B at 2; s3 in A at 0,1 and B at 1,2; s4 in A at 0,1,2.
inline const std::string kS1 = "the first sentence.";
inline const std::string kS2 = "the second sentence.";
inline const std::string kS3 = "the third sentence.";
inline const std::string kS4 = "the fourth sentence.";

inline ToyDatabase t1() {
  ToyDatabase db;
  db.name = "x";
  db.releases = {{"v0", "2001-01-01"}, {"v1", "2002-01-01"}, {"v2", "2003-01-01"}};
  db.content["v0"] = {{"A", kS1}, {"A", kS3}, {"A", kS4}};
  db.content["v1"] = {{"A", kS3}, {"B", kS3}, {"A", kS4}};
  db.content["v2"] = {{"B", kS2}, {"B", kS3}, {"A", kS4}};
  return db;
}

inline const std::string kPili =
    "pyelonephritogenic e.coli specifically invade the uroepithelium by expressing between 100 and 300 pili on "
    "their cell surface.";

// An entry-level scenario: an InterPro-like database with yearly releases.
// The sentence starts in IPR004086, is copied to IPR005430 about a year
// later, is removed from IPR004086 (where an edited variant replaces it)
// and survives one more release in IPR005430.
inline ToyDatabase pili_fixture() {
  ToyDatabase db;
  db.name = "interpro";
  db.releases = {{"3.0", "2000-06-01"}, {"4.0", "2001-06-01"}, {"5.0", "2002-06-01"},
                 {"6.0", "2003-06-01"}, {"7.0", "2004-06-01"}};
  const std::string edited = "pyelonephritogenic e. coli specifically invade the uroepithelium by expressing "
                             "between 100 and 300 pili on their cell surface.";
  db.content["3.0"] = {{"IPR000001", "an unrelated sentence."}};
  db.content["4.0"] = {{"IPR000001", "an unrelated sentence."}, {"IPR004086", kPili}};
  db.content["5.0"] = {{"IPR000001", "an unrelated sentence."}, {"IPR004086", kPili}, {"IPR005430", kPili}};
  db.content["6.0"] = {{"IPR000001", "an unrelated sentence."}, {"IPR004086", edited}, {"IPR005430", kPili}};
  db.content["7.0"] = {{"IPR000001", "an unrelated sentence."}, {"IPR004086", edited}};
  return db;
}

inline const std::string kCopied = "this family signature is shared by several receptor subfamilies.";

// A sentence held by a PRINTS entry from 1999, copied into InterPro entry
// IPR001055 in 2000 and IPR018298 in 2008, and dropped from PRINTS in 2008.
inline std::vector<ToyDatabase> prints_fixture() {
  ToyDatabase prints, interpro;
  prints.name = "prints";
  interpro.name = "interpro";
  for (int y = 1998; y <= 2008; ++y) {
    const std::string label = std::to_string(y);
    prints.releases.emplace_back(label, label + "-06-01");
    prints.content[label].emplace_back("PR00237", "other prints text.");
    if (y >= 1999 && y <= 2007) prints.content[label].emplace_back("PR00237", kCopied);
  }
  interpro.releases.emplace_back("1.0", "1999-10-01");
  interpro.content["1.0"].emplace_back("IPR000001", "other interpro text.");
  for (int y = 2000; y <= 2009; ++y) {
    const std::string label = std::to_string(y - 1998) + ".0";
    interpro.releases.emplace_back(label, std::to_string(y) + "-06-01");
    interpro.content[label].emplace_back("IPR001055", kCopied);
    if (y >= 2008) interpro.content[label].emplace_back("IPR018298", kCopied);
  }
  return {prints, interpro};
}

inline Fingerprint fp_of(const std::string& text) { return sentence(text).fingerprint(); }

}  // namespace annotrace::testing
