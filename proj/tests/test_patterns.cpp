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

#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "annotrace/errors.hpp"
#include "annotrace/patterns.hpp"
#include "fixtures.hpp"

using namespace annotrace;
using namespace annotrace::testing;

namespace {

ToyDatabase random_db(std::mt19937_64& rng, const std::string& name) {
  ToyDatabase db;
  db.name = name;
  const int releases = 1 + static_cast<int>(rng() % 6);
  const int records = 1 + static_cast<int>(rng() % 20);
  const int sentences = 1 + static_cast<int>(rng() % 40);
  // Presence is drawn per (sentence, record) so histories have structure.
  for (int r = 0; r < releases; ++r) {
    db.releases.emplace_back("r" + std::to_string(r), std::to_string(2000 + r) + "-01-01");
  }
  for (int s = 0; s < sentences; ++s) {
    for (int rec = 0; rec < records; ++rec) {
      if (rng() % 4 != 0) continue;
      const int start = static_cast<int>(rng() % releases);
      const int len = 1 + static_cast<int>(rng() % (releases - start));
      for (int r = start; r < start + len; ++r) {
        if (rng() % 6 == 0) continue;  // occasional gap
        db.content["r" + std::to_string(r)].emplace_back("REC" + std::to_string(rec),
                                                         "random sentence " + std::to_string(s) + ".");
      }
    }
  }
  return db;
}

}  // namespace

TEST_CASE("T1 patterns") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  load_toy(ws, {t1()});
  const DatabaseId x("x");

  const auto transient = detect_transient(ws, x);
  REQUIRE(transient.size() == 1);
  CHECK(transient[0].sentence == fp_of(kS1));
  CHECK(transient[0].record == "A");
  CHECK(transient[0].witnesses == std::vector<std::uint32_t>{0});

  const auto possibly = detect_possibly_transient(ws, x);
  REQUIRE(possibly.size() == 1);
  CHECK(possibly[0].sentence == fp_of(kS2));
  CHECK(possibly[0].record == "B");
  CHECK(possibly[0].witnesses == std::vector<std::uint32_t>{2});

  std::uint64_t ambiguous = 99;
  const auto missing = detect_missing_origin(ws, x, &ambiguous);
  REQUIRE(missing.size() == 1);
  CHECK(missing[0].sentence == fp_of(kS3));
  CHECK(missing[0].record == "A");
  CHECK(missing[0].secondaries == std::vector<std::string>{"B"});
  CHECK(missing[0].witnesses == std::vector<std::uint32_t>{0, 1, 2});
  CHECK(ambiguous == 0);

  CHECK(classify_entry(ws, fp_of(kS1), RecordId(x, "A")) == std::set<PatternLabel>{PatternLabel::kTransient});
  CHECK(classify_entry(ws, fp_of(kS2), RecordId(x, "B")) ==
        std::set<PatternLabel>{PatternLabel::kPossiblyTransient});
  CHECK(classify_entry(ws, fp_of(kS4), RecordId(x, "A")).empty());

  const PatternReport report = detect_patterns(ws, x);
  CHECK(report.transient.sentences == 1);
  CHECK(report.possibly_transient.sentences == 1);
  CHECK(report.missing_origin.sentences == 1);
  CHECK(report.sentences_scanned == 4);
  for (const auto& inst : report.instances) CHECK(replay_instance(ws, inst).empty());
}

TEST_CASE("a later release reclassifies possibly transient entries") {
  for (const bool persists : {false, true}) {
    TempDir dir;
    Workspace ws = Workspace::open_or_create(dir.path());
    ToyDatabase db = t1();
    db.releases.emplace_back("v3", "2004-01-01");
    db.content["v3"] = {{"B", kS3}, {"A", kS4}};
    if (persists) db.content["v3"].emplace_back("B", kS2);
    load_toy(ws, {db});
    const auto labels = classify_entry(ws, fp_of(kS2), RecordId(DatabaseId("x"), "B"));
    if (persists) {
      CHECK(labels.empty());
    } else {
      CHECK(labels == std::set<PatternLabel>{PatternLabel::kTransient});
    }
  }
}

TEST_CASE("single release databases have no transient entries") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  ToyDatabase db;
  db.name = "single";
  db.releases = {{"1", "2010-01-01"}};
  db.content["1"] = {{"A", "alpha."}, {"B", "beta."}};
  load_toy(ws, {db});
  CHECK(detect_transient(ws, DatabaseId("single")).empty());
  CHECK(detect_possibly_transient(ws, DatabaseId("single")).size() == 2);
}

TEST_CASE("transient is per entry") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  ToyDatabase db;
  db.name = "d";
  db.releases = {{"a", "2001-01-01"}, {"b", "2002-01-01"}, {"c", "2003-01-01"}};
  db.content["a"] = {{"ONCE", "shared text."}, {"ALWAYS", "shared text."}};
  db.content["b"] = {{"ALWAYS", "shared text."}};
  db.content["c"] = {{"ALWAYS", "shared text."}};
  load_toy(ws, {db});
  const auto t = detect_transient(ws, DatabaseId("d"));
  REQUIRE(t.size() == 1);
  CHECK(t[0].record == "ONCE");
}

TEST_CASE("simultaneous first appearance is ambiguous, not an origin") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  ToyDatabase db;
  db.name = "d";
  db.releases = {{"a", "2001-01-01"}, {"b", "2002-01-01"}, {"c", "2003-01-01"}};
  db.content["a"] = {{"P", "twin text."}, {"Q", "twin text."}};
  db.content["b"] = {{"Q", "twin text."}};
  db.content["c"] = {{"Q", "twin text."}};
  load_toy(ws, {db});
  std::uint64_t ambiguous = 0;
  CHECK(detect_missing_origin(ws, DatabaseId("d"), &ambiguous).empty());
  CHECK(ambiguous == 1);
}

TEST_CASE("missing origin from the documented InterPro example") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  ToyDatabase db = pili_fixture();
  ws.register_database(to_spec(db));
  for (const auto& [label, date] : db.releases) ingest_toy_release(ws, db, label);
  const auto missing = detect_missing_origin(ws, DatabaseId("interpro"));
  REQUIRE(missing.size() == 1);
  CHECK(ws.sentence_text(missing[0].sentence) == kPili);
  CHECK(missing[0].record == "IPR004086");
  CHECK(missing[0].secondaries == std::vector<std::string>{"IPR005430"});
  CHECK(missing[0].witnesses == std::vector<std::uint32_t>{1, 2, 3});
  CHECK(missing[0].record_absent_releases == 0);
  CHECK(replay_instance(ws, missing[0]).empty());
}

TEST_CASE("record absence is reported alongside instances") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  ToyDatabase db;
  db.name = "d";
  db.releases = {{"a", "2001-01-01"}, {"b", "2002-01-01"}, {"c", "2003-01-01"}};
  db.content["a"] = {{"GONE", "deleted with its record."}, {"KEPT", "removed from a live record."}, {"KEPT", "x."}};
  db.content["b"] = {{"KEPT", "x."}};
  db.content["c"] = {{"KEPT", "x."}};
  load_toy(ws, {db});
  const PatternReport r = detect_patterns(ws, DatabaseId("d"));
  REQUIRE(r.transient.instances == 2);
  CHECK(r.transient.record_absence == 1);
  for (const auto& inst : r.instances) {
    if (inst.record == "GONE") CHECK(inst.record_absent_releases == 2);
    if (inst.record == "KEPT") CHECK(inst.record_absent_releases == 0);
  }
}

TEST_CASE("detection requires every release to be ingested") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  const ToyDatabase db = t1();
  ws.register_database(to_spec(db));
  ingest_toy_release(ws, db, "v0");
  CHECK_THROWS_AS(detect_patterns(ws, DatabaseId("x")), StateError);
}

TEST_CASE("instances replay and labels are exclusive (property)") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    TempDir dir;
    Workspace ws = Workspace::open_or_create(dir.path());
    const ToyDatabase db = random_db(rng, "p");
    load_toy(ws, {db});
    const PatternReport r = detect_patterns(ws, DatabaseId("p"));
    std::set<std::pair<Fingerprint, std::string>> transient;
    for (const auto& inst : r.instances) {
      REQUIRE(replay_instance(ws, inst) == "");
      if (inst.label == PatternLabel::kTransient) transient.emplace(inst.sentence, inst.record);
    }
    for (const auto& inst : r.instances) {
      if (inst.label == PatternLabel::kPossiblyTransient) {
        REQUIRE(transient.count({inst.sentence, inst.record}) == 0);
      }
    }
  }
}

TEST_CASE("an unchanged extra release keeps origins and ages possibly transient entries (property)") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    ToyDatabase db = random_db(rng, "p");
    TempDir before_dir, after_dir;
    Workspace before = Workspace::open_or_create(before_dir.path());
    load_toy(before, {db});
    const PatternReport b = detect_patterns(before, DatabaseId("p"));

    const std::string last = db.releases.back().first;
    db.releases.emplace_back("again", "2099-01-01");
    db.content["again"] = db.content[last];
    Workspace after = Workspace::open_or_create(after_dir.path());
    load_toy(after, {db});
    const PatternReport a = detect_patterns(after, DatabaseId("p"));

    std::set<std::pair<Fingerprint, std::string>> a_missing, a_transient;
    for (const auto& inst : a.instances) {
      if (inst.label == PatternLabel::kMissingOrigin) a_missing.emplace(inst.sentence, inst.record);
      if (inst.label == PatternLabel::kTransient) a_transient.emplace(inst.sentence, inst.record);
      REQUIRE(inst.label != PatternLabel::kPossiblyTransient);
    }
    for (const auto& inst : b.instances) {
      if (inst.label == PatternLabel::kMissingOrigin) REQUIRE(a_missing.count({inst.sentence, inst.record}) == 1);
      if (inst.label == PatternLabel::kPossiblyTransient) {
        REQUIRE(a_transient.count({inst.sentence, inst.record}) == 0);  // now present twice
      }
      if (inst.label == PatternLabel::kTransient) REQUIRE(a_transient.count({inst.sentence, inst.record}) == 1);
    }
  }
}

TEST_CASE("an empty extra release turns possibly transient into transient (property)") {
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 30; ++trial) {
    ToyDatabase db = random_db(rng, "p");
    TempDir before_dir, after_dir;
    Workspace before = Workspace::open_or_create(before_dir.path());
    load_toy(before, {db});
    const PatternReport b = detect_patterns(before, DatabaseId("p"));

    db.releases.emplace_back("blank", "2099-01-01");
    Workspace after = Workspace::open_or_create(after_dir.path());
    load_toy(after, {db});
    const PatternReport a = detect_patterns(after, DatabaseId("p"));

    std::set<std::pair<Fingerprint, std::string>> a_missing, a_transient;
    for (const auto& inst : a.instances) {
      if (inst.label == PatternLabel::kMissingOrigin) a_missing.emplace(inst.sentence, inst.record);
      if (inst.label == PatternLabel::kTransient) a_transient.emplace(inst.sentence, inst.record);
      REQUIRE(inst.label != PatternLabel::kPossiblyTransient);
    }
    for (const auto& inst : b.instances) {
      if (inst.label == PatternLabel::kMissingOrigin) REQUIRE(a_missing.count({inst.sentence, inst.record}) == 1);
      if (inst.label != PatternLabel::kMissingOrigin) REQUIRE(a_transient.count({inst.sentence, inst.record}) == 1);
    }
    REQUIRE(a.transient.instances == b.transient.instances + b.possibly_transient.instances);
  }
}

TEST_CASE("merged reports count distinct sentences across members") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  ToyDatabase sp, tr;
  sp.name = "swissprot";
  tr.name = "trembl";
  for (auto* db : {&sp, &tr}) {
    db->releases = {{"1", "2001-01-01"}, {"2", "2002-01-01"}};
    db->content["1"] = {{"A", "moves around."}, {"A", "stays."}};
    db->content["2"] = {{"A", "stays."}};
  }
  load_toy(ws, {sp, tr});
  const PatternReport m =
      merge_reports("uniprotkb", {detect_patterns(ws, DatabaseId("swissprot")), detect_patterns(ws, DatabaseId("trembl"))});
  CHECK(m.transient.instances == 2);
  CHECK(m.transient.sentences == 1);
  CHECK(m.databases == std::vector<std::string>{"swissprot", "trembl"});
}
