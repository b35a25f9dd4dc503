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

#include <numeric>
#include <random>

#include "annotrace/crossdb.hpp"
#include "annotrace/errors.hpp"
#include "annotrace/patterns.hpp"
#include "fixtures.hpp"

using namespace annotrace;
using namespace annotrace::testing;

namespace {

DateInterval iv(const char* lo, const char* hi) { return {Date::parse(lo), Date::parse(hi)}; }

}  // namespace

TEST_CASE("merge group parsing and resolution") {
  const MergeGroup g = parse_merge_group("uniprotkb=swissprot,TrEMBL");
  CHECK(g.name == "uniprotkb");
  REQUIRE(g.members.size() == 2);
  CHECK(g.members[1].str() == "trembl");
  CHECK_THROWS_AS(parse_merge_group("nogroup"), InvalidInput);
  CHECK_THROWS_AS(parse_merge_group("a="), InvalidInput);
  CHECK_THROWS_AS(parse_merge_group("a=x,,y"), InvalidInput);

  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  for (const std::string n : {"swissprot", "trembl", "prints"}) {
    ToyDatabase db;
    db.name = n;
    db.releases = {{"1", "2001-01-01"}};
    ws.register_database(to_spec(db));
  }
  const auto groups = resolve_groups(ws, {g});
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].name == "prints");
  CHECK(groups[1].name == "uniprotkb");
  CHECK_THROWS_AS(resolve_groups(ws, {g, parse_merge_group("other=trembl")}), InvalidInput);
  CHECK_THROWS_AS(resolve_groups(ws, {parse_merge_group("prints=swissprot")}), InvalidInput);
  CHECK_THROWS_AS(resolve_groups(ws, {parse_merge_group("x=nosuchdb")}), NotFound);
}

TEST_CASE("combination partition of a two-sentence case") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  ToyDatabase g1, g2;
  g1.name = "g1";
  g2.name = "g2";
  g1.releases = g2.releases = {{"1", "2001-01-01"}};
  g1.content["1"] = {{"A", "x only here."}, {"A", "y shared."}};
  g2.content["1"] = {{"B", "y shared."}};
  load_toy(ws, {g1, g2});
  const auto rows = combination_partition(ws, {});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].name() == "g1");
  CHECK(rows[0].count == 1);
  CHECK(rows[1].name() == "g1; g2");
  CHECK(rows[1].count == 1);
}

TEST_CASE("single database partition equals lifetime unique") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  load_toy(ws, {t1()});
  const auto rows = combination_partition(ws, {});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].count == 4);
}

TEST_CASE("a sentence in five groups lands in the five-way row") {
  const std::string vision = "Visual pigments are the light-absorbing molecules that mediate vision.";
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  std::vector<ToyDatabase> dbs;
  for (const std::string n : {"interpro", "nextprot", "prints", "prosite", "swissprot", "trembl"}) {
    ToyDatabase db;
    db.name = n;
    db.releases = {{"1", "2010-01-01"}};
    db.content["1"] = {{"E1", "private to " + n + "."}};
    if (n != "trembl") db.content["1"].emplace_back("E2", vision);
    dbs.push_back(db);
  }
  load_toy(ws, dbs);
  const auto rows = combination_partition(ws, {parse_merge_group("uniprotkb=swissprot,trembl")});
  const auto five = std::find_if(rows.begin(), rows.end(), [](const CombinationRow& r) { return r.combination.size() == 5; });
  REQUIRE(five != rows.end());
  CHECK(five->name() == "interpro; nextprot; prints; prosite; uniprotkb");
  CHECK(five->count == 1);
  CHECK(rows.front().name() == "uniprotkb");  // swissprot and trembl private sentences
  CHECK(rows.front().count == 2);
  const std::uint64_t total = std::accumulate(rows.begin(), rows.end(), std::uint64_t{0},
                                              [](std::uint64_t s, const CombinationRow& r) { return s + r.count; });
  CHECK(total == ws.sentence_count());
}

TEST_CASE("partition sums and merging (property)") {
  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 20; ++trial) {
    TempDir dir;
    Workspace ws = Workspace::open_or_create(dir.path());
    std::vector<ToyDatabase> dbs;
    for (const std::string n : {"a", "b", "c", "d"}) {
      ToyDatabase db;
      db.name = n;
      const int releases = 1 + static_cast<int>(rng() % 3);
      for (int r = 0; r < releases; ++r) {
        const std::string label = "r" + std::to_string(r);
        db.releases.emplace_back(label, std::to_string(2000 + r) + "-01-01");
        const int n_occ = static_cast<int>(rng() % 60);
        for (int i = 0; i < n_occ; ++i) {
          db.content[label].emplace_back("E" + std::to_string(rng() % 5), "t" + std::to_string(rng() % 50) + ".");
        }
      }
      dbs.push_back(db);
    }
    load_toy(ws, dbs);
    const auto sum = [](const std::vector<CombinationRow>& rows) {
      std::uint64_t s = 0;
      for (const auto& r : rows) s += r.count;
      return s;
    };
    const auto plain = combination_partition(ws, {});
    const auto merged = combination_partition(ws, {parse_merge_group("ab=a,b")});
    CHECK(sum(plain) == ws.sentence_count());
    CHECK(sum(merged) == ws.sentence_count());
    CHECK(merged.size() <= plain.size());
    for (std::size_t i = 1; i < plain.size(); ++i) {
      CHECK((plain[i - 1].count > plain[i].count ||
             (plain[i - 1].count == plain[i].count && plain[i - 1].name() < plain[i].name())));
    }
  }
}

TEST_CASE("cross-database timeline of the PRINTS to InterPro example") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  load_toy(ws, prints_fixture());
  const CrossTimeline t = cross_timeline(ws, fp_of(kCopied), {});
  REQUIRE(t.groups.size() == 2);
  CHECK(t.groups[0].group == "prints");
  CHECK(t.groups[0].first_seen == iv("1998-06-01", "1999-06-01"));
  CHECK_FALSE(t.groups[0].in_latest);
  CHECK(t.groups[1].group == "interpro");
  CHECK(t.groups[1].first_seen == iv("1999-10-01", "2000-06-01"));
  CHECK(t.groups[1].in_latest);

  REQUIRE(t.events.size() == 4);
  CHECK(t.events[0].group == "prints");
  CHECK(t.events[0].kind == EventKind::kAppear);
  CHECK(t.events[0].interval == iv("1998-06-01", "1999-06-01"));
  CHECK(t.events[1].record == "IPR001055");
  CHECK(t.events[1].release.date == Date::parse("2000-06-01"));
  CHECK(t.events[2].record == "IPR018298");
  CHECK(t.events[2].kind == EventKind::kAppear);
  CHECK(t.events[3].group == "prints");
  CHECK(t.events[3].kind == EventKind::kDisappear);
  CHECK(t.events[3].interval == iv("2007-06-01", "2008-06-01"));

  CHECK_THROWS_AS(cross_timeline(ws, fp_of("unknown sentence."), {}), NotFound);
}

TEST_CASE("cross-database missing origin on the PRINTS to InterPro example") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  load_toy(ws, prints_fixture());

  // Invisible inside InterPro alone.
  for (const auto& inst : detect_patterns(ws, DatabaseId("interpro")).instances) {
    CHECK(inst.sentence != fp_of(kCopied));
  }

  const auto found = detect_cross_missing_origin(ws, {}, "prints", {"interpro"});
  REQUIRE(found.size() == 1);
  const CrossInstance& c = found[0];
  CHECK(c.sentence == fp_of(kCopied));
  CHECK(c.origin == "prints");
  CHECK(c.destinations == std::vector<std::string>{"interpro"});
  CHECK(c.origin_first == iv("1998-06-01", "1999-06-01"));
  CHECK(c.destination_first[0] == iv("1999-10-01", "2000-06-01"));
  CHECK(c.origin_removed == iv("2007-06-01", "2008-06-01"));
  CHECK(c.confidence == Confidence::kDateOrdered);
  CHECK(replay_cross_instance(ws, {}, c).empty());

  CHECK(detect_cross_missing_origin(ws, {}) == found);
  CHECK(detect_cross_missing_origin(ws, {}, "interpro").empty());
}

TEST_CASE("cross-database edge cases") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  ToyDatabase a, b;
  a.name = "a";
  b.name = "b";
  a.releases = {{"1", "1998-06-01"}, {"2", "1999-06-01"}, {"3", "2000-06-01"}};
  b.releases = {{"1", "1999-01-01"}, {"2", "2000-01-01"}, {"3", "2001-01-01"}};
  // Overlapping first-seen intervals: a [1998-06-01, 1999-06-01], b [1999-01-01, 2000-01-01].
  a.content["2"] = {{"A1", "overlap case."}, {"A1", "kept everywhere."}};
  a.content["3"] = {{"A1", "kept everywhere."}};
  b.content["2"] = {{"B1", "overlap case."}, {"B1", "kept everywhere."}};
  b.content["3"] = {{"B1", "overlap case."}, {"B1", "kept everywhere."}};
  // One group only.
  b.content["3"].emplace_back("B2", "only in b.");
  load_toy(ws, {a, b});

  const auto found = detect_cross_missing_origin(ws, {});
  REQUIRE(found.size() == 1);
  CHECK(found[0].sentence == fp_of("overlap case."));
  CHECK(found[0].confidence == Confidence::kOverlapping);
  CHECK(replay_cross_instance(ws, {}, found[0]).empty());

  const CrossTimeline single = cross_timeline(ws, fp_of("only in b."), {});
  REQUIRE(single.groups.size() == 1);
  REQUIRE(single.events.size() == 1);
  CHECK(single.events[0].group == "b");

  CHECK_THROWS_AS(detect_cross_missing_origin(ws, {}, "nosuch"), NotFound);
}

TEST_CASE("cross detection requires full ingestion") {
  TempDir dir;
  Workspace ws = Workspace::open_or_create(dir.path());
  const ToyDatabase db = t1();
  ws.register_database(to_spec(db));
  ingest_toy_release(ws, db, "v0");
  CHECK_THROWS_AS(detect_cross_missing_origin(ws, {}), StateError);
}

TEST_CASE("cross instances replay (property)") {
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 25; ++trial) {
    TempDir dir;
    Workspace ws = Workspace::open_or_create(dir.path());
    std::vector<ToyDatabase> dbs;
    for (const std::string n : {"p", "q", "r"}) {
      ToyDatabase db;
      db.name = n;
      const int releases = 1 + static_cast<int>(rng() % 5);
      int day = static_cast<int>(rng() % 200);
      for (int r = 0; r < releases; ++r) {
        day += 30 + static_cast<int>(rng() % 300);
        const Date d = Date::parse("1995-01-01").plus_days(day);
        const std::string label = "r" + std::to_string(r);
        db.releases.emplace_back(label, d.iso());
        for (int i = 0; i < 25; ++i) {
          if (rng() % 3 == 0) db.content[label].emplace_back("E" + std::to_string(rng() % 3), "c" + std::to_string(rng() % 30) + ".");
        }
      }
      dbs.push_back(db);
    }
    load_toy(ws, dbs);
    const std::vector<MergeGroup> merges = trial % 2 ? std::vector<MergeGroup>{parse_merge_group("pq=p,q")}
                                                     : std::vector<MergeGroup>{};
    for (const auto& inst : detect_cross_missing_origin(ws, merges)) {
      REQUIRE(replay_cross_instance(ws, merges, inst) == "");
    }
  }
}
