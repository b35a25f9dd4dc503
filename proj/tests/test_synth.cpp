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

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "annotrace/crossdb.hpp"
#include "annotrace/errors.hpp"
#include "annotrace/manifest.hpp"
#include "annotrace/metrics.hpp"
#include "annotrace/patterns.hpp"
#include "annotrace/synth.hpp"
#include "fixtures.hpp"
#include "synth_fixtures.hpp"

using namespace annotrace;
using namespace annotrace::testing;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GeneratorSpec two_db_spec(std::uint64_t seed) {
  GeneratorSpec s;
  s.seed = seed;
  s.records = 12;
  s.vocabulary = 60;
  s.databases.push_back(SynthDatabase::regular("alpha", 5, Date::parse("2000-01-01"), 365));
  s.databases.push_back(SynthDatabase::regular("beta", 5, Date::parse("2000-07-01"), 365));
  return s;
}

std::vector<PatternInstance> detector_patterns(const Workspace& ws) {
  std::vector<PatternInstance> all;
  for (const auto& id : ws.databases()) {
    auto r = detect_patterns(ws, id);
    all.insert(all.end(), r.instances.begin(), r.instances.end());
  }
  std::sort(all.begin(), all.end(), instance_less);
  return all;
}

}  // namespace

TEST_CASE("generation is deterministic given the seed") {
  GeneratorSpec s = two_db_spec(42);
  s.quotas[PatternLabel::kMissingOrigin] = 3;
  s.cross_quota = 2;
  TempDir a, b;
  generate(s, a.path());
  generate(s, b.path());
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    names.push_back(rel.string());
    CHECK(slurp(e.path()) == slurp(b.path() / rel));
  }
  CHECK(names.size() == 2 + 10);
  s.seed = 43;
  TempDir c;
  generate(s, c.path());
  CHECK(slurp(a / "alpha/r4.tsv") != slurp(c / "alpha/r4.tsv"));
}

TEST_CASE("quotas are met exactly") {
  GeneratorSpec s = two_db_spec(7);
  s.quotas[PatternLabel::kMissingOrigin] = 5;
  s.quotas[PatternLabel::kTransient] = 3;
  const SynthCorpus c = synthesize(s);
  CHECK(c.truth.patterns.size() == 8);
  CHECK(std::count_if(c.truth.patterns.begin(), c.truth.patterns.end(),
                      [](const auto& p) { return p.label == PatternLabel::kMissingOrigin; }) == 5);
  CHECK(c.truth.cross.empty());
}

TEST_CASE("unachievable quotas are rejected before any file is written") {
  GeneratorSpec s;
  s.databases.push_back(SynthDatabase::regular("solo", 1, Date::parse("2000-01-01"), 365));
  s.quotas[PatternLabel::kTransient] = 1;
  TempDir t;
  CHECK_THROWS_AS(generate(s, t / "out"), InvalidInput);
  CHECK_FALSE(std::filesystem::exists(t / "out"));

  s.quotas = {{PatternLabel::kPossiblyTransient, 2}};
  CHECK_NOTHROW(s.validate());
  s.quotas = {{PatternLabel::kMissingOrigin, 1}};
  CHECK_THROWS_AS(s.validate(), InvalidInput);

  GeneratorSpec one_record = two_db_spec(1);
  one_record.records = 1;
  one_record.quotas[PatternLabel::kMissingOrigin] = 1;
  CHECK_THROWS_AS(one_record.validate(), InvalidInput);

  // Same-day calendars leave no strictly later destination.
  GeneratorSpec same;
  same.databases.push_back(SynthDatabase::regular("a", 3, Date::parse("2000-01-01"), 0));
  same.databases.push_back(SynthDatabase::regular("b", 3, Date::parse("2000-01-01"), 0));
  same.cross_quota = 1;
  CHECK_THROWS_AS(same.validate(), InvalidInput);

  GeneratorSpec bad_rate = two_db_spec(1);
  bad_rate.rates.remove = 1.5;
  CHECK_THROWS_AS(bad_rate.validate(), InvalidInput);
}

TEST_CASE("generator spec JSON round trip") {
  GeneratorSpec s = two_db_spec(9);
  s.quotas[PatternLabel::kTransient] = 4;
  s.cross_quota = 2;
  s.databases[1].epoch = Date::parse("1999-01-01");
  const GeneratorSpec back = GeneratorSpec::from_json(s.to_json());
  CHECK(back.to_json() == s.to_json());
  const GeneratorSpec short_form = GeneratorSpec::from_json(
      R"({"seed": 3, "databases": [{"name": "a", "releases": 3, "start": "2001-01-01", "interval_days": 30}],
          "quotas": {"transient": 2, "cross": 0}})");
  REQUIRE(short_form.databases.size() == 1);
  CHECK(short_form.databases[0].dates.back().iso() == "2001-03-02");
  CHECK(short_form.quotas.at(PatternLabel::kTransient) == 2);
  CHECK_THROWS_AS(GeneratorSpec::from_json(R"({"databases": [], "rates": {"copy": 0.1}})"), InvalidInput);
  CHECK_THROWS_AS(GeneratorSpec::from_json("{"), InvalidInput);
}

TEST_CASE("truth manifest JSON round trip") {
  GeneratorSpec s = two_db_spec(11);
  s.quotas[PatternLabel::kMissingOrigin] = 2;
  s.cross_quota = 2;
  const SynthCorpus c = synthesize(s);
  const TruthManifest back = TruthManifest::from_json(c.truth.to_json());
  CHECK(back.patterns == c.truth.patterns);
  CHECK(back.cross == c.truth.cross);
  CHECK(back.texts == c.truth.texts);
}

TEST_CASE("oracle on T1") {
  TempDir t;
  Workspace ws = Workspace::open_or_create(t.path());
  load_toy(ws, {t1()});
  const OracleResult r = brute_force_detect(PresenceTable::from_workspace(ws));
  REQUIRE(r.patterns.size() == 3);
  CHECK(r.patterns[0].label == PatternLabel::kTransient);
  CHECK(r.patterns[0].sentence == fp_of(kS1));
  CHECK(r.patterns[0].record == "A");
  CHECK(r.patterns[1].label == PatternLabel::kPossiblyTransient);
  CHECK(r.patterns[1].sentence == fp_of(kS2));
  CHECK(r.patterns[1].record == "B");
  CHECK(r.patterns[2].label == PatternLabel::kMissingOrigin);
  CHECK(r.patterns[2].sentence == fp_of(kS3));
  CHECK(r.patterns[2].record == "A");
  CHECK(r.patterns[2].secondaries == std::vector<std::string>{"B"});
  CHECK(r.patterns[2].witnesses == std::vector<std::uint32_t>{0, 1, 2});
  CHECK(r.ambiguous_origin.at("x") == 0);
  CHECK(r.cross.empty());
  CHECK(r.patterns == detector_patterns(ws));
}

TEST_CASE("oracle on an empty corpus") {
  TempDir t;
  Workspace ws = Workspace::open_or_create(t.path());
  ToyDatabase db;
  db.name = "empty";
  db.releases = {{"1", "2000-01-01"}, {"2", "2001-01-01"}};
  load_toy(ws, {db});
  const PresenceTable table = PresenceTable::from_workspace(ws);
  CHECK(table.cells() == 0);
  const OracleResult r = brute_force_detect(table);
  CHECK(r.patterns.empty());
  CHECK(r.cross.empty());
  CHECK(brute_force_detect(PresenceTable({}, {})).patterns.empty());
}

TEST_CASE("presence table size guard") {
  PresenceTable::Database db{DatabaseId("big"), Date::parse("2000-01-01"), {Date::parse("2000-01-01")}, {}};
  for (int i = 0; i < 1000; ++i) db.records.push_back(SynthCorpus::record_name(static_cast<std::uint32_t>(i)));
  CHECK_NOTHROW(PresenceTable({db}, std::vector<std::string>(1000, "s.")));
  CHECK_THROWS_AS(PresenceTable({db}, std::vector<std::string>(1001, "s.")), InvalidInput);
}

TEST_CASE("oracle requires a fully ingested workspace") {
  TempDir t;
  Workspace ws = Workspace::open_or_create(t.path());
  ToyDatabase db = t1();
  ws.register_database(to_spec(db));
  ingest_toy_release(ws, db, "v0");
  CHECK_THROWS_AS(PresenceTable::from_workspace(ws), StateError);
}

TEST_CASE("detector equals oracle on random corpora (property)") {
  std::mt19937_64 rng(5150);
  for (int i = 0; i < 120; ++i) {
    const GeneratorSpec spec = random_small_spec(rng, 3);
    const SynthCorpus corpus = synthesize(spec);
    TempDir t;
    Workspace ws = Workspace::open_or_create(t.path());
    load_synth(ws, corpus);
    const PresenceTable table = PresenceTable::from_workspace(ws);
    REQUIRE(table.sentences().size() <= 200);
    const OracleResult oracle = brute_force_detect(table);
    REQUIRE(detector_patterns(ws) == oracle.patterns);
    for (const auto& id : ws.databases()) {
      REQUIRE(detect_patterns(ws, id).ambiguous_origin == oracle.ambiguous_origin.at(id.str()));
    }
    REQUIRE(detect_cross_missing_origin(ws, {}) == oracle.cross);
    if (ws.databases().size() >= 2) {
      const std::vector<MergeGroup> merges{{"pair", {ws.databases()[0], ws.databases()[1]}}};
      REQUIRE(detect_cross_missing_origin(ws, merges) == brute_force_detect(table, merges).cross);
    }
    // The in-memory view agrees with the store's.
    const OracleResult direct = brute_force_detect(corpus.presence());
    REQUIRE(direct.patterns == oracle.patterns);
    REQUIRE(direct.cross == oracle.cross);
  }
}

TEST_CASE("planted instances are a subset of the oracle and replay true (property)") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    GeneratorSpec s = two_db_spec(seed);
    s.rates.copy_cross = 0.2;
    s.quotas[PatternLabel::kTransient] = 4;
    s.quotas[PatternLabel::kPossiblyTransient] = 4;
    s.quotas[PatternLabel::kMissingOrigin] = 4;
    s.cross_quota = 3;
    TempDir t;
    const GeneratedFiles files = generate(s, t / "corpus");
    Workspace ws = Workspace::open_or_create(t / "ws");
    ingest_manifest(ws, Manifest::load(files.manifest));
    const TruthManifest truth = TruthManifest::from_json(slurp(files.truth));
    REQUIRE(truth.patterns.size() == 12);
    REQUIRE(truth.cross.size() == 3);
    const OracleResult oracle = brute_force_detect(PresenceTable::from_workspace(ws));
    const auto detected = detector_patterns(ws);
    for (const auto& p : truth.patterns) {
      CHECK(std::find(oracle.patterns.begin(), oracle.patterns.end(), p) != oracle.patterns.end());
      CHECK(std::find(detected.begin(), detected.end(), p) != detected.end());
      CHECK(replay_instance(ws, p).empty());
    }
    const auto cross = detect_cross_missing_origin(ws, {});
    for (const auto& c : truth.cross) {
      CHECK(std::find(oracle.cross.begin(), oracle.cross.end(), c) != oracle.cross.end());
      CHECK(std::find(cross.begin(), cross.end(), c) != cross.end());
      CHECK(c.confidence == Confidence::kDateOrdered);
      CHECK(replay_cross_instance(ws, {}, c).empty());
    }
  }
}

TEST_CASE("unique share does not grow with the copy rate (property)") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::int64_t previous = 10001;
    for (double rate : {0.0, 0.25, 0.5, 1.0}) {
      GeneratorSpec s;
      s.seed = seed;
      s.records = 400;
      s.vocabulary = 100000;
      s.rates = {rate, 0.0, 0.1, 0.3};
      s.databases.push_back(SynthDatabase::regular("copy", 6, Date::parse("2000-01-01"), 365));
      const SynthCorpus c = synthesize(s);
      TempDir t;
      Workspace ws = Workspace::open_or_create(t.path());
      load_synth(ws, c);
      const auto profile = redundancy_profile(ws, {DatabaseId("copy")}, ReleaseSelector::kLatest);
      REQUIRE(profile.size() == 1);
      const std::int64_t pct = profile[0].unique_pct.hundredths;
      CHECK(pct <= previous);
      previous = pct;
    }
  }
}
