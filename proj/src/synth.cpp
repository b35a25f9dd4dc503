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

#include "annotrace/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <set>

#include <json.hpp>

#include "annotrace/errors.hpp"

namespace annotrace {

using json = nlohmann::json;

namespace {

constexpr int kMaxRerolls = 100;

using Pairs = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

Date epoch_of(const SynthDatabase& db) { return db.epoch ? *db.epoch : db.dates.front(); }

// [previous release date or epoch, release date]
DateInterval interval_of(const SynthDatabase& db, std::size_t release) {
  return {release == 0 ? epoch_of(db) : db.dates[release - 1], db.dates[release]};
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint32_t below(std::mt19937_64& rng, std::uint64_t n) { return static_cast<std::uint32_t>(rng() % n); }

bool eligible(const GeneratorSpec& spec, PatternLabel label, const SynthDatabase& db) {
  switch (label) {
    case PatternLabel::kTransient:
      return db.dates.size() >= 2;
    case PatternLabel::kPossiblyTransient:
      return !db.dates.empty();
    case PatternLabel::kMissingOrigin:
      return db.dates.size() >= 2 && spec.records >= 2;
  }
  return false;
}

// Origin releases of `a` from which a cross instance into `b` can be
// planted: the origin must be dropped before a's latest release and some
// release of b must begin strictly after the origin release ends.
std::vector<std::pair<std::uint32_t, std::uint32_t>> cross_choices(const SynthDatabase& a, const SynthDatabase& b) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::uint32_t a0 = 0; a0 + 1 < a.dates.size(); ++a0) {
    for (std::uint32_t b0 = 0; b0 < b.dates.size(); ++b0) {
      if (interval_of(b, b0).lo > a.dates[a0]) out.emplace_back(a0, b0);
    }
  }
  return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> cross_pairs(const GeneratorSpec& spec) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::uint32_t a = 0; a < spec.databases.size(); ++a) {
    for (std::uint32_t b = 0; b < spec.databases.size(); ++b) {
      if (a != b && !cross_choices(spec.databases[a], spec.databases[b]).empty()) out.emplace_back(a, b);
    }
  }
  return out;
}

json dates_json(const std::vector<Date>& dates) {
  json out = json::array();
  for (const auto& d : dates) out.push_back(d.iso());
  return out;
}

json interval_json(const DateInterval& i) { return json::array({i.lo.iso(), i.hi.iso()}); }

DateInterval interval_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidInput("date interval must be a two-element array");
  return {Date::parse(j[0].get<std::string>()), Date::parse(j[1].get<std::string>())};
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec

SynthDatabase SynthDatabase::regular(std::string name, std::uint32_t releases, Date start, int interval_days) {
  SynthDatabase db;
  db.name = std::move(name);
  for (std::uint32_t i = 0; i < releases; ++i) db.dates.push_back(start.plus_days(static_cast<int>(i) * interval_days));
  return db;
}

void GeneratorSpec::validate() const {
  for (double r : {rates.copy_within, rates.copy_cross, rates.remove, rates.add}) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidInput("action rates must lie in [0, 1]");
  }
  if (databases.empty()) throw InvalidInput("generator needs at least one database");
  if (records == 0) throw InvalidInput("generator needs at least one record per database");
  if (vocabulary == 0) throw InvalidInput("generator needs a non-empty vocabulary");
  std::set<DatabaseId> names;
  for (const auto& db : databases) {
    if (!names.insert(DatabaseId(db.name)).second) throw InvalidInput("duplicate database '" + db.name + "'");
    if (db.dates.empty()) throw InvalidInput("database '" + db.name + "' has no releases");
    if (!std::is_sorted(db.dates.begin(), db.dates.end())) {
      throw InvalidInput("release dates of '" + db.name + "' decrease");
    }
    if (db.epoch && *db.epoch > db.dates.front()) throw InvalidInput("epoch of '" + db.name + "' follows its first release");
  }
  for (const auto& [label, quota] : quotas) {
    if (quota == 0) continue;
    const bool ok = std::any_of(databases.begin(), databases.end(),
                                [&](const SynthDatabase& db) { return eligible(*this, label, db); });
    if (!ok) {
      throw InvalidInput("quota for " + std::string(to_string(label)) + " cannot be met: " +
                         (label == PatternLabel::kPossiblyTransient ? "no database"
                          : label == PatternLabel::kTransient       ? "no database has two releases"
                                                                    : "no database has two releases and two records"));
    }
  }
  if (cross_quota > 0 && cross_pairs(*this).empty()) {
    throw InvalidInput(
        "cross quota cannot be met: no pair of databases has an origin release followed by a strictly later "
        "destination release");
  }
}

GeneratorSpec GeneratorSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("generator spec is not valid JSON: ") + e.what());
  }
  try {
    GeneratorSpec s;
    s.seed = j.value("seed", s.seed);
    s.records = j.value("records", s.records);
    s.vocabulary = j.value("vocabulary", s.vocabulary);
    s.initial_per_record = j.value("initial_per_record", s.initial_per_record);
    if (j.contains("rates")) {
      const json& r = j.at("rates");
      for (const auto& [key, _] : r.items()) {
        if (key != "copy_within" && key != "copy_cross" && key != "remove" && key != "add") {
          throw InvalidInput("unknown rate '" + key + "'");
        }
      }
      s.rates.copy_within = r.value("copy_within", s.rates.copy_within);
      s.rates.copy_cross = r.value("copy_cross", s.rates.copy_cross);
      s.rates.remove = r.value("remove", s.rates.remove);
      s.rates.add = r.value("add", s.rates.add);
    }
    for (const json& d : j.at("databases")) {
      SynthDatabase db;
      db.name = d.at("name").get<std::string>();
      if (d.contains("dates")) {
        for (const json& x : d.at("dates")) db.dates.push_back(Date::parse(x.get<std::string>()));
      } else {
        db = SynthDatabase::regular(db.name, d.at("releases").get<std::uint32_t>(),
                                    Date::parse(d.at("start").get<std::string>()), d.value("interval_days", 365));
      }
      if (d.contains("epoch")) db.epoch = Date::parse(d.at("epoch").get<std::string>());
      s.databases.push_back(std::move(db));
    }
    if (j.contains("quotas")) {
      for (const auto& [key, value] : j.at("quotas").items()) {
        if (key == "cross") {
          s.cross_quota = value.get<std::uint32_t>();
        } else {
          s.quotas[parse_pattern_label(key)] = value.get<std::uint32_t>();
        }
      }
    }
    return s;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed generator spec: ") + e.what());
  }
}

std::string GeneratorSpec::to_json() const {
  json j;
  j["seed"] = seed;
  j["records"] = records;
  j["vocabulary"] = vocabulary;
  j["initial_per_record"] = initial_per_record;
  j["rates"] = {{"copy_within", rates.copy_within},
                {"copy_cross", rates.copy_cross},
                {"remove", rates.remove},
                {"add", rates.add}};
  j["databases"] = json::array();
  for (const auto& db : databases) {
    json d{{"name", db.name}, {"dates", dates_json(db.dates)}};
    if (db.epoch) d["epoch"] = db.epoch->iso();
    j["databases"].push_back(std::move(d));
  }
  json q = json::object();
  for (const auto& [label, n] : quotas) q[std::string(to_string(label))] = n;
  q["cross"] = cross_quota;
  j["quotas"] = std::move(q);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Truth manifest

std::string TruthManifest::to_json() const {
  json j;
  j["patterns"] = json::array();
  for (const auto& p : patterns) {
    j["patterns"].push_back({{"label", to_string(p.label)},
                             {"fingerprint", p.sentence.hex()},
                             {"sentence", texts.at(p.sentence)},
                             {"database", p.database.str()},
                             {"record", p.record},
                             {"secondaries", p.secondaries},
                             {"witnesses", p.witnesses},
                             {"record_absent_releases", p.record_absent_releases}});
  }
  j["cross"] = json::array();
  for (const auto& c : cross) {
    json dest = json::array();
    for (const auto& d : c.destination_first) dest.push_back(interval_json(d));
    j["cross"].push_back({{"fingerprint", c.sentence.hex()},
                          {"sentence", texts.at(c.sentence)},
                          {"origin", c.origin},
                          {"destinations", c.destinations},
                          {"origin_first", interval_json(c.origin_first)},
                          {"destination_first", std::move(dest)},
                          {"origin_removed", interval_json(c.origin_removed)},
                          {"confidence", to_string(c.confidence)}});
  }
  return j.dump(2) + "\n";
}

TruthManifest TruthManifest::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    TruthManifest t;
    for (const json& p : j.at("patterns")) {
      PatternInstance inst;
      inst.label = parse_pattern_label(p.at("label").get<std::string>());
      inst.sentence = Fingerprint::from_hex(p.at("fingerprint").get<std::string>());
      inst.database = DatabaseId(p.at("database").get<std::string>());
      inst.record = p.at("record").get<std::string>();
      inst.secondaries = p.at("secondaries").get<std::vector<std::string>>();
      inst.witnesses = p.at("witnesses").get<std::vector<std::uint32_t>>();
      inst.record_absent_releases = p.value("record_absent_releases", 0u);
      t.texts[inst.sentence] = p.at("sentence").get<std::string>();
      t.patterns.push_back(std::move(inst));
    }
    for (const json& c : j.at("cross")) {
      CrossInstance inst;
      inst.sentence = Fingerprint::from_hex(c.at("fingerprint").get<std::string>());
      inst.origin = c.at("origin").get<std::string>();
      inst.destinations = c.at("destinations").get<std::vector<std::string>>();
      inst.origin_first = interval_from(c.at("origin_first"));
      for (const json& d : c.at("destination_first")) inst.destination_first.push_back(interval_from(d));
      inst.origin_removed = interval_from(c.at("origin_removed"));
      inst.confidence = c.at("confidence").get<std::string>() == "overlapping" ? Confidence::kOverlapping
                                                                              : Confidence::kDateOrdered;
      t.texts[inst.sentence] = c.at("sentence").get<std::string>();
      t.cross.push_back(std::move(inst));
    }
    return t;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed truth manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Presence table

PresenceTable::PresenceTable(std::vector<Database> databases, std::vector<std::string> sentences)
    : dbs_(std::move(databases)), sentences_(std::move(sentences)) {
  for (const auto& db : dbs_) {
    offsets_.push_back(stride_);
    const std::uint64_t cells = static_cast<std::uint64_t>(db.records.size()) * db.dates.size();
    if (cells > kMaxCells) throw InvalidInput("presence table exceeds " + std::to_string(kMaxCells) + " cells");
    stride_ += static_cast<std::size_t>(cells);
    if (stride_ > kMaxCells) throw InvalidInput("presence table exceeds " + std::to_string(kMaxCells) + " cells");
  }
  if (!sentences_.empty() && stride_ > kMaxCells / sentences_.size()) {
    throw InvalidInput("presence table exceeds " + std::to_string(kMaxCells) + " cells");
  }
  cells_.assign(stride_ * sentences_.size(), 0);
}

PresenceTable PresenceTable::from_workspace(const Workspace& ws) {
  std::vector<Database> dbs;
  std::set<Fingerprint> fps;
  std::vector<std::vector<std::vector<Occurrence>>> occ;
  for (const DatabaseId& id : ws.databases()) {
    const DatabaseInfo& info = ws.database(id);
    if (!info.fully_ingested()) throw StateError("database '" + id.str() + "' is not fully ingested");
    Database d{id, info.epoch, {}, {}};
    std::set<std::string> records;
    auto& per_release = occ.emplace_back();
    for (std::uint32_t v = 0; v < info.releases.size(); ++v) {
      d.dates.push_back(info.releases[v].version.date);
      per_release.push_back(ws.release_occurrences(id, v));
      for (const auto& o : per_release.back()) {
        records.insert(o.record.accession);
        fps.insert(o.sentence);
      }
    }
    d.records.assign(records.begin(), records.end());
    dbs.push_back(std::move(d));
  }
  std::vector<std::string> texts;
  for (const auto& fp : fps) texts.push_back(ws.sentence_text(fp));
  const std::vector<Fingerprint> order(fps.begin(), fps.end());
  PresenceTable t(std::move(dbs), std::move(texts));
  for (std::size_t d = 0; d < occ.size(); ++d) {
    const auto& recs = t.dbs_[d].records;
    for (const auto& release : occ[d]) {
      for (const auto& o : release) {
        const auto s = static_cast<std::size_t>(std::lower_bound(order.begin(), order.end(), o.sentence) - order.begin());
        const auto r = static_cast<std::size_t>(
            std::lower_bound(recs.begin(), recs.end(), o.record.accession) - recs.begin());
        t.set(s, d, r, o.ordinal);
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Oracle

OracleResult brute_force_detect(const PresenceTable& table, const std::vector<MergeGroup>& merges) {
  OracleResult out;
  const auto& dbs = table.databases();
  const std::size_t S = table.sentences().size();
  std::vector<Fingerprint> fps;
  for (const auto& text : table.sentences()) fps.push_back(fingerprint(text));

  // Releases after `w` in which record r of database d holds nothing.
  auto absent_after = [&](std::size_t d, std::size_t r, std::size_t w) {
    std::uint32_t n = 0;
    for (std::size_t v = w + 1; v < dbs[d].dates.size(); ++v) {
      bool any = false;
      for (std::size_t s = 0; s < S; ++s) any = any || table.at(s, d, r, v);
      if (!any) ++n;
    }
    return n;
  };

  for (std::size_t d = 0; d < dbs.size(); ++d) {
    const std::size_t R = dbs[d].records.size();
    const std::size_t V = dbs[d].dates.size();
    const std::size_t L = V - 1;
    out.ambiguous_origin[dbs[d].id.str()] = 0;
    for (std::size_t s = 0; s < S; ++s) {
      // Transient and PossiblyTransient: |R| = 1.
      for (std::size_t r = 0; r < R; ++r) {
        std::vector<std::uint32_t> held;
        for (std::size_t v = 0; v < V; ++v) {
          if (table.at(s, d, r, v)) held.push_back(static_cast<std::uint32_t>(v));
        }
        if (held.size() != 1) continue;
        PatternInstance inst;
        inst.label = held[0] == L ? PatternLabel::kPossiblyTransient : PatternLabel::kTransient;
        inst.sentence = fps[s];
        inst.database = dbs[d].id;
        inst.record = dbs[d].records[r];
        inst.witnesses = held;
        inst.record_absent_releases = absent_after(d, r, held[0]);
        out.patterns.push_back(std::move(inst));
      }

      // MissingOrigin.
      std::size_t v0 = V;
      for (std::size_t v = 0; v < V && v0 == V; ++v) {
        for (std::size_t r = 0; r < R; ++r) {
          if (table.at(s, d, r, v)) v0 = v;
        }
      }
      if (v0 == V) continue;
      std::vector<std::size_t> origins;
      for (std::size_t r = 0; r < R; ++r) {
        if (table.at(s, d, r, v0)) origins.push_back(r);
      }
      if (origins.size() > 1) {
        ++out.ambiguous_origin[dbs[d].id.str()];
        continue;
      }
      const std::size_t o = origins[0];
      std::vector<std::size_t> secondaries;
      for (std::size_t r = 0; r < R; ++r) {
        if (r == o) continue;
        bool is_secondary = false;
        for (std::size_t v = 0; v < V; ++v) {
          if (table.at(s, d, r, v) && !table.at(s, d, o, v)) is_secondary = true;
        }
        if (is_secondary) secondaries.push_back(r);
      }
      if (secondaries.empty()) continue;
      std::size_t v1 = V;
      for (std::size_t r : secondaries) {
        for (std::size_t v = 0; v < V; ++v) {
          if (table.at(s, d, r, v)) {
            v1 = std::min(v1, v);
            break;
          }
        }
      }
      std::size_t v2 = V;
      for (std::size_t v = 0; v < V && v2 == V; ++v) {
        if (table.at(s, d, o, v)) continue;
        for (std::size_t r : secondaries) {
          if (table.at(s, d, r, v)) v2 = v;
        }
      }
      PatternInstance inst;
      inst.label = PatternLabel::kMissingOrigin;
      inst.sentence = fps[s];
      inst.database = dbs[d].id;
      inst.record = dbs[d].records[o];
      for (std::size_t r : secondaries) inst.secondaries.push_back(dbs[d].records[r]);
      std::sort(inst.secondaries.begin(), inst.secondaries.end());
      inst.witnesses = {static_cast<std::uint32_t>(v0), static_cast<std::uint32_t>(v1), static_cast<std::uint32_t>(v2)};
      inst.record_absent_releases = absent_after(d, o, v0);
      out.patterns.push_back(std::move(inst));
    }
  }
  std::sort(out.patterns.begin(), out.patterns.end(), instance_less);

  // Groups: merges plus one singleton per uncovered database, by name.
  std::vector<MergeGroup> groups = merges;
  for (const auto& db : dbs) {
    bool covered = false;
    for (const auto& g : merges) {
      covered = covered || std::find(g.members.begin(), g.members.end(), db.id) != g.members.end();
    }
    if (!covered) groups.push_back({db.id.str(), {db.id}});
  }
  std::sort(groups.begin(), groups.end(), [](const MergeGroup& a, const MergeGroup& b) { return a.name < b.name; });
  std::vector<std::vector<std::size_t>> members(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& id : groups[g].members) {
      std::size_t d = 0;
      while (d < dbs.size() && dbs[d].id != id) ++d;
      if (d == dbs.size()) throw InvalidInput("unknown database '" + id.str() + "' in group '" + groups[g].name + "'");
      members[g].push_back(d);
    }
  }

  for (std::size_t s = 0; s < S; ++s) {
    struct Presence {
      bool present = false;
      DateInterval first{};
      bool in_latest = false;
      DateInterval removed{};
    };
    std::vector<Presence> ps(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (std::size_t d : members[g]) {
        const auto& db = dbs[d];
        const std::size_t V = db.dates.size();
        std::size_t first = V;
        std::size_t last = V;
        for (std::size_t v = 0; v < V; ++v) {
          for (std::size_t r = 0; r < db.records.size(); ++r) {
            if (!table.at(s, d, r, v)) continue;
            if (first == V) first = v;
            last = v;
          }
        }
        if (first == V) continue;
        const DateInterval fi{first == 0 ? db.epoch : db.dates[first - 1], db.dates[first]};
        Presence& p = ps[g];
        const bool latest = last == V - 1;
        if (!p.present) {
          p.present = true;
          p.first = fi;
        } else {
          p.first.lo = std::min(p.first.lo, fi.lo);
          p.first.hi = std::min(p.first.hi, fi.hi);
        }
        p.in_latest = p.in_latest || latest;
        if (!latest) {
          p.removed.lo = std::max(p.removed.lo, db.dates[last]);
          p.removed.hi = std::max(p.removed.hi, db.dates[last + 1]);
        }
      }
    }
    for (std::size_t o = 0; o < groups.size(); ++o) {
      if (!ps[o].present || ps[o].in_latest) continue;
      bool strictly_first = true;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (g != o && ps[g].present && !(ps[o].first.hi < ps[g].first.hi)) strictly_first = false;
      }
      if (!strictly_first) continue;
      CrossInstance inst;
      inst.sentence = fps[s];
      inst.origin = groups[o].name;
      inst.origin_first = ps[o].first;
      inst.origin_removed = ps[o].removed;
      bool ordered = true;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (g == o || !ps[g].present || !ps[g].in_latest) continue;
        inst.destinations.push_back(groups[g].name);
        inst.destination_first.push_back(ps[g].first);
        if (!(ps[o].first.hi < ps[g].first.lo)) ordered = false;
      }
      if (inst.destinations.empty()) continue;
      inst.confidence = ordered ? Confidence::kDateOrdered : Confidence::kOverlapping;
      out.cross.push_back(std::move(inst));
    }
  }
  std::sort(out.cross.begin(), out.cross.end(),
            [](const CrossInstance& a, const CrossInstance& b) { return a.sentence < b.sentence; });
  return out;
}

// ---------------------------------------------------------------------------
// Generator

std::string SynthCorpus::sentence_text(std::uint32_t id) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "synthetic sentence %04u.", id);
  return buf;
}

std::string SynthCorpus::record_name(std::uint32_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "R%08u", index);
  return buf;
}

std::uint64_t SynthCorpus::occurrences() const {
  std::uint64_t n = 0;
  for (const auto& db : content) {
    for (const auto& rel : db) n += rel.size();
  }
  return n;
}

PresenceTable SynthCorpus::presence(const std::vector<std::uint32_t>& sentence_ids) const {
  std::vector<std::uint32_t> ids = sentence_ids;
  const bool all = ids.empty();
  if (all) {
    std::set<std::uint32_t> seen;
    for (const auto& db : content) {
      for (const auto& rel : db) {
        for (const auto& [r, s] : rel) seen.insert(s);
      }
    }
    ids.assign(seen.begin(), seen.end());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto wanted = [&](std::uint32_t s) { return std::binary_search(ids.begin(), ids.end(), s); };

  std::vector<PresenceTable::Database> dbs;
  std::vector<std::vector<std::uint32_t>> record_ids;
  for (std::size_t d = 0; d < content.size(); ++d) {
    const auto& sdb = spec.databases[d];
    std::set<std::uint32_t> recs;
    for (const auto& rel : content[d]) {
      for (const auto& [r, s] : rel) {
        if (wanted(s)) recs.insert(r);
      }
    }
    PresenceTable::Database db{DatabaseId(sdb.name), epoch_of(sdb), sdb.dates, {}};
    for (auto r : recs) db.records.push_back(record_name(r));
    record_ids.emplace_back(recs.begin(), recs.end());
    dbs.push_back(std::move(db));
  }
  // Table rows follow fingerprint order, like a workspace.
  std::vector<std::pair<Fingerprint, std::uint32_t>> order;
  for (auto s : ids) order.emplace_back(fingerprint(sentence_text(s)), s);
  std::sort(order.begin(), order.end());
  std::vector<std::string> texts;
  std::vector<std::size_t> row_of_rank(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    texts.push_back(sentence_text(order[i].second));
    const auto k = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), order[i].second) - ids.begin());
    row_of_rank[k] = i;
  }
  PresenceTable t(std::move(dbs), std::move(texts));
  for (std::size_t d = 0; d < content.size(); ++d) {
    for (std::size_t v = 0; v < content[d].size(); ++v) {
      for (const auto& [r, s] : content[d][v]) {
        if (!wanted(s)) continue;
        const auto k = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), s) - ids.begin());
        const auto ri = static_cast<std::size_t>(
            std::lower_bound(record_ids[d].begin(), record_ids[d].end(), r) - record_ids[d].begin());
        t.set(row_of_rank[k], d, ri, v);
      }
    }
  }
  return t;
}

namespace {

struct Placement {
  std::uint32_t db;
  std::uint32_t release;
  std::uint32_t record;
};

struct Plant {
  std::vector<Placement> placements;
  std::optional<PatternInstance> pattern;
  std::optional<CrossInstance> cross;
};

void insert_sorted(Pairs& rel, std::pair<std::uint32_t, std::uint32_t> p) {
  rel.insert(std::lower_bound(rel.begin(), rel.end(), p), p);
}

void erase_sorted(Pairs& rel, std::pair<std::uint32_t, std::uint32_t> p) {
  const auto it = std::lower_bound(rel.begin(), rel.end(), p);
  if (it != rel.end() && *it == p) rel.erase(it);
}

Pairs evolve(const GeneratorSpec& spec, std::mt19937_64& rng, const Pairs& prev,
             const std::vector<const Pairs*>& others) {
  Pairs next;
  next.reserve(prev.size() + prev.size() / 4);
  for (const auto& p : prev) {
    if (uniform(rng) >= spec.rates.remove) next.push_back(p);
  }
  for (std::uint32_t r = 0; r < spec.records; ++r) {
    if (uniform(rng) < spec.rates.add) next.emplace_back(r, below(rng, spec.vocabulary));
    if (uniform(rng) < spec.rates.copy_within && !prev.empty()) {
      next.emplace_back(r, prev[below(rng, prev.size())].second);
    }
    if (uniform(rng) < spec.rates.copy_cross && !others.empty()) {
      const Pairs& src = *others[below(rng, others.size())];
      if (!src.empty()) next.emplace_back(r, src[below(rng, src.size())].second);
    }
  }
  std::sort(next.begin(), next.end());
  next.erase(std::unique(next.begin(), next.end()), next.end());
  return next;
}

Plant plan_pattern(const GeneratorSpec& spec, std::mt19937_64& rng, PatternLabel label, std::uint32_t db,
                   std::uint32_t sentence) {
  const auto L = static_cast<std::uint32_t>(spec.databases[db].dates.size() - 1);
  Plant plant;
  PatternInstance inst;
  inst.label = label;
  inst.sentence = fingerprint(SynthCorpus::sentence_text(sentence));
  inst.database = DatabaseId(spec.databases[db].name);
  switch (label) {
    case PatternLabel::kTransient:
    case PatternLabel::kPossiblyTransient: {
      const std::uint32_t r = below(rng, spec.records);
      const std::uint32_t w = label == PatternLabel::kTransient ? below(rng, L) : L;
      plant.placements.push_back({db, w, r});
      inst.record = SynthCorpus::record_name(r);
      inst.witnesses = {w};
      break;
    }
    case PatternLabel::kMissingOrigin: {
      const std::uint32_t o = below(rng, spec.records);
      std::uint32_t s = below(rng, spec.records - 1);
      if (s >= o) ++s;
      const std::uint32_t v0 = below(rng, L);
      const std::uint32_t v2 = v0 + 1 + below(rng, L - v0);
      const std::uint32_t v1 = v0 + 1 + below(rng, v2 - v0);
      const std::uint32_t end = v2 + below(rng, L - v2 + 1);
      for (std::uint32_t v = v0; v < v2; ++v) plant.placements.push_back({db, v, o});
      for (std::uint32_t v = v1; v <= end; ++v) plant.placements.push_back({db, v, s});
      inst.record = SynthCorpus::record_name(o);
      inst.secondaries = {SynthCorpus::record_name(s)};
      inst.witnesses = {v0, v1, v2};
      break;
    }
  }
  plant.pattern = std::move(inst);
  return plant;
}

Plant plan_cross(const GeneratorSpec& spec, std::mt19937_64& rng, std::uint32_t a, std::uint32_t b,
                 std::uint32_t sentence) {
  const SynthDatabase& da = spec.databases[a];
  const SynthDatabase& dbb = spec.databases[b];
  const auto choices = cross_choices(da, dbb);
  const auto [a0, b0] = choices[below(rng, choices.size())];
  const auto La = static_cast<std::uint32_t>(da.dates.size() - 1);
  const auto Lb = static_cast<std::uint32_t>(dbb.dates.size() - 1);
  const std::uint32_t a1 = a0 + below(rng, La - a0);
  const std::uint32_t ra = below(rng, spec.records);
  const std::uint32_t rb = below(rng, spec.records);
  Plant plant;
  for (std::uint32_t v = a0; v <= a1; ++v) plant.placements.push_back({a, v, ra});
  for (std::uint32_t v = b0; v <= Lb; ++v) plant.placements.push_back({b, v, rb});
  CrossInstance inst;
  inst.sentence = fingerprint(SynthCorpus::sentence_text(sentence));
  inst.origin = DatabaseId(da.name).str();
  inst.destinations = {DatabaseId(dbb.name).str()};
  inst.origin_first = interval_of(da, a0);
  inst.destination_first = {interval_of(dbb, b0)};
  inst.origin_removed = {da.dates[a1], da.dates[a1 + 1]};
  inst.confidence = Confidence::kDateOrdered;
  plant.cross = std::move(inst);
  return plant;
}

// True when the brute-force oracle, run on this plant's sentence alone,
// reports the planned instance.
bool verify_plant(const SynthCorpus& corpus, const Plant& plant, std::uint32_t sentence) {
  const OracleResult r = brute_force_detect(corpus.presence({sentence}));
  if (plant.pattern) {
    // Record absence depends on the rest of the corpus; compared later.
    for (PatternInstance p : r.patterns) {
      p.record_absent_releases = 0;
      if (p == *plant.pattern) return true;
    }
    return false;
  }
  return std::find(r.cross.begin(), r.cross.end(), *plant.cross) != r.cross.end();
}

}  // namespace

SynthCorpus synthesize(const GeneratorSpec& spec) {
  spec.validate();
  SynthCorpus corpus;
  corpus.spec = spec;
  std::mt19937_64 rng(spec.seed);

  // Background noise, advanced release by release in lockstep.
  const std::size_t D = spec.databases.size();
  corpus.content.resize(D);
  std::size_t max_releases = 0;
  for (const auto& db : spec.databases) max_releases = std::max(max_releases, db.dates.size());
  for (std::size_t v = 0; v < max_releases; ++v) {
    for (std::size_t d = 0; d < D; ++d) {
      if (v >= spec.databases[d].dates.size()) continue;
      if (v == 0) {
        Pairs first;
        for (std::uint32_t r = 0; r < spec.records; ++r) {
          for (std::uint32_t k = 0; k < spec.initial_per_record; ++k) first.emplace_back(r, below(rng, spec.vocabulary));
        }
        std::sort(first.begin(), first.end());
        first.erase(std::unique(first.begin(), first.end()), first.end());
        corpus.content[d].push_back(std::move(first));
        continue;
      }
      std::vector<const Pairs*> others;
      for (std::size_t e = 0; e < D; ++e) {
        if (e != d && !corpus.content[e].empty()) others.push_back(&corpus.content[e].back());
      }
      corpus.content[d].push_back(evolve(spec, rng, corpus.content[d].back(), others));
    }
  }

  // Planted instances on dedicated sentences above the vocabulary.
  std::uint32_t next_sentence = spec.vocabulary;
  auto plant = [&](const std::function<Plant(std::uint32_t)>& plan) {
    for (int attempt = 0; attempt < kMaxRerolls; ++attempt) {
      const std::uint32_t id = next_sentence++;
      Plant p = plan(id);
      for (const auto& pl : p.placements) insert_sorted(corpus.content[pl.db][pl.release], {pl.record, id});
      if (verify_plant(corpus, p, id)) {
        const Fingerprint fp = fingerprint(SynthCorpus::sentence_text(id));
        corpus.truth.texts[fp] = SynthCorpus::sentence_text(id);
        if (p.pattern) corpus.truth.patterns.push_back(std::move(*p.pattern));
        if (p.cross) corpus.truth.cross.push_back(std::move(*p.cross));
        return;
      }
      for (const auto& pl : p.placements) erase_sorted(corpus.content[pl.db][pl.release], {pl.record, id});
    }
    throw Error("generator could not plant an instance after " + std::to_string(kMaxRerolls) + " attempts");
  };

  for (const auto& [label, quota] : spec.quotas) {
    std::vector<std::uint32_t> dbs;
    for (std::uint32_t d = 0; d < D; ++d) {
      if (eligible(spec, label, spec.databases[d])) dbs.push_back(d);
    }
    for (std::uint32_t i = 0; i < quota; ++i) {
      const std::uint32_t d = dbs[i % dbs.size()];
      plant([&](std::uint32_t id) { return plan_pattern(spec, rng, label, d, id); });
    }
  }
  if (spec.cross_quota > 0) {
    const auto pairs = cross_pairs(spec);
    for (std::uint32_t i = 0; i < spec.cross_quota; ++i) {
      const auto [a, b] = pairs[i % pairs.size()];
      plant([&](std::uint32_t id) { return plan_cross(spec, rng, a, b, id); });
    }
  }
  corpus.sentence_ids = next_sentence;

  // Record absence against the finished corpus.
  for (auto& inst : corpus.truth.patterns) {
    std::size_t d = 0;
    while (DatabaseId(spec.databases[d].name) != inst.database) ++d;
    const auto r = static_cast<std::uint32_t>(std::stoul(inst.record.substr(1)));
    std::uint32_t n = 0;
    for (std::size_t v = inst.witnesses.front() + 1; v < corpus.content[d].size(); ++v) {
      const Pairs& rel = corpus.content[d][v];
      const auto it = std::lower_bound(rel.begin(), rel.end(), std::make_pair(r, std::uint32_t{0}));
      if (it == rel.end() || it->first != r) ++n;
    }
    inst.record_absent_releases = n;
  }
  std::sort(corpus.truth.patterns.begin(), corpus.truth.patterns.end(), instance_less);
  std::sort(corpus.truth.cross.begin(), corpus.truth.cross.end(),
            [](const CrossInstance& a, const CrossInstance& b) { return a.sentence < b.sentence; });
  return corpus;
}

GeneratedFiles write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json manifest;
  manifest["databases"] = json::array();
  for (std::size_t d = 0; d < corpus.content.size(); ++d) {
    const SynthDatabase& sdb = corpus.spec.databases[d];
    const std::string name = DatabaseId(sdb.name).str();
    fs::create_directories(dir / name);
    json db{{"name", name}, {"format", "generic-tsv"}, {"releases", json::array()}};
    if (sdb.epoch) db["epoch"] = sdb.epoch->iso();
    for (std::size_t v = 0; v < corpus.content[d].size(); ++v) {
      const std::string label = corpus.release_label(v);
      const fs::path rel = fs::path(name) / (label + ".tsv");
      std::ofstream out(dir / rel, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write " + (dir / rel).string());
      std::string buf;
      for (const auto& [r, s] : corpus.content[d][v]) {
        buf += SynthCorpus::record_name(r);
        buf += '\t';
        buf += SynthCorpus::sentence_text(s);
        buf += '\n';
        if (buf.size() > (1u << 20)) {
          out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
          buf.clear();
        }
      }
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      if (!out) throw Error("cannot write " + (dir / rel).string());
      db["releases"].push_back({{"label", label}, {"date", sdb.dates[v].iso()}, {"path", rel.generic_string()}});
    }
    manifest["databases"].push_back(std::move(db));
  }
  GeneratedFiles files{dir / "manifest.json", dir / "truth.json", corpus.occurrences()};
  std::ofstream(files.manifest, std::ios::binary | std::ios::trunc) << manifest.dump(2) << "\n";
  std::ofstream(files.truth, std::ios::binary | std::ios::trunc) << corpus.truth.to_json();
  if (!fs::exists(files.manifest) || !fs::exists(files.truth)) throw Error("cannot write corpus manifests in " + dir.string());
  return files;
}

GeneratedFiles generate(const GeneratorSpec& spec, const std::filesystem::path& dir) {
  return write_corpus(synthesize(spec), dir);
}

}  // namespace annotrace
