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

#include "annotrace/patterns.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "annotrace/errors.hpp"

namespace annotrace {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

bool holds(const std::vector<std::uint32_t>& ordinals, std::uint32_t v) {
  return std::binary_search(ordinals.begin(), ordinals.end(), v);
}

void require_ingested(const Workspace& ws, const DatabaseId& db) {
  const DatabaseInfo& info = ws.database(db);
  if (!info.fully_ingested()) {
    throw StateError("database '" + db.str() + "' has releases that are not ingested (" +
                     std::to_string(info.ingested_count()) + " of " + std::to_string(info.releases.size()) + ")");
  }
}

PatternCounts& counts_of(PatternReport& r, PatternLabel label) {
  switch (label) {
    case PatternLabel::kTransient:
      return r.transient;
    case PatternLabel::kPossiblyTransient:
      return r.possibly_transient;
    case PatternLabel::kMissingOrigin:
      break;
  }
  return r.missing_origin;
}

std::vector<PatternInstance> only(std::vector<PatternInstance> all, PatternLabel label) {
  std::erase_if(all, [&](const PatternInstance& i) { return i.label != label; });
  return all;
}

}  // namespace

std::string_view to_string(PatternLabel label) {
  switch (label) {
    case PatternLabel::kTransient:
      return "transient";
    case PatternLabel::kPossiblyTransient:
      return "possibly-transient";
    case PatternLabel::kMissingOrigin:
      break;
  }
  return "missing-origin";
}

PatternLabel parse_pattern_label(std::string_view name) {
  for (auto l : {PatternLabel::kTransient, PatternLabel::kPossiblyTransient, PatternLabel::kMissingOrigin}) {
    if (to_string(l) == name) return l;
  }
  throw InvalidInput("unknown pattern '" + std::string(name) +
                     "', expected transient, possibly-transient or missing-origin");
}

bool instance_less(const PatternInstance& a, const PatternInstance& b) {
  if (a.label != b.label) return a.label < b.label;
  if (a.sentence != b.sentence) return a.sentence < b.sentence;
  if (a.database != b.database) return a.database < b.database;
  return a.record < b.record;
}

const PatternCounts& PatternReport::counts(PatternLabel label) const {
  return counts_of(const_cast<PatternReport&>(*this), label);
}

std::vector<PatternInstance> classify_history(const Fingerprint& sentence, const DatabaseId& database,
                                              const EntryHistory& history, std::uint32_t latest, bool* ambiguous) {
  std::vector<PatternInstance> out;
  if (ambiguous) *ambiguous = false;
  if (history.empty()) return out;

  for (const auto& [acc, ordinals] : history) {
    if (ordinals.size() != 1) continue;
    PatternInstance inst;
    inst.label = ordinals[0] == latest ? PatternLabel::kPossiblyTransient : PatternLabel::kTransient;
    inst.sentence = sentence;
    inst.database = database;
    inst.record = acc;
    inst.witnesses = {ordinals[0]};
    out.push_back(std::move(inst));
  }

  std::uint32_t v0 = kNone;
  for (const auto& [acc, ordinals] : history) v0 = std::min(v0, ordinals.front());
  std::size_t origin = 0;
  std::size_t origins = 0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].second.front() == v0) {
      origin = i;
      ++origins;
    }
  }
  if (origins > 1) {
    if (ambiguous) *ambiguous = true;
    return out;
  }
  const auto& po = history[origin].second;
  std::uint32_t v1 = kNone;
  std::uint32_t v2 = kNone;
  std::vector<std::string> secondaries;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i == origin) continue;
    const auto& ps = history[i].second;
    const auto t = std::find_if(ps.begin(), ps.end(), [&](std::uint32_t v) { return !holds(po, v); });
    if (t == ps.end()) continue;
    secondaries.push_back(history[i].first);
    v1 = std::min(v1, ps.front());
    v2 = std::min(v2, *t);
  }
  if (!secondaries.empty()) {
    PatternInstance inst;
    inst.label = PatternLabel::kMissingOrigin;
    inst.sentence = sentence;
    inst.database = database;
    inst.record = history[origin].first;
    inst.secondaries = std::move(secondaries);
    inst.witnesses = {v0, v1, v2};
    out.push_back(std::move(inst));
  }
  return out;
}

PatternReport detect_patterns(const Workspace& ws, const DatabaseId& db) {
  require_ingested(ws, db);
  const DatabaseInfo& info = ws.database(db);
  const std::uint32_t latest = info.latest_ordinal();

  // present[ordinal][record] for the record-absence audit.
  std::vector<std::vector<bool>> present(info.releases.size());
  for (std::uint32_t o = 0; o < info.releases.size(); ++o) {
    for (const std::uint32_t rid : ws.release_records(db, o)) {
      if (present[o].size() <= rid) present[o].resize(rid + 1, false);
      present[o][rid] = true;
    }
  }
  auto absent_after = [&](std::uint32_t rid, std::uint32_t from) {
    std::uint32_t n = 0;
    for (std::uint32_t o = from + 1; o <= latest; ++o) {
      if (rid >= present[o].size() || !present[o][rid]) ++n;
    }
    return n;
  };

  PatternReport report;
  report.scope = db.str();
  report.databases = {db.str()};
  EntryHistory history;
  std::vector<std::uint32_t> record_ids;
  ws.scan_sentences({db}, [&](const Fingerprint& fp, std::span<const PresenceHit> hits) {
    ++report.sentences_scanned;
    history.clear();
    record_ids.clear();
    for (const PresenceHit& h : hits) {
      if (record_ids.empty() || record_ids.back() != h.record) {
        record_ids.push_back(h.record);
        history.emplace_back(ws.accession(h.database, h.record), std::vector<std::uint32_t>{});
      }
      history.back().second.push_back(h.ordinal);
    }
    bool ambiguous = false;
    auto found = classify_history(fp, db, history, latest, &ambiguous);
    if (ambiguous) ++report.ambiguous_origin;
    bool seen[3] = {false, false, false};
    for (auto& inst : found) {
      const auto it = std::lower_bound(history.begin(), history.end(), inst.record,
                                       [](const auto& entry, const std::string& acc) { return entry.first < acc; });
      const std::uint32_t rid = record_ids[static_cast<std::size_t>(it - history.begin())];
      inst.record_absent_releases = absent_after(rid, inst.witnesses.front());
      PatternCounts& c = counts_of(report, inst.label);
      ++c.instances;
      if (inst.record_absent_releases > 0) ++c.record_absence;
      const auto li = static_cast<std::size_t>(inst.label);
      if (!seen[li]) {
        seen[li] = true;
        ++c.sentences;
      }
      report.instances.push_back(std::move(inst));
    }
  });
  std::sort(report.instances.begin(), report.instances.end(), instance_less);
  return report;
}

std::vector<PatternInstance> detect_transient(const Workspace& ws, const DatabaseId& db) {
  return only(detect_patterns(ws, db).instances, PatternLabel::kTransient);
}

std::vector<PatternInstance> detect_possibly_transient(const Workspace& ws, const DatabaseId& db) {
  return only(detect_patterns(ws, db).instances, PatternLabel::kPossiblyTransient);
}

std::vector<PatternInstance> detect_missing_origin(const Workspace& ws, const DatabaseId& db,
                                                   std::uint64_t* ambiguous_origin) {
  PatternReport r = detect_patterns(ws, db);
  if (ambiguous_origin) *ambiguous_origin = r.ambiguous_origin;
  return only(std::move(r.instances), PatternLabel::kMissingOrigin);
}

std::set<PatternLabel> classify_entry(const Workspace& ws, const Fingerprint& sentence, const RecordId& record) {
  const SentenceTimeline t = ws.timeline(sentence);
  std::set<PatternLabel> out;
  const auto db = t.databases.find(record.database.str());
  if (db == t.databases.end()) return out;
  const auto rec = db->second.find(record.accession);
  if (rec == db->second.end() || rec->second.size() != 1) return out;
  const std::uint32_t latest = ws.database(record.database).latest_ordinal();
  out.insert(rec->second.front() == latest ? PatternLabel::kPossiblyTransient : PatternLabel::kTransient);
  return out;
}

PatternReport merge_reports(const std::string& scope, const std::vector<PatternReport>& members) {
  PatternReport out;
  out.scope = scope;
  std::map<PatternLabel, std::set<Fingerprint>> sentences;
  for (const auto& m : members) {
    out.databases.insert(out.databases.end(), m.databases.begin(), m.databases.end());
    out.instances.insert(out.instances.end(), m.instances.begin(), m.instances.end());
    out.ambiguous_origin += m.ambiguous_origin;
    out.sentences_scanned += m.sentences_scanned;
  }
  std::sort(out.databases.begin(), out.databases.end());
  std::sort(out.instances.begin(), out.instances.end(), instance_less);
  for (const auto& inst : out.instances) {
    PatternCounts& c = counts_of(out, inst.label);
    ++c.instances;
    if (inst.record_absent_releases > 0) ++c.record_absence;
    sentences[inst.label].insert(inst.sentence);
  }
  for (const auto& [label, set] : sentences) counts_of(out, label).sentences = set.size();
  return out;
}

std::string replay_instance(const Workspace& ws, const PatternInstance& inst) {
  if (!ws.contains(inst.sentence)) return "sentence is not in the store";
  const SentenceTimeline t = ws.timeline(inst.sentence);
  const auto dbit = t.databases.find(inst.database.str());
  if (dbit == t.databases.end()) return "sentence never occurs in the database";
  const auto& records = dbit->second;
  const std::uint32_t latest = ws.database(inst.database).latest_ordinal();
  const auto rec = records.find(inst.record);
  if (rec == records.end()) return "record never holds the sentence";
  const auto& pr = rec->second;

  if (inst.label != PatternLabel::kMissingOrigin) {
    if (inst.witnesses.size() != 1) return "expected one witness";
    const std::uint32_t w = inst.witnesses[0];
    if (pr != std::vector<std::uint32_t>{w}) return "record is present in more than the witness release";
    if (inst.label == PatternLabel::kTransient && w == latest) return "witness is the latest release";
    if (inst.label == PatternLabel::kPossiblyTransient && w != latest) return "witness is not the latest release";
    return {};
  }

  if (inst.witnesses.size() != 3) return "expected three witnesses";
  const std::uint32_t v0 = inst.witnesses[0], v1 = inst.witnesses[1], v2 = inst.witnesses[2];
  for (const auto& [acc, ords] : records) {
    if (ords.front() < v0) return "sentence appears before v0 in record " + acc;
    if (acc != inst.record && holds(ords, v0)) return "origin is not unique at v0";
  }
  if (!holds(pr, v0)) return "origin lacks the sentence at v0";
  if (inst.secondaries.empty()) return "no secondaries";
  std::uint32_t first_secondary = kNone;
  bool v2_witnessed = false;
  for (const auto& s : inst.secondaries) {
    const auto it = records.find(s);
    if (it == records.end() || s == inst.record) return "secondary " + s + " never holds the sentence";
    const auto& ps = it->second;
    if (std::all_of(ps.begin(), ps.end(), [&](std::uint32_t v) { return holds(pr, v); })) {
      return "secondary " + s + " never holds the sentence without the origin";
    }
    first_secondary = std::min(first_secondary, ps.front());
    if (holds(ps, v2)) v2_witnessed = true;
  }
  if (!(v1 > v0) || first_secondary != v1) return "v1 is not the first presence of a secondary";
  if (!(v2 > v0) || holds(pr, v2) || !v2_witnessed) return "v2 does not show the origin lacking it while a secondary has it";
  for (std::uint32_t v = v0 + 1; v < v2; ++v) {
    if (holds(pr, v)) continue;
    for (const auto& s : inst.secondaries) {
      if (holds(records.at(s), v)) return "an earlier ordinal than v2 qualifies";
    }
  }
  return {};
}

}  // namespace annotrace
