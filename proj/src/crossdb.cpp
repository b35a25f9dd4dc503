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

#include "annotrace/crossdb.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "annotrace/errors.hpp"

namespace annotrace {

namespace {

// Ingested releases of one database in ordinal order.
struct Calendar {
  Date epoch;
  std::vector<std::uint32_t> ordinals;
  std::vector<Date> dates;
  std::uint32_t latest = 0;  // latest registered ordinal

  explicit Calendar(const DatabaseInfo& info) : epoch(info.epoch), latest(info.latest_ordinal()) {
    for (const auto& r : info.releases) {
      if (!r.ingested) continue;
      ordinals.push_back(r.version.ordinal);
      dates.push_back(r.version.date);
    }
  }

  std::size_t index_of(std::uint32_t ordinal) const {
    return static_cast<std::size_t>(std::lower_bound(ordinals.begin(), ordinals.end(), ordinal) - ordinals.begin());
  }
  DateInterval interval(std::size_t idx) const { return {idx == 0 ? epoch : dates[idx - 1], dates[idx]}; }
};

struct Resolved {
  std::vector<MergeGroup> groups;
  std::vector<std::size_t> group_of;  // by workspace database index
  std::vector<Calendar> calendars;    // by workspace database index
};

Resolved resolve(const Workspace& ws, const std::vector<MergeGroup>& merges) {
  Resolved r;
  r.groups = resolve_groups(ws, merges);
  r.group_of.assign(ws.databases().size(), 0);
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    for (const auto& m : r.groups[g].members) r.group_of[ws.database_index(m)] = g;
  }
  for (const auto& id : ws.databases()) r.calendars.emplace_back(ws.database(id));
  return r;
}

// Per-group summary of one sentence, from per-database presence ordinals.
struct GroupStats {
  bool present = false;
  DateInterval first{};
  Date last_seen{};
  bool in_latest = false;
  DateInterval removed{};
};

std::vector<GroupStats> group_stats(const Resolved& r, const std::vector<std::vector<std::uint32_t>>& by_db) {
  std::vector<GroupStats> out(r.groups.size());
  for (std::size_t db = 0; db < by_db.size(); ++db) {
    const auto& ords = by_db[db];
    if (ords.empty()) continue;
    const Calendar& cal = r.calendars[db];
    GroupStats& g = out[r.group_of[db]];
    const std::size_t first = cal.index_of(ords.front());
    const std::size_t last = cal.index_of(ords.back());
    const DateInterval fi = cal.interval(first);
    const bool latest = ords.back() == cal.ordinals.back();
    if (!g.present) {
      g.present = true;
      g.first = fi;
      g.last_seen = cal.dates[last];
      g.in_latest = latest;
      if (!latest) g.removed = {cal.dates[last], cal.dates[last + 1]};
      continue;
    }
    g.first.lo = std::min(g.first.lo, fi.lo);
    g.first.hi = std::min(g.first.hi, fi.hi);
    g.last_seen = std::max(g.last_seen, cal.dates[last]);
    g.in_latest = g.in_latest || latest;
    if (!latest) {
      g.removed.lo = std::max(g.removed.lo, cal.dates[last]);
      g.removed.hi = std::max(g.removed.hi, cal.dates[last + 1]);
    }
  }
  for (auto& g : out) {
    if (g.present && g.in_latest) g.removed = {};
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> presence_by_db(std::size_t dbs, std::span<const PresenceHit> hits) {
  std::vector<std::vector<std::uint32_t>> by_db(dbs);
  for (const auto& h : hits) by_db[h.database].push_back(h.ordinal);
  for (auto& v : by_db) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return by_db;
}

std::optional<CrossInstance> evaluate(const Resolved& r, const Fingerprint& fp, const std::vector<GroupStats>& stats,
                                      const std::vector<bool>& origin_ok, const std::vector<bool>& dest_ok) {
  // The unique strictly earliest group by first-seen release date.
  std::size_t earliest = stats.size();
  bool tie = false;
  for (std::size_t g = 0; g < stats.size(); ++g) {
    if (!stats[g].present) continue;
    if (earliest == stats.size() || stats[g].first.hi < stats[earliest].first.hi) {
      earliest = g;
      tie = false;
    } else if (stats[g].first.hi == stats[earliest].first.hi) {
      tie = true;
    }
  }
  if (earliest == stats.size() || tie || !origin_ok[earliest]) return std::nullopt;
  const GroupStats& o = stats[earliest];
  if (o.in_latest) return std::nullopt;

  CrossInstance inst;
  inst.sentence = fp;
  inst.origin = r.groups[earliest].name;
  inst.origin_first = o.first;
  inst.origin_removed = o.removed;
  bool ordered = true;
  for (std::size_t g = 0; g < stats.size(); ++g) {
    if (g == earliest || !dest_ok[g] || !stats[g].present || !stats[g].in_latest) continue;
    inst.destinations.push_back(r.groups[g].name);
    inst.destination_first.push_back(stats[g].first);
    ordered = ordered && o.first.strictly_before(stats[g].first);
  }
  if (inst.destinations.empty()) return std::nullopt;
  inst.confidence = ordered ? Confidence::kDateOrdered : Confidence::kOverlapping;
  return inst;
}

std::size_t group_index(const Resolved& r, const std::string& name) {
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    if (r.groups[g].name == name) return g;
  }
  throw NotFound("unknown group '" + name + "'");
}

}  // namespace

MergeGroup parse_merge_group(std::string_view spec) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == spec.size()) {
    throw InvalidInput("merge group '" + std::string(spec) + "' must look like name=db1,db2");
  }
  MergeGroup g;
  g.name = std::string(spec.substr(0, eq));
  std::string_view rest = spec.substr(eq + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    if (item.empty()) throw InvalidInput("merge group '" + std::string(spec) + "' has an empty member");
    g.members.emplace_back(item);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return g;
}

std::vector<MergeGroup> resolve_groups(const Workspace& ws, const std::vector<MergeGroup>& merges) {
  std::vector<MergeGroup> out;
  std::set<DatabaseId> covered;
  std::set<std::string> names;
  for (const auto& m : merges) {
    if (m.name.empty()) throw InvalidInput("merge group name must not be empty");
    if (m.members.empty()) throw InvalidInput("merge group '" + m.name + "' has no members");
    if (!names.insert(m.name).second) throw InvalidInput("merge group '" + m.name + "' is defined twice");
    MergeGroup g{m.name, {}};
    for (const auto& id : m.members) {
      ws.database_index(id);  // throws NotFound
      if (!covered.insert(id).second) {
        throw InvalidInput("database '" + id.str() + "' belongs to more than one merge group");
      }
      g.members.push_back(id);
    }
    std::sort(g.members.begin(), g.members.end());
    out.push_back(std::move(g));
  }
  for (const auto& id : ws.databases()) {
    if (covered.count(id)) continue;
    if (!names.insert(id.str()).second) {
      throw InvalidInput("merge group name '" + id.str() + "' clashes with an ungrouped database");
    }
    out.push_back(MergeGroup{id.str(), {id}});
  }
  std::sort(out.begin(), out.end(), [](const MergeGroup& a, const MergeGroup& b) { return a.name < b.name; });
  return out;
}

std::string CombinationRow::name() const {
  std::string out;
  for (const auto& c : combination) {
    if (!out.empty()) out += "; ";
    out += c;
  }
  return out;
}

std::vector<CombinationRow> combination_partition(const Workspace& ws, const std::vector<MergeGroup>& merges) {
  const Resolved r = resolve(ws, merges);
  bool any = false;
  for (const auto& id : ws.databases()) any = any || ws.database(id).ingested_count() > 0;
  if (!any) throw NotFound("workspace has no ingested release");

  std::map<std::vector<std::size_t>, std::uint64_t> counts;
  std::vector<std::size_t> key;
  ws.scan_sentences({}, [&](const Fingerprint&, std::span<const PresenceHit> hits) {
    key.clear();
    for (const auto& h : hits) key.push_back(r.group_of[h.database]);
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());
    ++counts[key];
  });
  std::vector<CombinationRow> rows;
  for (const auto& [k, n] : counts) {
    CombinationRow row;
    for (const std::size_t g : k) row.combination.push_back(r.groups[g].name);
    row.count = n;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const CombinationRow& a, const CombinationRow& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.name() < b.name();
  });
  return rows;
}

std::string_view to_string(EventKind kind) { return kind == EventKind::kAppear ? "appear" : "disappear"; }

std::string_view to_string(Confidence c) { return c == Confidence::kDateOrdered ? "date-ordered" : "overlapping"; }

CrossTimeline cross_timeline(const Workspace& ws, const Fingerprint& fp, const std::vector<MergeGroup>& merges) {
  const SentenceTimeline t = ws.timeline(fp);  // NotFound for unknown sentences
  const Resolved r = resolve(ws, merges);
  CrossTimeline out;
  out.sentence = fp;

  std::vector<std::vector<std::uint32_t>> by_db(ws.databases().size());
  for (const auto& [db_name, records] : t.databases) {
    const DatabaseId id(db_name);
    const std::uint32_t db = ws.database_index(id);
    const Calendar& cal = r.calendars[db];
    const std::string& group = r.groups[r.group_of[db]].name;
    for (const auto& [acc, ords] : records) {
      by_db[db].insert(by_db[db].end(), ords.begin(), ords.end());
      bool before = false;
      for (std::size_t i = 0; i < cal.ordinals.size(); ++i) {
        const bool now = std::binary_search(ords.begin(), ords.end(), cal.ordinals[i]);
        if (now != before) {
          out.events.push_back(TimelineEvent{group, id, acc, now ? EventKind::kAppear : EventKind::kDisappear,
                                             ws.release(id, cal.ordinals[i]), cal.interval(i)});
        }
        before = now;
      }
    }
  }
  for (auto& v : by_db) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  const auto stats = group_stats(r, by_db);
  for (std::size_t g = 0; g < stats.size(); ++g) {
    if (!stats[g].present) continue;
    GroupPresence p;
    p.group = r.groups[g].name;
    p.first_seen = stats[g].first;
    p.last_seen = stats[g].last_seen;
    p.in_latest = stats[g].in_latest;
    if (!stats[g].in_latest) p.removed = stats[g].removed;
    out.groups.push_back(std::move(p));
  }
  std::sort(out.groups.begin(), out.groups.end(), [](const GroupPresence& a, const GroupPresence& b) {
    if (a.first_seen.hi != b.first_seen.hi) return a.first_seen.hi < b.first_seen.hi;
    return a.group < b.group;
  });
  std::sort(out.events.begin(), out.events.end(), [](const TimelineEvent& a, const TimelineEvent& b) {
    if (a.release.date != b.release.date) return a.release.date < b.release.date;
    if (a.group != b.group) return a.group < b.group;
    if (a.database != b.database) return a.database < b.database;
    if (a.record != b.record) return a.record < b.record;
    return a.kind < b.kind;
  });
  return out;
}

std::vector<CrossInstance> detect_cross_missing_origin(const Workspace& ws, const std::vector<MergeGroup>& merges,
                                                       const std::string& origin,
                                                       const std::vector<std::string>& destinations) {
  const Resolved r = resolve(ws, merges);
  for (const auto& id : ws.databases()) {
    const DatabaseInfo& info = ws.database(id);
    if (!info.fully_ingested()) {
      throw StateError("database '" + id.str() + "' has releases that are not ingested");
    }
  }
  std::vector<bool> origin_ok(r.groups.size(), origin.empty());
  if (!origin.empty()) origin_ok[group_index(r, origin)] = true;
  std::vector<bool> dest_ok(r.groups.size(), destinations.empty());
  for (const auto& d : destinations) dest_ok[group_index(r, d)] = true;

  std::vector<CrossInstance> out;
  ws.scan_sentences({}, [&](const Fingerprint& fp, std::span<const PresenceHit> hits) {
    const auto stats = group_stats(r, presence_by_db(ws.databases().size(), hits));
    if (auto inst = evaluate(r, fp, stats, origin_ok, dest_ok)) out.push_back(std::move(*inst));
  });
  return out;  // scan order is ascending fingerprint
}

std::string replay_cross_instance(const Workspace& ws, const std::vector<MergeGroup>& merges,
                                  const CrossInstance& inst) {
  if (!ws.contains(inst.sentence)) return "sentence is not in the store";
  const CrossTimeline t = cross_timeline(ws, inst.sentence, merges);
  auto find = [&](const std::string& g) -> const GroupPresence* {
    for (const auto& p : t.groups) {
      if (p.group == g) return &p;
    }
    return nullptr;
  };
  const GroupPresence* o = find(inst.origin);
  if (!o) return "origin group never holds the sentence";
  for (const auto& p : t.groups) {
    if (p.group != inst.origin && !(o->first_seen.hi < p.first_seen.hi)) {
      return "group " + p.group + " holds the sentence no later than the origin";
    }
  }
  if (o->in_latest) return "origin still holds the sentence in its latest release";
  if (!(o->first_seen == inst.origin_first)) return "origin first-seen interval differs";
  if (!o->removed || !(*o->removed == inst.origin_removed)) return "origin removal interval differs";
  if (inst.destinations.empty() || inst.destinations.size() != inst.destination_first.size()) {
    return "malformed destination list";
  }
  bool ordered = true;
  for (std::size_t i = 0; i < inst.destinations.size(); ++i) {
    const GroupPresence* d = find(inst.destinations[i]);
    if (!d) return "destination " + inst.destinations[i] + " never holds the sentence";
    if (!d->in_latest) return "destination " + inst.destinations[i] + " lacks the sentence in its latest release";
    if (!(d->first_seen == inst.destination_first[i])) return "destination first-seen interval differs";
    ordered = ordered && o->first_seen.strictly_before(d->first_seen);
  }
  const Confidence expected = ordered ? Confidence::kDateOrdered : Confidence::kOverlapping;
  if (expected != inst.confidence) return "confidence flag does not match the intervals";
  return {};
}

}  // namespace annotrace
