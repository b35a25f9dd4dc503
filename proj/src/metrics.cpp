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

#include "annotrace/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "annotrace/errors.hpp"

namespace annotrace {

namespace {

void check_counts(const ReleaseCounts& c) {
  if (!(c.singleton <= c.unique && c.unique <= c.total) || ((c.unique == 0) != (c.total == 0))) {
    throw IntegrityError("inconsistent counts for release '" + c.release.label + "' of '" +
                         c.release.database.str() + "'");
  }
}

// Streams fingerprints in ascending order, closing a group on change.
struct GroupCounter {
  ReleaseCounts counts;
  Fingerprint current;
  std::uint64_t run = 0;

  void add(const Fingerprint& fp) {
    if (run != 0 && fp == current) {
      ++run;
    } else {
      close();
      current = fp;
      run = 1;
    }
    ++counts.total;
  }
  void close() {
    if (run == 0) return;
    ++counts.unique;
    if (run == 1) ++counts.singleton;
    run = 0;
  }
};

}  // namespace

std::string Percentage::str() const {
  char buf[32];
  const std::int64_t whole = hundredths / 100;
  const std::int64_t frac = hundredths % 100;
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(whole), static_cast<long long>(frac));
  return buf;
}

Percentage percent(std::uint64_t part, std::uint64_t total) {
  if (total == 0) return {};
  if (part > total) throw InvalidInput("percentage part exceeds total");
  if (total > std::numeric_limits<std::uint64_t>::max() / 20000) throw InvalidInput("count too large for percentage");
  const std::uint64_t num = part * 10000;
  std::uint64_t q = num / total;
  const std::uint64_t twice = (num % total) * 2;
  if (twice > total || (twice == total && (q & 1) != 0)) ++q;
  return Percentage{static_cast<std::int64_t>(q)};
}

ReleaseCounts count_sorted(std::span<const Fingerprint> sorted) {
  GroupCounter g;
  for (const auto& fp : sorted) g.add(fp);
  g.close();
  return g.counts;
}

ReleaseCounts release_counts(const Workspace& ws, const DatabaseId& db, std::uint32_t ordinal) {
  GroupCounter g;
  ws.for_each_release_fingerprint(db, ordinal, [&](const Fingerprint& fp) { g.add(fp); });
  g.close();
  g.counts.release = ws.release(db, ordinal);
  check_counts(g.counts);
  return g.counts;
}

LifetimeCounts lifetime_unique(const Workspace& ws, const DatabaseId& db) {
  LifetimeCounts out;
  out.database = db;
  out.releases = ws.database(db).ingested_count();
  if (out.releases == 0) throw NotFound("database '" + db.str() + "' has no ingested release");
  ws.scan_sentences({db}, [&](const Fingerprint&, std::span<const PresenceHit>) { ++out.total_unique; });
  return out;
}

std::vector<ProfileRow> redundancy_profile(const Workspace& ws, const std::vector<DatabaseId>& dbs,
                                           ReleaseSelector selector) {
  std::vector<DatabaseId> selected = dbs.empty() ? ws.databases() : dbs;
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

  std::vector<ProfileRow> rows;
  for (const auto& id : selected) {
    const DatabaseInfo& info = ws.database(id);
    std::vector<std::uint32_t> ordinals;
    if (selector == ReleaseSelector::kLatest) {
      ordinals.push_back(info.latest_ordinal());
    } else {
      for (const auto& r : info.releases) ordinals.push_back(r.version.ordinal);
    }
    for (const std::uint32_t o : ordinals) {
      ProfileRow row;
      row.release = info.releases[o].version;
      row.ingested = info.releases[o].ingested;
      row.counts.release = row.release;
      if (row.ingested) row.counts = release_counts(ws, id, o);
      row.empty = row.counts.total == 0;
      row.unique_pct = percent(row.counts.unique, row.counts.total);
      row.singleton_pct = percent(row.counts.singleton, row.counts.total);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace annotrace
