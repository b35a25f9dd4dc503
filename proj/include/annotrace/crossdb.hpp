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

// Sharing and propagation across databases.
//
// Databases are analysed in groups; a database not named in any merge
// group forms a group of its own under its own name.  Release dates are
// upper bounds: a sentence seen in a release entered somewhere between the
// previous release of that database (its epoch for the first release) and
// the release itself.  Cross-database ordering compares those intervals and
// reports overlap instead of guessing.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "annotrace/store.hpp"

namespace annotrace {

struct MergeGroup {
  std::string name;
  std::vector<DatabaseId> members;
};

/// Parses "name=db1,db2".
MergeGroup parse_merge_group(std::string_view spec);

/// Adds a singleton group for every database not covered by `merges` and
/// returns all groups sorted by name.  InvalidInput on unknown or repeated
/// members and on duplicate group names.
std::vector<MergeGroup> resolve_groups(const Workspace& ws, const std::vector<MergeGroup>& merges);

struct CombinationRow {
  std::vector<std::string> combination;  // sorted group names
  std::uint64_t count = 0;

  std::string name() const;  // names joined by "; "
};

/// Partition of every distinct fingerprint by the exact set of groups it
/// ever appears in.  Sorted by count descending, then combination name.
std::vector<CombinationRow> combination_partition(const Workspace& ws, const std::vector<MergeGroup>& merges);

enum class EventKind { kAppear, kDisappear };

std::string_view to_string(EventKind kind);

struct TimelineEvent {
  std::string group;
  DatabaseId database;
  std::string record;
  EventKind kind = EventKind::kAppear;
  ReleaseVersion release;  // the release at which the change is observed
  DateInterval interval;   // [previous release date or epoch, release date]
};

struct GroupPresence {
  std::string group;
  DateInterval first_seen;
  Date last_seen;
  bool in_latest = false;  // present in some member's latest release
  std::optional<DateInterval> removed;  // set when absent from every member's latest release
};

struct CrossTimeline {
  Fingerprint sentence;
  std::vector<GroupPresence> groups;   // only groups where the sentence occurs, by first_seen.hi then name
  std::vector<TimelineEvent> events;   // by release date, then group, database, record, kind
};

/// NotFound for an unknown fingerprint.
CrossTimeline cross_timeline(const Workspace& ws, const Fingerprint& fp, const std::vector<MergeGroup>& merges);

enum class Confidence { kDateOrdered, kOverlapping };

std::string_view to_string(Confidence c);

struct CrossInstance {
  Fingerprint sentence;
  std::string origin;
  std::vector<std::string> destinations;            // sorted
  DateInterval origin_first;
  std::vector<DateInterval> destination_first;      // parallel to destinations
  DateInterval origin_removed;                      // [last seen, first release without it]
  Confidence confidence = Confidence::kDateOrdered;

  bool operator==(const CrossInstance&) const = default;
};

/// Candidates where the origin group holds the sentence strictly first (by
/// release date), every listed destination first holds it strictly later
/// and still holds it in its latest release, and the origin group no longer
/// holds it in any member's latest release.  Confidence is date-ordered
/// when the origin's first-seen interval ends before each destination's
/// begins.
///
/// `origin` empty means every group may act as origin; `destinations`
/// empty means every other group.  StateError unless all members of the
/// groups involved are fully ingested.
std::vector<CrossInstance> detect_cross_missing_origin(const Workspace& ws, const std::vector<MergeGroup>& merges,
                                                       const std::string& origin = {},
                                                       const std::vector<std::string>& destinations = {});

/// Re-checks an instance against the store; empty string when it holds.
std::string replay_cross_instance(const Workspace& ws, const std::vector<MergeGroup>& merges,
                                  const CrossInstance& instance);

}  // namespace annotrace
