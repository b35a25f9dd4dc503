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

// Workspace manifest: which databases exist, their releases in order and
// where the release files live.
//
//   {"databases": [
//     {"name": "swissprot", "format": "line-prefixed-flat",
//      "topics": ["FUNCTION"], "epoch": "1986-07-01",
//      "options": {"line_prefix": "CC"},
//      "releases": [
//        {"label": "40.0", "date": "2002-10-01", "path": "sp40.dat.gz"},
//        {"label": "41.0", "declared_date": "2003-02-01", "path": "sp41.dat"}]}]}
//
// "declared_date" marks a date that is an estimate.  Relative paths are
// resolved against the manifest's directory.

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "annotrace/extraction.hpp"
#include "annotrace/store.hpp"

namespace annotrace {

struct ManifestRelease {
  std::string label;
  Date date;
  bool date_estimated = false;
  std::filesystem::path path;
  FormatKind format = FormatKind::kGenericTsv;
};

struct ManifestDatabase {
  DatabaseId name;
  std::optional<Date> epoch;
  TopicFilter topics;
  FormatOptions options;
  std::vector<ManifestRelease> releases;

  DatabaseSpec spec() const;
};

struct Manifest {
  std::vector<ManifestDatabase> databases;

  /// Throws NotFound if the file is missing, InvalidInput if malformed.
  static Manifest load(const std::filesystem::path& path);
  static Manifest parse(std::string_view json_text, const std::filesystem::path& base_dir);
};

/// Extracts one release file and ingests it atomically.
IngestSummary ingest_release_file(Workspace& ws, const ManifestDatabase& db, const ManifestRelease& release);

/// Registers every database and ingests its releases in manifest order.
/// Releases already ingested are skipped when `skip_ingested` and are an
/// error otherwise.  Every release file still to be ingested must exist
/// before anything is written.
std::vector<IngestSummary> ingest_manifest(Workspace& ws, const Manifest& manifest, bool skip_ingested = true,
                                           const std::function<void(const IngestSummary&)>& progress = {});

}  // namespace annotrace
