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

#include "annotrace/manifest.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "annotrace/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace annotrace {

namespace {

FormatOptions parse_options(const json& j) {
  FormatOptions o;
  if (j.is_null()) return o;
  if (!j.is_object()) throw InvalidInput("\"options\" must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "line_prefix") {
      o.line_prefix = value.get<std::string>();
    } else if (key == "record_element") {
      o.record_element = value.get<std::string>();
    } else if (key == "id_attribute") {
      o.id_attribute = value.get<std::string>();
    } else if (key == "annotation_elements") {
      o.annotation_elements = value.get<std::vector<std::string>>();
    } else {
      throw InvalidInput("unknown format option \"" + key + "\"");
    }
  }
  return o;
}

}  // namespace

DatabaseSpec ManifestDatabase::spec() const {
  DatabaseSpec s;
  s.name = name;
  s.epoch = epoch;
  for (const auto& r : releases) s.releases.push_back({r.label, r.date, r.date_estimated});
  return s;
}

Manifest Manifest::parse(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("manifest is not valid JSON: ") + e.what());
  }
  Manifest m;
  std::set<DatabaseId> seen;
  try {
    if (!j.is_object()) throw InvalidInput("manifest must be a JSON object");
    if (!j.contains("databases")) return m;
    for (const json& jd : j.at("databases")) {
      ManifestDatabase d;
      d.name = DatabaseId(jd.at("name").get<std::string>());
      if (!seen.insert(d.name).second) throw InvalidInput("manifest lists database '" + d.name.str() + "' twice");
      if (jd.contains("epoch")) d.epoch = Date::parse(jd.at("epoch").get<std::string>());
      const bool has_db_format = jd.contains("format");
      const FormatKind db_format =
          has_db_format ? parse_format_kind(jd.at("format").get<std::string>()) : FormatKind::kGenericTsv;
      if (jd.contains("topics")) d.topics = TopicFilter(jd.at("topics").get<std::vector<std::string>>());
      d.options = parse_options(jd.value("options", json()));
      for (const json& jr : jd.at("releases")) {
        ManifestRelease r;
        r.label = jr.at("label").get<std::string>();
        if (jr.contains("date")) {
          r.date = Date::parse(jr.at("date").get<std::string>());
        } else if (jr.contains("declared_date")) {
          r.date = Date::parse(jr.at("declared_date").get<std::string>());
          r.date_estimated = true;
        } else {
          throw InvalidInput("release '" + r.label + "' of '" + d.name.str() + "' has no date");
        }
        r.path = jr.at("path").get<std::string>();
        if (r.path.is_relative()) r.path = base_dir / r.path;
        if (jr.contains("format")) {
          r.format = parse_format_kind(jr.at("format").get<std::string>());
        } else if (has_db_format) {
          r.format = db_format;
        } else {
          throw InvalidInput("release '" + r.label + "' of '" + d.name.str() + "' has no format");
        }
        d.releases.push_back(std::move(r));
      }
      m.databases.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

Manifest Manifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot read manifest '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

IngestSummary ingest_release_file(Workspace& ws, const ManifestDatabase& db, const ManifestRelease& release) {
  Workspace::Ingest session = ws.begin_ingest(db.name, release.label);
  InputFile input(release.path);
  const ExtractSummary ex =
      extract_release(input, release.format, session.release(), db.options, db.topics,
                      [&](const RecordId& record, const NormalizedSentence& s) { session.add(record.accession, s); });
  UpstreamCounts up;
  up.empty_dropped = ex.empty_dropped;
  up.duplicates_in_record = ex.duplicates_in_record;
  up.parse_damage = ex.parse.damaged_records;
  up.replacement_chars = ex.parse.replacement_chars;
  session.add_upstream(up);
  return session.commit();
}

std::vector<IngestSummary> ingest_manifest(Workspace& ws, const Manifest& manifest, bool skip_ingested,
                                           const std::function<void(const IngestSummary&)>& progress) {
  for (const auto& db : manifest.databases) ws.register_database(db.spec());

  std::vector<std::pair<const ManifestDatabase*, const ManifestRelease*>> todo;
  for (const auto& db : manifest.databases) {
    for (const auto& r : db.releases) {
      if (ws.is_ingested(db.name, ws.release(db.name, r.label).ordinal)) {
        if (skip_ingested) continue;
        throw StateError("release '" + r.label + "' of '" + db.name.str() + "' is already ingested");
      }
      if (!fs::is_regular_file(r.path)) throw NotFound("release file '" + r.path.string() + "' does not exist");
      todo.emplace_back(&db, &r);
    }
  }
  std::vector<IngestSummary> out;
  for (const auto& [db, r] : todo) {
    out.push_back(ingest_release_file(ws, *db, *r));
    if (progress) progress(out.back());
  }
  return out;
}

}  // namespace annotrace
