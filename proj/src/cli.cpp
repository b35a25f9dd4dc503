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

#include "annotrace/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "annotrace/crossdb.hpp"
#include "annotrace/errors.hpp"
#include "annotrace/manifest.hpp"
#include "annotrace/metrics.hpp"
#include "annotrace/patterns.hpp"
#include "annotrace/report.hpp"
#include "annotrace/synth.hpp"

namespace annotrace {

namespace {

struct Globals {
  std::string workspace;
  std::string format = "tsv";
  bool quiet = false;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

std::filesystem::path workspace_path(const Globals& g) {
  if (!g.workspace.empty()) return g.workspace;
  if (const char* env = std::getenv("ANNOTRACE_WORKSPACE"); env && *env) return env;
  throw UsageError("no workspace given: pass --workspace or set ANNOTRACE_WORKSPACE");
}

void emit(const Globals& g, const Report& r, std::ostream& out) { out << (g.format == "json" ? r.to_json() : r.to_tsv()); }

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::vector<MergeGroup> parse_merges(const std::vector<std::string>& specs) {
  std::vector<MergeGroup> out;
  for (const auto& s : specs) out.push_back(parse_merge_group(s));
  return out;
}

ordered_json string_array(const std::vector<std::string>& v) {
  ordered_json a = ordered_json::array();
  for (const auto& s : v) a.push_back(s);
  return a;
}

std::string labels_of(const Workspace& ws, const DatabaseId& db, const std::vector<std::uint32_t>& ordinals) {
  std::vector<std::string> parts;
  for (auto o : ordinals) parts.push_back(ws.release(db, o).label);
  return join(parts, ",");
}

std::string interval_str(const DateInterval& i) { return i.lo.iso() + "/" + i.hi.iso(); }

// ---------------------------------------------------------------------------

int cmd_ingest(const Globals& g, const std::string& manifest_path, bool no_skip, std::ostream& out,
               std::ostream& err) {
  const Manifest manifest = Manifest::load(manifest_path);
  Workspace ws = Workspace::open_or_create(workspace_path(g));
  Report r = Report::make("ingest", ws.id());
  r.parameters["manifest"] = manifest_path;
  r.parameters["skip_ingested"] = !no_skip;
  Table t{"ingest",
          {"database", "release", "date", "date_estimated", "records", "occurrences", "duplicates_collapsed",
           "empty_dropped", "parse_damage", "replacement_chars"},
          {}};
  auto progress = [&](const IngestSummary& s) {
    t.add({s.release.database.str(), s.release.label, s.release.date.iso(), s.release.date_estimated, s.records,
           s.occurrences, s.duplicates_collapsed, s.empty_dropped, s.parse_damage, s.replacement_chars});
    if (!g.quiet) {
      err << "ingested " << s.release.database.str() << " " << s.release.label << ": " << s.occurrences
          << " occurrences\n";
    }
  };
  try {
    ingest_manifest(ws, manifest, !no_skip, progress);
  } catch (...) {
    if (!t.rows.empty()) {
      r.tables.push_back(std::move(t));
      emit(g, r, out);
    }
    throw;
  }
  r.tables.push_back(std::move(t));
  emit(g, r, out);
  return 0;
}

int cmd_stats(const Globals& g, const std::vector<std::string>& dbs, const std::string& release, std::ostream& out) {
  const Workspace ws = Workspace::open(workspace_path(g));
  std::vector<DatabaseId> ids;
  for (const auto& d : dbs) {
    ids.emplace_back(d);
    ws.database(ids.back());  // NotFound for unknown names
  }
  const auto rows = redundancy_profile(ws, ids, release == "all" ? ReleaseSelector::kAll : ReleaseSelector::kLatest);
  Report r = Report::make("stats", ws.id());
  r.parameters["database"] = string_array(dbs);
  r.parameters["release"] = release;
  Table t{"stats",
          {"database", "release", "date", "total", "unique", "singleton", "unique_pct", "singleton_pct",
           "lifetime_unique"},
          {}};
  for (const auto& row : rows) {
    const DatabaseId& db = row.release.database;
    ordered_json lifetime = nullptr;
    if (ws.database(db).ingested_count() > 0) lifetime = lifetime_unique(ws, db).total_unique;
    if (!row.ingested) {
      t.add({db.str(), row.release.label, row.release.date.iso(), nullptr, nullptr, nullptr, nullptr, nullptr,
             lifetime});
      continue;
    }
    t.add({db.str(), row.release.label, row.release.date.iso(), row.counts.total, row.counts.unique,
           row.counts.singleton, row.unique_pct.value(), row.singleton_pct.value(), lifetime});
  }
  r.tables.push_back(std::move(t));
  emit(g, r, out);
  return 0;
}

int cmd_patterns(const Globals& g, const std::vector<std::string>& scopes, const std::string& label,
                 const std::vector<std::string>& merge_specs, std::ostream& out) {
  const Workspace ws = Workspace::open(workspace_path(g));
  const auto merges = parse_merges(merge_specs);
  std::vector<MergeGroup> groups = resolve_groups(ws, merges);
  if (!scopes.empty()) {
    std::vector<MergeGroup> chosen;
    for (const auto& s : scopes) {
      const std::string name = DatabaseId(s).str();
      const auto it = std::find_if(groups.begin(), groups.end(), [&](const MergeGroup& m) { return m.name == name; });
      if (it == groups.end()) throw NotFound("unknown database or group '" + s + "'");
      chosen.push_back(*it);
    }
    groups = std::move(chosen);
  }
  std::vector<PatternLabel> labels;
  if (label == "all") {
    labels = {PatternLabel::kTransient, PatternLabel::kPossiblyTransient, PatternLabel::kMissingOrigin};
  } else {
    labels = {parse_pattern_label(label)};
  }

  Report r = Report::make("patterns", ws.id());
  r.parameters["database"] = string_array(scopes);
  r.parameters["label"] = label;
  r.parameters["merge"] = string_array(merge_specs);
  Table counts{"counts", {"scope", "label", "sentences", "instances", "record_absence"}, {}};
  Table summary{"scopes", {"scope", "databases", "sentences_scanned", "ambiguous_origin"}, {}};
  Table instances{"instances",
                  {"scope", "label", "database", "record", "secondaries", "witnesses", "witness_dates",
                   "record_absent_releases", "fingerprint", "sentence"},
                  {}};
  for (const auto& group : groups) {
    std::vector<PatternReport> members;
    for (const auto& id : group.members) members.push_back(detect_patterns(ws, id));
    const PatternReport rep = members.size() == 1 && group.name == members[0].scope
                                  ? members[0]
                                  : merge_reports(group.name, members);
    summary.add({rep.scope, join(rep.databases, ","), rep.sentences_scanned, rep.ambiguous_origin});
    for (const auto l : labels) {
      const PatternCounts& c = rep.counts(l);
      counts.add({rep.scope, std::string(to_string(l)), c.sentences, c.instances, c.record_absence});
    }
    for (const auto& inst : rep.instances) {
      if (std::find(labels.begin(), labels.end(), inst.label) == labels.end()) continue;
      std::vector<std::string> dates;
      for (auto o : inst.witnesses) dates.push_back(ws.release(inst.database, o).date.iso());
      instances.add({rep.scope, std::string(to_string(inst.label)), inst.database.str(), inst.record,
                     join(inst.secondaries, ","), labels_of(ws, inst.database, inst.witnesses), join(dates, ","),
                     inst.record_absent_releases, inst.sentence.hex(), ws.sentence_text(inst.sentence)});
    }
  }
  r.tables = {std::move(counts), std::move(summary), std::move(instances)};
  emit(g, r, out);
  return 0;
}

int cmd_crossdb(const Globals& g, const std::vector<std::string>& merge_specs, const std::string& mode,
                const std::string& origin, const std::vector<std::string>& destinations, std::ostream& out) {
  const Workspace ws = Workspace::open(workspace_path(g));
  const auto merges = parse_merges(merge_specs);
  Report r = Report::make("crossdb", ws.id());
  r.parameters["merge"] = string_array(merge_specs);
  r.parameters["mode"] = mode;
  if (mode == "partition") {
    const auto groups = resolve_groups(ws, merges);
    std::vector<std::string> columns;
    for (const auto& gr : groups) columns.push_back(gr.name);
    columns.push_back("combination");
    columns.push_back("count");
    Table t{"partition", columns, {}};
    for (const auto& row : combination_partition(ws, merges)) {
      std::vector<ordered_json> cells;
      for (const auto& gr : groups) {
        cells.push_back(std::find(row.combination.begin(), row.combination.end(), gr.name) != row.combination.end()
                            ? 1
                            : 0);
      }
      cells.push_back(row.name());
      cells.push_back(row.count);
      t.add(std::move(cells));
    }
    r.tables.push_back(std::move(t));
  } else {
    r.parameters["origin"] = origin;
    r.parameters["destination"] = string_array(destinations);
    Table t{"cross_instances",
            {"fingerprint", "origin", "origin_first", "origin_removed", "destinations", "destination_first",
             "confidence", "sentence"},
            {}};
    for (const auto& c : detect_cross_missing_origin(ws, merges, origin, destinations)) {
      std::vector<std::string> firsts;
      for (const auto& i : c.destination_first) firsts.push_back(interval_str(i));
      t.add({c.sentence.hex(), c.origin, interval_str(c.origin_first), interval_str(c.origin_removed),
             join(c.destinations, ","), join(firsts, ","), std::string(to_string(c.confidence)),
             ws.sentence_text(c.sentence)});
    }
    r.tables.push_back(std::move(t));
  }
  emit(g, r, out);
  return 0;
}

int cmd_timeline(const Globals& g, const std::string& query, bool by_fingerprint, bool chart,
                 const std::vector<std::string>& merge_specs, std::ostream& out) {
  const Workspace ws = Workspace::open(workspace_path(g));
  const SentenceTimeline tl = by_fingerprint ? ws.timeline(Fingerprint::from_hex(query)) : ws.timeline_for_text(query);
  Report r = Report::make("timeline", ws.id());
  r.parameters["sentence"] = query;
  r.parameters["fingerprint"] = by_fingerprint;
  r.parameters["chart"] = chart;
  r.parameters["merge"] = string_array(merge_specs);

  // One step series per record: the presence value at every ingested
  // release where it changes, starting with the first ingested release.
  Table steps{"steps", {"database", "record", "date", "release", "present"}, {}};
  ordered_json series = ordered_json::array();
  for (const auto& [dbname, records] : tl.databases) {
    const DatabaseId db(dbname);
    const DatabaseInfo& info = ws.database(db);
    for (const auto& [acc, ordinals] : records) {
      ordered_json points = ordered_json::array();
      int previous = -1;
      for (const auto& rel : info.releases) {
        if (!rel.ingested) continue;
        const int present = std::binary_search(ordinals.begin(), ordinals.end(), rel.version.ordinal) ? 1 : 0;
        if (present == previous) continue;
        previous = present;
        points.push_back({{"date", rel.version.date.iso()}, {"release", rel.version.label}, {"present", present}});
        steps.add({dbname, acc, rel.version.date.iso(), rel.version.label, present});
      }
      series.push_back({{"database", dbname}, {"record", acc}, {"steps", std::move(points)}});
    }
  }
  if (chart) {
    r.tables.push_back(std::move(steps));
    r.payload = ordered_json{{"sentence", tl.sentence.hex()},
                             {"text", ws.sentence_text(tl.sentence)},
                             {"series", std::move(series)}};
    emit(g, r, out);
    return 0;
  }

  Table presence{"presence", {"database", "record", "releases", "dates"}, {}};
  for (const auto& [dbname, records] : tl.databases) {
    const DatabaseId db(dbname);
    for (const auto& [acc, ordinals] : records) {
      std::vector<std::string> dates;
      for (auto o : ordinals) dates.push_back(ws.release(db, o).date.iso());
      presence.add({dbname, acc, labels_of(ws, db, ordinals), join(dates, ",")});
    }
  }
  const CrossTimeline ct = cross_timeline(ws, tl.sentence, parse_merges(merge_specs));
  Table groups{"groups", {"group", "first_seen", "last_seen", "in_latest", "removed"}, {}};
  for (const auto& p : ct.groups) {
    groups.add({p.group, interval_str(p.first_seen), p.last_seen.iso(), p.in_latest,
                p.removed ? ordered_json(interval_str(*p.removed)) : ordered_json(nullptr)});
  }
  Table events{"events", {"group", "database", "record", "event", "release", "date", "interval"}, {}};
  for (const auto& e : ct.events) {
    events.add({e.group, e.database.str(), e.record, std::string(to_string(e.kind)), e.release.label,
                e.release.date.iso(), interval_str(e.interval)});
  }
  Table head{"sentence", {"fingerprint", "sentence"}, {}};
  head.add({tl.sentence.hex(), ws.sentence_text(tl.sentence)});
  r.tables = {std::move(head), std::move(presence), std::move(groups), std::move(events)};
  emit(g, r, out);
  return 0;
}

int cmd_integrity(const Globals& g, std::ostream& out, std::ostream& err) {
  const Workspace ws = Workspace::open(workspace_path(g));
  const IntegrityReport rep = ws.check_integrity();
  Report r = Report::make("integrity", ws.id());
  Table summary{"integrity", {"ok", "releases_checked", "rows_checked", "sentences_checked", "problems"}, {}};
  summary.add({rep.ok(), rep.releases_checked, rep.rows_checked, rep.sentences_checked, rep.problems.size()});
  Table problems{"problems", {"problem"}, {}};
  for (const auto& p : rep.problems) problems.add({p});
  r.tables = {std::move(summary), std::move(problems)};
  emit(g, r, out);
  if (!rep.ok()) {
    err << "error: workspace integrity check found " << rep.problems.size() << " problem(s)\n";
    return 1;
  }
  return 0;
}

int cmd_synth(const Globals& g, const std::string& spec_path, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
  std::ifstream in(spec_path, std::ios::binary);
  if (!in) throw NotFound("cannot read generator spec " + spec_path);
  std::stringstream ss;
  ss << in.rdbuf();
  const GeneratorSpec spec = GeneratorSpec::from_json(ss.str());
  const SynthCorpus corpus = synthesize(spec);
  const GeneratedFiles files = write_corpus(corpus, out_dir);
  if (!g.quiet) err << "wrote " << files.occurrences << " occurrences to " << out_dir << "\n";
  Report r = Report::make("synth", "");
  r.parameters["spec"] = spec_path;
  r.parameters["out"] = out_dir;
  r.parameters["seed"] = spec.seed;
  Table t{"synth", {"manifest", "truth", "occurrences", "planted_patterns", "planted_cross"}, {}};
  t.add({files.manifest.string(), files.truth.string(), files.occurrences, corpus.truth.patterns.size(),
         corpus.truth.cross.size()});
  Table rel{"releases", {"database", "release", "date", "occurrences"}, {}};
  for (std::size_t d = 0; d < corpus.content.size(); ++d) {
    for (std::size_t v = 0; v < corpus.content[d].size(); ++v) {
      rel.add({DatabaseId(spec.databases[d].name).str(), corpus.release_label(v), spec.databases[d].dates[v].iso(),
               corpus.content[d][v].size()});
    }
  }
  r.tables = {std::move(t), std::move(rel)};
  emit(g, r, out);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sentence reuse and propagation analysis over versioned annotation databases", "annotrace"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--workspace,-w", g.workspace, "workspace directory (default: $ANNOTRACE_WORKSPACE)");
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"tsv", "json"}));
  app.add_flag("--quiet,-q", g.quiet, "suppress progress messages");

  std::function<int()> action;

  auto* ingest = app.add_subcommand("ingest", "ingest every release listed in a manifest");
  std::string manifest;
  bool no_skip = false;
  ingest->add_option("manifest", manifest, "manifest JSON file")->required();
  ingest->add_flag("--no-skip", no_skip, "fail on releases that are already ingested");
  ingest->callback([&] { action = [&] { return cmd_ingest(g, manifest, no_skip, out, err); }; });

  auto* stats = app.add_subcommand("stats", "total, unique and singleton sentence counts per release");
  std::vector<std::string> stats_dbs;
  std::string release = "latest";
  stats->add_option("--database,-d", stats_dbs, "database (repeatable; default all)");
  stats->add_option("--release", release, "releases to report")->check(CLI::IsMember({"latest", "all"}));
  stats->callback([&] { action = [&] { return cmd_stats(g, stats_dbs, release, out); }; });

  auto* patterns = app.add_subcommand("patterns", "transient and missing-origin propagation patterns");
  std::vector<std::string> pattern_scopes;
  std::string label = "all";
  std::vector<std::string> pattern_merges;
  patterns->add_option("--database,-d", pattern_scopes, "database or merge group (repeatable; default all)");
  patterns->add_option("--label", label, "pattern label")
      ->check(CLI::IsMember({"all", "transient", "possibly-transient", "missing-origin"}));
  patterns->add_option("--merge", pattern_merges, "merge group name=db1,db2 (repeatable)");
  patterns->callback([&] { action = [&] { return cmd_patterns(g, pattern_scopes, label, pattern_merges, out); }; });

  auto* crossdb = app.add_subcommand("crossdb", "sentence sharing and propagation across databases");
  std::vector<std::string> cross_merges;
  std::string mode = "partition";
  std::string origin;
  std::vector<std::string> destinations;
  crossdb->add_option("--merge", cross_merges, "merge group name=db1,db2 (repeatable)");
  crossdb->add_option("--mode", mode, "report")->check(CLI::IsMember({"partition", "patterns"}));
  crossdb->add_option("--origin", origin, "restrict cross instances to this origin group");
  crossdb->add_option("--destination", destinations, "restrict destinations (repeatable)");
  crossdb->callback(
      [&] { action = [&] { return cmd_crossdb(g, cross_merges, mode, origin, destinations, out); }; });

  auto* timeline = app.add_subcommand("timeline", "presence history of one sentence");
  std::string query;
  bool by_fp = false;
  bool chart = false;
  std::vector<std::string> timeline_merges;
  timeline->add_option("sentence", query, "sentence text (normalized before lookup) or fingerprint")->required();
  timeline->add_flag("--fingerprint", by_fp, "treat the argument as a hex fingerprint");
  timeline->add_flag("--chart", chart, "emit step series per record for plotting");
  timeline->add_option("--merge", timeline_merges, "merge group name=db1,db2 (repeatable)");
  timeline->callback([&] { action = [&] { return cmd_timeline(g, query, by_fp, chart, timeline_merges, out); }; });

  auto* integrity = app.add_subcommand("integrity", "verify the workspace against its indexes");
  integrity->callback([&] { action = [&] { return cmd_integrity(g, out, err); }; });

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted patterns");
  std::string spec_path;
  std::string out_dir;
  synth->add_option("spec", spec_path, "generator spec JSON")->required();
  synth->add_option("--out,-o", out_dir, "output directory")->required();
  synth->callback([&] { action = [&] { return cmd_synth(g, spec_path, out_dir, out, err); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace annotrace
