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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "annotrace/cli.hpp"
#include "annotrace/crossdb.hpp"
#include "annotrace/errors.hpp"
#include "annotrace/manifest.hpp"
#include "annotrace/metrics.hpp"
#include "annotrace/patterns.hpp"
#include "annotrace/report.hpp"
#include "annotrace/synth.hpp"

namespace py = pybind11;
using namespace annotrace;

namespace {

std::vector<MergeGroup> merges_of(const std::vector<std::string>& specs) {
  std::vector<MergeGroup> out;
  for (const auto& s : specs) out.push_back(parse_merge_group(s));
  return out;
}

py::dict interval(const DateInterval& i) {
  py::dict d;
  d["lo"] = i.lo.iso();
  d["hi"] = i.hi.iso();
  return d;
}

py::dict pattern_dict(const Workspace& ws, const PatternInstance& p) {
  py::dict d;
  d["label"] = std::string(to_string(p.label));
  d["fingerprint"] = p.sentence.hex();
  d["sentence"] = ws.sentence_text(p.sentence);
  d["database"] = p.database.str();
  d["record"] = p.record;
  d["secondaries"] = p.secondaries;
  d["witnesses"] = p.witnesses;
  d["record_absent_releases"] = p.record_absent_releases;
  return d;
}

py::dict summary_dict(const IngestSummary& s) {
  py::dict d;
  d["database"] = s.release.database.str();
  d["release"] = s.release.label;
  d["date"] = s.release.date.iso();
  d["records"] = s.records;
  d["occurrences"] = s.occurrences;
  d["duplicates_collapsed"] = s.duplicates_collapsed;
  d["empty_dropped"] = s.empty_dropped;
  d["parse_damage"] = s.parse_damage;
  d["replacement_chars"] = s.replacement_chars;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sentence reuse and propagation analysis over versioned annotation databases.";
  m.attr("__version__") = std::string(version());

  static py::exception<Error> error(m, "Error");
  py::register_exception<InvalidInput>(m, "InvalidInput", error.ptr());
  py::register_exception<NotFound>(m, "NotFound", error.ptr());
  py::register_exception<StateError>(m, "StateError", error.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());

  m.def(
      "normalize",
      [](const std::string& raw) -> std::optional<std::string> {
        auto n = normalize(raw);
        if (!n) return std::nullopt;
        return n->text();
      },
      py::arg("text"), "Canonical form of a sentence, or None when nothing is left.");
  m.def(
      "fingerprint", [](const std::string& text) { return fingerprint(text).hex(); }, py::arg("text"),
      "Hex fingerprint of canonical sentence text.");
  m.def(
      "percent", [](std::uint64_t part, std::uint64_t total) { return percent(part, total).str(); },
      py::arg("part"), py::arg("total"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"annotrace"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");

  m.def(
      "generate",
      [](const std::string& spec_json, const std::string& out_dir) {
        const GeneratedFiles f = generate(GeneratorSpec::from_json(spec_json), out_dir);
        py::dict d;
        d["manifest"] = f.manifest.string();
        d["truth"] = f.truth.string();
        d["occurrences"] = f.occurrences;
        return d;
      },
      py::arg("spec_json"), py::arg("out_dir"), "Writes a synthetic corpus; returns the manifest and truth paths.");

  py::class_<Workspace, std::unique_ptr<Workspace>>(m, "Workspace")
      .def_static(
          "open", [](const std::string& root) { return std::make_unique<Workspace>(Workspace::open(root)); },
          py::arg("root"))
      .def_static(
          "open_or_create",
          [](const std::string& root) { return std::make_unique<Workspace>(Workspace::open_or_create(root)); },
          py::arg("root"))
      .def_property_readonly("id", &Workspace::id)
      .def_property_readonly("root", [](const Workspace& ws) { return ws.root().string(); })
      .def("refresh", &Workspace::refresh)
      .def("databases",
           [](const Workspace& ws) {
             std::vector<std::string> out;
             for (const auto& id : ws.databases()) out.push_back(id.str());
             return out;
           })
      .def("sentence_count", &Workspace::sentence_count)
      .def(
          "ingest_manifest",
          [](Workspace& ws, const std::string& path, bool skip_ingested) {
            std::vector<IngestSummary> summaries;
            {
              py::gil_scoped_release release;
              summaries = ingest_manifest(ws, Manifest::load(path), skip_ingested);
            }
            py::list out;
            for (const auto& s : summaries) out.append(summary_dict(s));
            return out;
          },
          py::arg("path"), py::arg("skip_ingested") = true)
      .def(
          "stats",
          [](const Workspace& ws, const std::vector<std::string>& dbs, const std::string& release) {
            std::vector<DatabaseId> ids;
            for (const auto& d : dbs) ids.emplace_back(d);
            py::list out;
            for (const auto& row : redundancy_profile(ws, ids, release == "all" ? ReleaseSelector::kAll
                                                                                 : ReleaseSelector::kLatest)) {
              py::dict d;
              d["database"] = row.release.database.str();
              d["release"] = row.release.label;
              d["date"] = row.release.date.iso();
              d["ingested"] = row.ingested;
              d["total"] = row.counts.total;
              d["unique"] = row.counts.unique;
              d["singleton"] = row.counts.singleton;
              d["unique_pct"] = row.unique_pct.str();
              d["singleton_pct"] = row.singleton_pct.str();
              out.append(d);
            }
            return out;
          },
          py::arg("databases") = std::vector<std::string>{}, py::arg("release") = "latest")
      .def(
          "lifetime_unique",
          [](const Workspace& ws, const std::string& db) { return lifetime_unique(ws, DatabaseId(db)).total_unique; },
          py::arg("database"))
      .def(
          "patterns",
          [](const Workspace& ws, const std::string& db) {
            const PatternReport r = detect_patterns(ws, DatabaseId(db));
            py::dict d;
            d["scope"] = r.scope;
            d["ambiguous_origin"] = r.ambiguous_origin;
            d["sentences_scanned"] = r.sentences_scanned;
            py::dict counts;
            for (auto l : {PatternLabel::kTransient, PatternLabel::kPossiblyTransient, PatternLabel::kMissingOrigin}) {
              counts[py::str(std::string(to_string(l)))] = r.counts(l).sentences;
            }
            d["sentences"] = counts;
            py::list inst;
            for (const auto& p : r.instances) inst.append(pattern_dict(ws, p));
            d["instances"] = inst;
            return d;
          },
          py::arg("database"))
      .def(
          "partition",
          [](const Workspace& ws, const std::vector<std::string>& merges) {
            py::list out;
            for (const auto& row : combination_partition(ws, merges_of(merges))) {
              out.append(py::make_tuple(row.combination, row.count));
            }
            return out;
          },
          py::arg("merges") = std::vector<std::string>{})
      .def(
          "cross_instances",
          [](const Workspace& ws, const std::vector<std::string>& merges) {
            py::list out;
            for (const auto& c : detect_cross_missing_origin(ws, merges_of(merges))) {
              py::dict d;
              d["fingerprint"] = c.sentence.hex();
              d["sentence"] = ws.sentence_text(c.sentence);
              d["origin"] = c.origin;
              d["destinations"] = c.destinations;
              d["origin_first"] = interval(c.origin_first);
              py::list firsts;
              for (const auto& i : c.destination_first) firsts.append(interval(i));
              d["destination_first"] = firsts;
              d["origin_removed"] = interval(c.origin_removed);
              d["confidence"] = std::string(to_string(c.confidence));
              out.append(d);
            }
            return out;
          },
          py::arg("merges") = std::vector<std::string>{})
      .def(
          "timeline",
          [](const Workspace& ws, const std::string& text) { return ws.timeline_for_text(text).databases; },
          py::arg("text"), "Presence of a sentence: {database: {accession: [ordinals]}}.")
      .def("check_integrity", [](const Workspace& ws) { return ws.check_integrity().problems; });
}
