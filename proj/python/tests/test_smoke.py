# Copyright 2026 The annotrace Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json

import pytest

import annotrace

T1 = {
    "v0": [("A", "the first sentence."), ("A", "the third sentence."), ("A", "the fourth sentence.")],
    "v1": [("A", "the third sentence."), ("B", "the third sentence."), ("A", "the fourth sentence.")],
    "v2": [("B", "the second sentence."), ("B", "the third sentence."), ("A", "the fourth sentence.")],
}
DATES = {"v0": "2001-01-01", "v1": "2002-01-01", "v2": "2003-01-01"}


@pytest.fixture
def t1(tmp_path):
    releases = []
    for label, rows in T1.items():
        (tmp_path / f"{label}.tsv").write_text("".join(f"{a}\t{t}\n" for a, t in rows))
        releases.append({"label": label, "date": DATES[label], "path": f"{label}.tsv"})
    manifest = tmp_path / "t1.json"
    manifest.write_text(json.dumps({"databases": [{"name": "x", "format": "generic-tsv", "releases": releases}]}))
    ws = annotrace.Workspace.open_or_create(str(tmp_path / "ws"))
    summaries = ws.ingest_manifest(str(manifest))
    assert [s["release"] for s in summaries] == ["v0", "v1", "v2"]
    return ws


def test_normalize_and_fingerprint():
    text = annotrace.normalize("May be a transcription factor with important functions\n in eye and nasal development.")
    assert text == "may be a transcription factor with important functions in eye and nasal development."
    assert annotrace.fingerprint("binds dna.") == "db1732ab6cca36b16ac8747705c0ea86"
    assert annotrace.normalize("  \t ") is None
    with pytest.raises(annotrace.InvalidInput):
        annotrace.fingerprint("Binds DNA.")
    assert annotrace.percent(2, 3) == "66.67"


def test_stats_and_patterns(t1):
    rows = t1.stats(["x"], "all")
    assert [(r["total"], r["unique"], r["singleton"]) for r in rows] == [(3, 3, 3), (3, 2, 1), (3, 3, 3)]
    assert rows[1]["unique_pct"] == "66.67"
    assert t1.lifetime_unique("x") == 4
    report = t1.patterns("x")
    assert report["sentences"] == {"transient": 1, "possibly-transient": 1, "missing-origin": 1}
    origin = [i for i in report["instances"] if i["label"] == "missing-origin"][0]
    assert origin["record"] == "A" and origin["secondaries"] == ["B"] and origin["witnesses"] == [0, 1, 2]


def test_timeline_and_errors(t1):
    assert t1.timeline("The THIRD sentence.") == {"x": {"A": [0, 1], "B": [1, 2]}}
    with pytest.raises(annotrace.NotFound):
        t1.timeline("never seen.")
    with pytest.raises(annotrace.Error):
        t1.patterns("nosuch")
    assert t1.check_integrity() == []
    assert t1.partition() == [(["x"], 4)]


def test_synthetic_cross_instances(tmp_path):
    spec = {
        "seed": 3,
        "records": 10,
        "vocabulary": 50,
        "databases": [
            {"name": "a", "releases": 4, "start": "2000-01-01"},
            {"name": "b", "releases": 4, "start": "2000-07-01"},
        ],
        "quotas": {"cross": 3, "missing-origin": 2},
    }
    files = annotrace.generate(json.dumps(spec), str(tmp_path / "corpus"))
    ws = annotrace.Workspace.open_or_create(str(tmp_path / "ws"))
    ws.ingest_manifest(files["manifest"])
    truth = json.loads(open(files["truth"]).read())
    found = {c["fingerprint"] for c in ws.cross_instances()}
    assert {c["fingerprint"] for c in truth["cross"]} <= found


def test_run_cli(t1):
    code, out, err = annotrace.run_cli(["--workspace", t1.root, "--format", "json", "stats"])
    assert code == 0, err
    payload = json.loads(out)["payload"]["stats"]
    assert payload[0]["total"] == 3
    code, _, err = annotrace.run_cli(["--workspace", t1.root, "stats", "--database", "nosuch"])
    assert code != 0 and "nosuch" in err
