from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import sarif_document
from secbonus.errors import MixedSnapshotError, SarifFormatError, SarifParseError
from secbonus.sarif import (
    UNSPECIFIED_RULE,
    Finding,
    ScanReport,
    dump_records,
    load_records,
    parse_sarif,
    sorted_findings,
    tally,
)


def test_empty_results(fixtures_dir):
    report = parse_sarif((fixtures_dir / "sarif" / "empty.sarif").read_bytes(), "snap")
    assert report.tool_name == "bearer"
    assert report.findings == ()
    assert report.snapshot_ref == "snap"


def test_three_results_one_without_location(fixtures_dir):
    report = parse_sarif((fixtures_dir / "sarif" / "three_results.sarif").read_bytes())
    assert report.tool_name == "mobsfscan"
    assert len(report.findings) == 3
    logging_, backup, pinning = report.findings
    assert logging_ == Finding(
        "mobsfscan", "0.4.5", "android_logging", "note",
        "app/src/main/java/demo/Main.java", 12, "The App logs information.",
    )
    # rule resolved through ruleIndex, level from the rule default, path via artifact index
    assert backup.rule_id == "android_manifest_backup"
    assert backup.level == "error"
    assert backup.file_path == "app/src/main/AndroidManifest.xml"
    assert backup.start_line == 10
    # no location at all
    assert pinning.file_path == ""
    assert pinning.start_line is None
    assert pinning.level == "warning"
    assert [f.file_path for f in report.findings].count("") == 1


def test_truncated_document(fixtures_dir):
    raw = (fixtures_dir / "sarif" / "three_results.sarif").read_bytes()
    with pytest.raises(SarifParseError):
        parse_sarif(raw[: len(raw) // 2])


@pytest.mark.parametrize("doc", ['{"version": "2.1.0"}', "[]", '{"runs": {}}', '"x"'])
def test_json_but_not_sarif(doc):
    with pytest.raises(SarifFormatError):
        parse_sarif(doc)


def test_multiple_runs_concatenated():
    doc = {
        "version": "2.1.0",
        "runs": [
            {"tool": {"driver": {"name": "detekt"}}, "results": [{"ruleId": "A", "message": {"text": "a"}}]},
            {"tool": {"driver": {"name": "detekt"}}, "results": [{"ruleId": "B", "message": {"text": "b"}}]},
        ],
    }
    report = parse_sarif(json.dumps(doc))
    assert [f.rule_id for f in report.findings] == ["A", "B"]
    assert report.tool_name == "detekt"
    assert any("2 runs" in w for w in report.warnings)


def test_multiple_runs_other_tool_attributed_to_first():
    doc = {
        "version": "2.1.0",
        "runs": [
            {"tool": {"driver": {"name": "one"}}, "results": []},
            {"tool": {"driver": {"name": "two"}}, "results": [{"ruleId": "B"}]},
        ],
    }
    report = parse_sarif(json.dumps(doc))
    assert {f.tool_name for f in report.findings} == {"one"}


def test_missing_rule_and_tool_name_defaults():
    doc = {"version": "2.1.0", "runs": [{"tool": {"driver": {}}, "results": [{"message": {"text": "m"}}]}]}
    report = parse_sarif(json.dumps(doc), default_tool="stub")
    assert report.tool_name == "stub"
    assert report.findings[0].rule_id == UNSPECIFIED_RULE


def test_notifications_are_not_findings():
    doc = {
        "version": "2.1.0",
        "runs": [{
            "tool": {"driver": {"name": "t"}},
            "results": [],
            "invocations": [{"toolExecutionNotifications": [{"message": {"text": "x"}, "level": "error"}]}],
        }],
    }
    assert parse_sarif(json.dumps(doc)).findings == ()


def test_invalid_level_rejected():
    doc = {"version": "2.1.0", "runs": [{"tool": {"driver": {"name": "t"}}, "results": [{"ruleId": "r", "level": "fatal"}]}]}
    with pytest.raises(SarifFormatError):
        parse_sarif(json.dumps(doc))


def test_tally_pre_study_row_one():
    reports = [
        parse_sarif(sarif_document("Bearer", 0), "team1"),
        parse_sarif(sarif_document("detekt", 69), "team1"),
        parse_sarif(sarif_document("mobsfscan", 14), "team1"),
    ]
    result = tally(reports)
    assert result.total == 83
    assert result.per_tool == {"Bearer": 0, "detekt": 69, "mobsfscan": 14}


def test_tally_empty():
    assert tally([]).total == 0


def test_duplicates_across_tools_retained():
    same = {"ruleId": "x", "locations": [{"physicalLocation": {"artifactLocation": {"uri": "A.kt"}, "region": {"startLine": 3}}}]}
    docs = [
        json.dumps({"version": "2.1.0", "runs": [{"tool": {"driver": {"name": name}}, "results": [same]}]})
        for name in ("detekt", "mobsfscan")
    ]
    assert tally([parse_sarif(d, "s") for d in docs]).total == 2


def test_same_tool_twice_is_summed():
    reports = [parse_sarif(sarif_document("detekt", n), "s") for n in (3, 4)]
    assert tally(reports).per_tool == {"detekt": 7}


def test_mixed_snapshots_rejected():
    with pytest.raises(MixedSnapshotError):
        tally([ScanReport("a", "t"), ScanReport("b", "t")])


counts = st.lists(st.tuples(st.sampled_from(["bearer", "detekt", "mobsfscan"]), st.integers(0, 20)), max_size=6)


@settings(max_examples=60, deadline=None)
@given(parts=counts, seed=st.randoms())
def test_tally_permutation_invariant(parts, seed):
    reports = [parse_sarif(sarif_document(t, n), "s") for t, n in parts]
    shuffled = [
        ScanReport(r.snapshot_ref, r.tool_name, tuple(seed.sample(r.findings, len(r.findings))))
        for r in reports
    ]
    seed.shuffle(shuffled)
    assert tally(shuffled) == tally(reports)


@settings(max_examples=60, deadline=None)
@given(a=counts, b=counts)
def test_tally_additive(a, b):
    ra = [parse_sarif(sarif_document(t, n), "s") for t, n in a]
    rb = [parse_sarif(sarif_document(t, n), "s") for t, n in b]
    assert tally(ra + rb).total == tally(ra).total + tally(rb).total


def test_records_round_trip(fixtures_dir):
    report = parse_sarif((fixtures_dir / "sarif" / "three_results.sarif").read_bytes())
    text = dump_records(report.findings)
    assert len(text.splitlines()) == 3
    assert load_records(text) == sorted_findings(report.findings)
    assert dump_records(load_records(text)) == text


def test_record_order_is_tool_file_line_rule():
    fs = [
        Finding("b", "", "r1", "note", "A.kt", 1, ""),
        Finding("a", "", "r2", "note", "B.kt", 9, ""),
        Finding("a", "", "r1", "note", "B.kt", 2, ""),
        Finding("a", "", "r0", "note", "", None, ""),
    ]
    out = [(f["tool_name"], f["file_path"], f["start_line"], f["rule_id"])
           for f in map(json.loads, dump_records(fs).splitlines())]
    assert out == [("a", "", None, "r0"), ("a", "B.kt", 2, "r1"), ("a", "B.kt", 9, "r2"), ("b", "A.kt", 1, "r1")]


@pytest.mark.parametrize("kwargs", [{"rule_id": ""}, {"start_line": 0}, {"level": "high"}])
def test_finding_invariants(kwargs):
    base = dict(tool_name="t", tool_version="", rule_id="r", level="note", file_path="", start_line=None, message="")
    base.update(kwargs)
    with pytest.raises(SarifFormatError):
        Finding(**base)
