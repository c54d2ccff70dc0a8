"""SARIF 2.1.0 ingestion and duplicate-retaining issue tallies.

Every element of every run's ``results`` array is one finding.  Suppressed
results still count, ``notifications`` never do, and findings reported by
several tools for the same location are counted once per tool.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .errors import MixedSnapshotError, SarifFormatError, SarifParseError

log = logging.getLogger(__name__)

LEVELS = ("error", "warning", "note", "none")
UNSPECIFIED_RULE = "unspecified"


@dataclass(frozen=True)
class Finding:
    tool_name: str
    tool_version: str
    rule_id: str
    level: str
    file_path: str
    start_line: int | None
    message: str

    def __post_init__(self) -> None:
        if not self.rule_id:
            raise SarifFormatError("finding without rule id")
        if self.level not in LEVELS:
            raise SarifFormatError(f"invalid SARIF level {self.level!r}")
        if self.start_line is not None and self.start_line < 1:
            raise SarifFormatError(f"invalid start line {self.start_line}")

    def sort_key(self) -> tuple:
        return (
            self.tool_name,
            self.file_path,
            self.start_line or 0,
            self.rule_id,
            self.level,
            self.message,
            self.tool_version,
        )


@dataclass(frozen=True)
class ScanReport:
    snapshot_ref: str
    tool_name: str
    findings: tuple[Finding, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class IssueTally:
    per_tool: dict[str, int]
    total: int

    def to_dict(self) -> dict:
        return {"per_tool": dict(sorted(self.per_tool.items())), "total": self.total}

    @classmethod
    def from_dict(cls, data: dict) -> "IssueTally":
        per_tool = {str(k): int(v) for k, v in data["per_tool"].items()}
        tally = cls(per_tool, int(data["total"]))
        if tally.total != sum(per_tool.values()):
            raise SarifFormatError("tally total does not match per-tool counts")
        return tally


def _text(message) -> str:
    if not isinstance(message, dict):
        return ""
    for key in ("text", "markdown", "id"):
        value = message.get(key)
        if isinstance(value, str):
            return value
    return ""


def _rule_for(result: dict, rules: list) -> dict:
    index = result.get("ruleIndex")
    if index is None and isinstance(result.get("rule"), dict):
        index = result["rule"].get("index")
    if isinstance(index, int) and 0 <= index < len(rules) and isinstance(rules[index], dict):
        return rules[index]
    return {}


def _rule_id(result: dict, rule: dict) -> str:
    for candidate in (
        result.get("ruleId"),
        (result.get("rule") or {}).get("id") if isinstance(result.get("rule"), dict) else None,
        rule.get("id"),
    ):
        if isinstance(candidate, str) and candidate:
            return candidate
    return UNSPECIFIED_RULE


def _location(result: dict, artifacts: list) -> tuple[str, int | None]:
    locations = result.get("locations") or []
    if not locations or not isinstance(locations[0], dict):
        return "", None
    physical = locations[0].get("physicalLocation") or {}
    artifact = physical.get("artifactLocation") or {}
    uri = artifact.get("uri")
    if not uri:
        index = artifact.get("index")
        if isinstance(index, int) and 0 <= index < len(artifacts):
            uri = ((artifacts[index] or {}).get("location") or {}).get("uri")
    path = uri if isinstance(uri, str) else ""
    if path.startswith("file://"):
        path = path[len("file://") :]
    line = (physical.get("region") or {}).get("startLine")
    if not isinstance(line, int) or isinstance(line, bool) or line < 1:
        line = None
    return path, line


def parse_sarif(document: bytes | str, snapshot_ref: str = "", default_tool: str = "") -> ScanReport:
    """Parse one SARIF log into a :class:`ScanReport`.

    Raises :class:`SarifParseError` for non-JSON input and
    :class:`SarifFormatError` when there is no ``runs`` array.
    """
    try:
        data = json.loads(document)
    except (ValueError, UnicodeDecodeError) as exc:
        raise SarifParseError(f"not a JSON document: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("runs"), list):
        raise SarifFormatError("not a SARIF log: no runs array")
    runs = data["runs"]
    warnings: list[str] = []
    version = data.get("version")
    if version != "2.1.0":
        warnings.append(f"SARIF version {version!r}, expected '2.1.0'")

    tool_name = ""
    findings: list[Finding] = []
    for n, run in enumerate(runs):
        if not isinstance(run, dict):
            raise SarifFormatError(f"run {n} is not an object")
        driver = (run.get("tool") or {}).get("driver") or {}
        name = driver.get("name") or default_tool
        run_version = driver.get("semanticVersion") or driver.get("version") or ""
        if n == 0:
            tool_name = name
        elif name != tool_name:
            warnings.append(f"run {n} from {name!r} attributed to {tool_name!r}")
        rules = driver.get("rules") or []
        artifacts = run.get("artifacts") or []
        results = run.get("results") or []
        if not isinstance(results, list):
            raise SarifFormatError(f"run {n}: results is not an array")
        for result in results:
            if not isinstance(result, dict):
                raise SarifFormatError(f"run {n}: result is not an object")
            rule = _rule_for(result, rules)
            level = result.get("level")
            if level is None:
                level = ((rule.get("defaultConfiguration") or {}).get("level")) or "warning"
            path, line = _location(result, artifacts)
            findings.append(
                Finding(
                    tool_name=tool_name,
                    tool_version=str(run_version),
                    rule_id=_rule_id(result, rule),
                    level=level,
                    file_path=path,
                    start_line=line,
                    message=_text(result.get("message")),
                )
            )
    if len(runs) > 1:
        warnings.append(f"{len(runs)} runs concatenated")
    for w in warnings:
        log.warning("%s: %s", tool_name or "sarif", w)
    return ScanReport(snapshot_ref, tool_name, tuple(findings), tuple(warnings))


def tally(reports: Sequence[ScanReport]) -> IssueTally:
    """Sum findings per tool and overall, without any deduplication."""
    refs = {r.snapshot_ref for r in reports}
    if len(refs) > 1:
        raise MixedSnapshotError(f"reports from different snapshots: {sorted(refs)}")
    per_tool: Counter[str] = Counter()
    for report in reports:
        per_tool[report.tool_name] += len(report.findings)
    return IssueTally(dict(sorted(per_tool.items())), sum(per_tool.values()))


def sorted_findings(findings: Iterable[Finding]) -> list[Finding]:
    return sorted(findings, key=Finding.sort_key)


def finding_to_record(finding: Finding) -> dict:
    return asdict(finding)


def finding_from_record(record: dict) -> Finding:
    line = record.get("start_line")
    return Finding(
        tool_name=str(record["tool_name"]),
        tool_version=str(record.get("tool_version", "")),
        rule_id=str(record["rule_id"]),
        level=str(record["level"]),
        file_path=str(record.get("file_path", "")),
        start_line=None if line is None else int(line),
        message=str(record.get("message", "")),
    )


def dump_records(findings: Iterable[Finding]) -> str:
    """Normalized store format: one JSON object per line, sorted."""
    return "".join(
        json.dumps(finding_to_record(f), sort_keys=True, ensure_ascii=False) + "\n"
        for f in sorted_findings(findings)
    )


def load_records(text: str) -> list[Finding]:
    return [finding_from_record(json.loads(line)) for line in text.splitlines() if line.strip()]
