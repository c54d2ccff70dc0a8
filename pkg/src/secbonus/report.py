"""Sprint reports assembled from the ledger, and their renderings.

A :class:`SprintReport` stores only raw inputs (issue counts, LOC, the
previous sprint's counts, the bonus cap and roster).  Densities, the
improvement ratio and the points are recomputed from those inputs every
time, so a report parsed back from JSON renders byte-identically.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .errors import DataError, MissingEntryError
from .ledger import ROLES, Ledger, format_time
from .metrics import (
    DEFAULT_SCHEDULE,
    MAX_POINTS,
    SCHEMES,
    ZERO_BASELINE,
    combine,
    delta_q,
    reward_con,
    reward_sec,
    round_half_away,
    sprint_schedule,
)
from .sarif import Finding, finding_from_record, finding_to_record, sorted_findings
from .shapley import equal_award

SCOPES = ("combined",) + ROLES
FORMATS = ("markdown", "json", "csv_row")
CSV_HEADER = "team_id,sprint,scheme,scope,issues,loc,density,delta_q,max_bonus,points"


@dataclass(frozen=True)
class RepoSummary:
    role: str
    commit_id: str
    assess_time: str
    per_tool: dict[str, int]
    issues: int
    file_count: int
    loc: int
    findings: tuple[Finding, ...] = ()

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "commit_id": self.commit_id,
            "assess_time": self.assess_time,
            "per_tool": dict(sorted(self.per_tool.items())),
            "issues": self.issues,
            "file_count": self.file_count,
            "loc": self.loc,
            "density": _Fixed(self.issues / self.loc, 6),
            "findings": [finding_to_record(f) for f in self.findings],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepoSummary":
        return cls(
            role=data["role"],
            commit_id=data["commit_id"],
            assess_time=data["assess_time"],
            per_tool={k: int(v) for k, v in data["per_tool"].items()},
            issues=int(data["issues"]),
            file_count=int(data["file_count"]),
            loc=int(data["loc"]),
            findings=tuple(finding_from_record(r) for r in data["findings"]),
        )


@dataclass(frozen=True)
class SprintReport:
    team_id: str
    sprint_index: int
    scheme: str
    scope: str
    repos: tuple[RepoSummary, ...]
    previous: tuple[int, int] | None
    max_bonus: int
    members: tuple[str, ...] = ()
    policy: str = "equal"

    def _scoped(self) -> list[RepoSummary]:
        if self.scope == "combined":
            return list(self.repos)
        return [r for r in self.repos if r.role == self.scope]

    @property
    def issues(self) -> int:
        return combine((r.issues, r.loc) for r in self._scoped())[0]

    @property
    def loc(self) -> int:
        return combine((r.issues, r.loc) for r in self._scoped())[1]

    @property
    def density(self) -> Fraction:
        return Fraction(self.issues, self.loc)

    @property
    def previous_density(self) -> Fraction | None:
        if self.previous is None:
            return None
        return Fraction(*self.previous)

    @property
    def delta_q(self):
        prev = self.previous_density
        return None if prev is None else delta_q(prev, self.density)

    def _issues_for(self, role: str) -> int:
        return sum(r.issues for r in self.repos if r.role == role)

    @property
    def formula_points(self) -> int:
        if self.scheme == "CON":
            return reward_con(self._issues_for("front_end"), self._issues_for("back_end"))
        dq = self.delta_q
        if dq is None:
            # nothing to compare against: only a clean codebase earns points
            return MAX_POINTS if self.issues == 0 else 0
        return reward_sec(dq, self.issues)

    @property
    def points(self) -> int:
        return min(self.formula_points, self.max_bonus)

    @property
    def member_points(self) -> dict[str, int]:
        if not self.members:
            return {}
        return equal_award(self.members, self.points)

    @property
    def findings(self) -> list[Finding]:
        return [f for r in self.repos for f in r.findings]

    def to_dict(self) -> dict:
        dq = self.delta_q
        prev = self.previous_density
        return {
            "team_id": self.team_id,
            "sprint_index": self.sprint_index,
            "scheme": self.scheme,
            "scope": self.scope,
            "policy": self.policy,
            "repos": [r.to_dict() for r in self.repos],
            "combined": {
                "issues": self.issues,
                "loc": self.loc,
                "density": _Fixed(float(self.density), 6),
            },
            "previous": None
            if self.previous is None
            else {
                "issues": self.previous[0],
                "loc": self.previous[1],
                "density": _Fixed(float(prev), 6),
            },
            "delta_q": _ratio_value(dq),
            "formula_points": self.formula_points,
            "max_bonus": self.max_bonus,
            "points": self.points,
            "member_points": self.member_points,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SprintReport":
        previous = data.get("previous")
        return cls(
            team_id=data["team_id"],
            sprint_index=int(data["sprint_index"]),
            scheme=data["scheme"],
            scope=data["scope"],
            repos=tuple(RepoSummary.from_dict(r) for r in data["repos"]),
            previous=None if previous is None else (int(previous["issues"]), int(previous["loc"])),
            max_bonus=int(data["max_bonus"]),
            members=tuple(sorted(data.get("member_points", {}))),
            policy=data.get("policy", "equal"),
        )


def _ratio_value(dq):
    if dq is None:
        return None
    if dq is ZERO_BASELINE:
        return "zero_baseline"
    return _Fixed(float(dq), 4)


def _ratio_text(dq) -> str:
    if dq is None:
        return "n/a"
    if dq is ZERO_BASELINE:
        return "zero_baseline"
    return f"{float(dq):.4f}"


def sprint_report(
    ledger: Ledger,
    team_id: str,
    sprint_index: int,
    scheme: str = "SEC",
    members: Iterable[str] = (),
    roles: Iterable[str] | None = None,
    schedule=DEFAULT_SCHEDULE,
    scope: str = "combined",
) -> SprintReport:
    """Assemble the report for one team and sprint from ledger entries.

    ``roles`` lists the repositories the team must have; by default the
    roles found for the sprint.  For SEC from sprint 2 on, the previous
    sprint must hold the same roles.
    """
    scheme = scheme.upper()
    if scheme not in SCHEMES:
        raise DataError(f"unknown scheme {scheme!r}")
    if scope not in SCOPES:
        raise DataError(f"unknown scope {scope!r}")
    current = ledger.entries(team_id, sprint_index)
    wanted = tuple(roles) if roles is not None else tuple(r for r in ROLES if r in current)
    if not wanted:
        raise MissingEntryError(f"{team_id}/{sprint_index}/*", "no ledger entries")
    for role in wanted:
        if role not in current:
            raise MissingEntryError(f"{team_id}/{sprint_index}/{role}")
    if scope != "combined" and scope not in wanted:
        raise MissingEntryError(f"{team_id}/{sprint_index}/{scope}")

    repos = tuple(
        RepoSummary(
            role=role,
            commit_id=e.commit_id,
            assess_time=format_time(e.assess_time),
            per_tool=dict(e.issue_tally.per_tool),
            issues=e.issue_tally.total,
            file_count=e.file_count,
            loc=e.loc,
            findings=tuple(sorted_findings(e.findings)),
        )
        for role in ROLES
        if role in wanted
        for e in (current[role],)
    )

    previous = None
    if sprint_index > 1:
        prior = ledger.entries(team_id, sprint_index - 1)
        needed = [r for r in wanted if scope in ("combined", r)]
        missing = [r for r in needed if r not in prior]
        if missing and scheme == "SEC":
            raise MissingEntryError(f"{team_id}/{sprint_index - 1}/{missing[0]}", "missing baseline entry")
        if not missing:
            previous = combine((prior[r].issue_tally.total, prior[r].loc) for r in needed)

    return SprintReport(
        team_id=team_id,
        sprint_index=sprint_index,
        scheme=scheme,
        scope=scope,
        repos=repos,
        previous=previous,
        max_bonus=sprint_schedule(sprint_index, schedule),
        members=tuple(sorted(set(members))),
    )


def explain(report: SprintReport) -> str:
    """Step-by-step instantiation of the bonus formula."""
    out = []
    t, p = report.sprint_index, report.sprint_index - 1
    out.append(f"team {report.team_id}, sprint {t}, scheme {report.scheme}, scope {report.scope}")
    for r in report.repos:
        out.append(f"  {r.role}: I = {r.issues}, LOC = {r.loc}")
    out.append(f"Q(t{t}) = {report.issues} / {report.loc} = {float(report.density):.6f}")
    if report.scheme == "CON":
        front, back = report._issues_for("front_end"), report._issues_for("back_end")
        total = front + back
        out.append(f"I_total = {front} + {back} = {total}")
        out.append(
            f"R_Q = round(10 * (100 - {total}) / 100) = round({10 * (100 - total) / 100:.4f})"
            f" = {round_half_away(Fraction(10 * (100 - total), 100))}, clamped to [0, 10] = {report.formula_points}"
        )
    elif report.previous is None:
        out.append("no previous assessment: full bonus only for zero issues")
        out.append(f"R = {report.formula_points}")
    else:
        pi, pl = report.previous
        out.append(f"Q(t{p}) = {pi} / {pl} = {float(report.previous_density):.6f}")
        dq = report.delta_q
        if dq is ZERO_BASELINE:
            out.append(f"dQ = Q(t{t}) / Q(t{p}) undefined (previous density 0): treated as dQ >= 1")
        else:
            out.append(f"dQ = Q(t{t}) / Q(t{p}) = {_ratio_text(dq)}")
        if report.issues == 0:
            out.append("no remaining issues: full bonus")
            out.append(f"R = {report.formula_points}")
        elif dq is ZERO_BASELINE:
            out.append(f"R = {report.formula_points}")
        else:
            inner = 10 * (1 - min(dq, Fraction(1)))
            out.append(
                f"R = round(min[10, 10 * (1 - min({_ratio_text(dq)}, 1))]) = round({float(inner):.4f})"
                f" = {report.formula_points}"
            )
    out.append(f"sprint cap = {report.max_bonus} -> points = {report.points}")
    return "\n".join(out) + "\n"


class _Fixed:
    """A float rendered with a fixed number of decimals in JSON."""

    __slots__ = ("value", "digits")

    def __init__(self, value: float, digits: int) -> None:
        self.value = value
        self.digits = digits

    def __str__(self) -> str:
        return f"{self.value:.{self.digits}f}"


def encode_json(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {encode_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + encode_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, _Fixed):
        return str(obj)
    return json.dumps(obj, ensure_ascii=False)


def _md(text: str) -> str:
    return text.replace("\\", "\\\\").replace("|", "\\|").replace("\r", " ").replace("\n", " ")


def render_markdown(report: SprintReport) -> str:
    lines = [
        f"# Security report: team {report.team_id}, sprint {report.sprint_index}",
        "",
        f"Scheme: {report.scheme} (scope: {report.scope})",
        "",
        "| Repository | Commit | Assessed | Issues | LOC | Density |",
        "|---|---|---|---:|---:|---:|",
    ]
    for r in report.repos:
        lines.append(
            f"| {r.role} | {r.commit_id[:12]} | {r.assess_time} | {r.issues} | {r.loc} | {r.issues / r.loc:.6f} |"
        )
    lines.append(f"| {report.scope} | | | {report.issues} | {report.loc} | {float(report.density):.6f} |")
    lines.append("")
    if report.previous is not None:
        pi, pl = report.previous
        lines.append(f"Previous sprint density: {float(report.previous_density):.6f} ({pi} issues / {pl} LOC)")
    else:
        lines.append("Previous sprint density: n/a")
    lines.append(f"Improvement ratio dQ: {_ratio_text(report.delta_q)}")
    lines.append(
        f"Bonus: {report.points} of {report.max_bonus} possible points"
        f" (formula {report.formula_points}, sprint cap {report.max_bonus})"
    )
    if report.member_points:
        lines += ["", "## Members", "", "| Member | Points |", "|---|---:|"]
        lines += [f"| {_md(m)} | {p} |" for m, p in report.member_points.items()]
    lines += ["", "## Findings"]
    for r in report.repos:
        for tool, count in sorted(r.per_tool.items()):
            lines += ["", f"### {r.role}: {_md(tool)} ({count})", ""]
            rows = [f for f in r.findings if f.tool_name == tool]
            if not rows:
                lines.append("No findings.")
                continue
            lines += ["| Rule | Level | File | Line | Message |", "|---|---|---|---:|---|"]
            for f in rows:
                lines.append(
                    f"| {_md(f.rule_id)} | {f.level} | {_md(f.file_path)} | {f.start_line or ''} | {_md(f.message)} |"
                )
    return "\n".join(lines) + "\n"


def csv_row(report: SprintReport) -> str:
    buf = io.StringIO()
    dq = report.delta_q
    csv.writer(buf, lineterminator="\n").writerow(
        [
            report.team_id,
            report.sprint_index,
            report.scheme,
            report.scope,
            report.issues,
            report.loc,
            f"{float(report.density):.6f}",
            "" if dq is None else _ratio_text(dq),
            report.max_bonus,
            report.points,
        ]
    )
    return buf.getvalue()


def render(report: SprintReport, fmt: str = "markdown") -> bytes:
    if fmt == "markdown":
        text = render_markdown(report)
    elif fmt == "json":
        text = encode_json(report.to_dict()) + "\n"
    elif fmt in ("csv_row", "csv"):
        text = csv_row(report)
    else:
        raise DataError(f"unknown report format {fmt!r}")
    return text.encode("utf-8")


def parse_json_report(raw: bytes | str) -> SprintReport:
    try:
        return SprintReport.from_dict(json.loads(raw))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed report: {exc}") from exc
