"""File-backed store of per-team, per-sprint measurements.

Layout::

    <root>/<team>/<sprint>/<role>.entry   one JSON document per repository
    <root>/audit.log                      append-only history of every write
    <root>/.lock                          single-writer lock

Entries are written with a temp file and an atomic rename.  Rewriting an
entry with an identical payload is a no-op.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator

from filelock import FileLock

from .errors import ConsistencyError, DataError, MissingEntryError
from .sarif import Finding, IssueTally, finding_from_record, finding_to_record, sorted_findings

ROLES = ("front_end", "back_end")
SCHEMA_VERSION = 1
_SAFE_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


def parse_time(text: str) -> datetime:
    """Parse ISO-8601; a missing offset means UTC."""
    try:
        value = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError:
        raise DataError(f"not an ISO-8601 timestamp: {text!r}") from None
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


def format_time(value: datetime) -> str:
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def check_id(value: str, what: str = "team id") -> str:
    if not _SAFE_ID.match(value):
        raise DataError(f"invalid {what} {value!r}")
    return value


@dataclass(frozen=True)
class LedgerEntry:
    team_id: str
    sprint_index: int
    repo_role: str
    commit_id: str
    assess_time: datetime
    issue_tally: IssueTally
    file_count: int
    loc: int
    density: float
    findings: tuple[Finding, ...] = ()
    created_at: datetime | None = field(default=None, compare=False)

    @classmethod
    def build(
        cls,
        team_id: str,
        sprint_index: int,
        repo_role: str,
        commit_id: str,
        assess_time: datetime,
        issue_tally: IssueTally,
        file_count: int,
        loc: int,
        findings: tuple[Finding, ...] = (),
    ) -> "LedgerEntry":
        """Construct an entry, deriving the density from the raw counts."""
        if loc <= 0:
            raise ConsistencyError(f"{team_id}/{sprint_index}/{repo_role}: LOC must be positive, got {loc}")
        return cls(
            team_id, sprint_index, repo_role, commit_id, assess_time, issue_tally,
            file_count, loc, issue_tally.total / loc, tuple(sorted_findings(findings)),
        )

    @property
    def key(self) -> tuple[str, int, str]:
        return (self.team_id, self.sprint_index, self.repo_role)

    @property
    def key_text(self) -> str:
        return f"{self.team_id}/{self.sprint_index}/{self.repo_role}"

    def validate(self) -> None:
        check_id(self.team_id)
        if self.repo_role not in ROLES:
            raise ConsistencyError(f"unknown repository role {self.repo_role!r}")
        if self.sprint_index < 1:
            raise ConsistencyError("sprint index must be >= 1")
        if self.loc <= 0:
            raise ConsistencyError(f"{self.key_text}: LOC must be positive, got {self.loc}")
        if self.issue_tally.total != sum(self.issue_tally.per_tool.values()):
            raise ConsistencyError(f"{self.key_text}: tally total does not match per-tool counts")
        if self.findings and len(self.findings) != self.issue_tally.total:
            raise ConsistencyError(f"{self.key_text}: {len(self.findings)} findings but tally {self.issue_tally.total}")
        if self.density != self.issue_tally.total / self.loc:
            raise ConsistencyError(
                f"{self.key_text}: density {self.density!r} != {self.issue_tally.total}/{self.loc}"
            )

    def payload(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "team_id": self.team_id,
            "sprint_index": self.sprint_index,
            "repo_role": self.repo_role,
            "commit_id": self.commit_id,
            "assess_time": format_time(self.assess_time),
            "issue_tally": self.issue_tally.to_dict(),
            "loc": {"file_count": self.file_count, "loc_total": self.loc},
            "density": self.density,
            "findings": [finding_to_record(f) for f in sorted_findings(self.findings)],
        }

    def to_bytes(self) -> bytes:
        data = self.payload()
        if self.created_at is not None:
            data["created_at"] = format_time(self.created_at)
        return (json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "LedgerEntry":
        try:
            data = json.loads(raw)
            created = data.get("created_at")
            entry = cls(
                team_id=data["team_id"],
                sprint_index=int(data["sprint_index"]),
                repo_role=data["repo_role"],
                commit_id=data["commit_id"],
                assess_time=parse_time(data["assess_time"]),
                issue_tally=IssueTally.from_dict(data["issue_tally"]),
                file_count=int(data["loc"]["file_count"]),
                loc=int(data["loc"]["loc_total"]),
                density=float(data["density"]),
                findings=tuple(finding_from_record(r) for r in data.get("findings", [])),
                created_at=parse_time(created) if created else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DataError):
                raise
            raise ConsistencyError(f"malformed ledger entry: {exc}") from exc
        entry.validate()
        return entry


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Ledger:
    def __init__(self, root: str | os.PathLike) -> None:
        self.root = Path(root)

    @property
    def audit_path(self) -> Path:
        return self.root / "audit.log"

    def path_for(self, team_id: str, sprint_index: int, role: str) -> Path:
        check_id(team_id)
        if role not in ROLES:
            raise DataError(f"unknown repository role {role!r}")
        return self.root / team_id / str(int(sprint_index)) / f"{role}.entry"

    def record(self, entry: LedgerEntry, now: datetime | None = None) -> tuple[str, int, str]:
        """Insert or replace an entry; returns its key."""
        entry.validate()
        path = self.path_for(*entry.key)
        self.root.mkdir(parents=True, exist_ok=True)
        with FileLock(str(self.root / ".lock")):
            previous = None
            if path.exists():
                previous = LedgerEntry.from_bytes(path.read_bytes())
                if previous.payload() == entry.payload():
                    return entry.key
            stamp = now or datetime.now(timezone.utc)
            if entry.created_at is None:
                entry = replace(entry, created_at=stamp)
            data = entry.to_bytes()
            _atomic_write(path, data)
            row = {
                "action": "replace" if previous else "insert",
                "at": format_time(stamp),
                "key": entry.key_text,
                "previous": previous.payload() if previous else None,
                "sha256": hashlib.sha256(data).hexdigest(),
            }
            with open(self.audit_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
        return entry.key

    def read_bytes(self, team_id: str, sprint_index: int, role: str) -> bytes:
        path = self.path_for(team_id, sprint_index, role)
        if not path.exists():
            raise MissingEntryError(f"{team_id}/{sprint_index}/{role}")
        return path.read_bytes()

    def get(self, team_id: str, sprint_index: int, role: str) -> LedgerEntry:
        entry = LedgerEntry.from_bytes(self.read_bytes(team_id, sprint_index, role))
        if entry.key != (team_id, sprint_index, role):
            raise ConsistencyError(f"entry at {team_id}/{sprint_index}/{role} carries key {entry.key_text}")
        return entry

    def entries(self, team_id: str, sprint_index: int) -> dict[str, LedgerEntry]:
        found = {}
        for role in ROLES:
            if self.path_for(team_id, sprint_index, role).exists():
                found[role] = self.get(team_id, sprint_index, role)
        return found

    def teams(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir() and _SAFE_ID.match(p.name))

    def sprints(self, team_id: str) -> list[int]:
        base = self.root / check_id(team_id)
        if not base.is_dir():
            return []
        return sorted(int(p.name) for p in base.iterdir() if p.is_dir() and p.name.isdigit())

    def __iter__(self) -> Iterator[LedgerEntry]:
        for team in self.teams():
            for sprint in self.sprints(team):
                yield from self.entries(team, sprint).values()

    def audit_rows(self) -> list[dict]:
        if not self.audit_path.exists():
            return []
        return [json.loads(line) for line in self.audit_path.read_text(encoding="utf-8").splitlines() if line]

