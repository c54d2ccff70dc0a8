"""Pipeline configuration, read from a single TOML file.

Example::

    cohort = "2025"
    ledger = "ledger"              # paths are relative to this file
    scheme = "SEC"
    schedule = [0, 10, 10]
    ignore = [".git", "build", ".gradle"]
    checkout_root = "checkouts"
    outbox = "outbox"
    assessment_times = ["2025-05-02T12:00:00Z", "2025-05-16T12:00:00Z"]

    [[adapters]]
    preset = "detekt"

    [[adapters]]
    name = "custom"
    command = "scan.sh {src} {out}"
    success_exit_codes = [0, 1]
    timeout = 120

    [[teams]]
    id = "t1"
    members = ["alice", "bob"]
    repos = [
        { path = "repos/t1-app", role = "front_end" },
        { path = "repos/t1-server", role = "back_end", branch = "main" },
    ]
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, DataError
from .ledger import ROLES, check_id, parse_time
from .loc import DEFAULT_IGNORE
from .metrics import DEFAULT_SCHEDULE, MAX_POINTS, SCHEMES
from .orchestrator import PRESETS, ScannerAdapterConfig


@dataclass(frozen=True)
class RepoConfig:
    path: Path
    role: str
    branch: str = "main"


@dataclass(frozen=True)
class TeamConfig:
    team_id: str
    members: tuple[str, ...]
    repos: tuple[RepoConfig, ...]

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(r for r in ROLES if any(repo.role == r for repo in self.repos))


@dataclass(frozen=True)
class PipelineConfig:
    cohort: str
    ledger_root: Path
    teams: tuple[TeamConfig, ...]
    adapters: tuple[ScannerAdapterConfig, ...] = ()
    scheme: str = "SEC"
    schedule: tuple[int, ...] = DEFAULT_SCHEDULE
    ignore: tuple[str, ...] = DEFAULT_IGNORE
    checkout_root: Path | None = None
    outbox: Path | None = None
    assessment_times: tuple[datetime, ...] = field(default=())

    def __post_init__(self) -> None:
        ids = [t.team_id for t in self.teams]
        if len(set(ids)) != len(ids):
            raise ConfigError("team ids must be unique")
        for team in self.teams:
            check_id(team.team_id)
            if not team.repos:
                raise ConfigError(f"team {team.team_id} has no repositories")
            roles = [r.role for r in team.repos]
            if len(set(roles)) != len(roles):
                raise ConfigError(f"team {team.team_id} lists a repository role twice")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not self.schedule or any(not 0 <= v <= MAX_POINTS for v in self.schedule):
            raise ConfigError(f"schedule values must lie in [0, {MAX_POINTS}]")
        if list(self.assessment_times) != sorted(self.assessment_times):
            raise ConfigError("assessment times must be increasing")

    def team(self, team_id: str) -> TeamConfig:
        for team in self.teams:
            if team.team_id == team_id:
                return team
        raise ConfigError(f"team {team_id!r} is not configured")

    def sprint_for(self, when: datetime) -> int:
        """Sprint whose configured assessment time equals ``when``."""
        for index, boundary in enumerate(self.assessment_times, 1):
            if boundary == when:
                return index
        raise ConfigError("assessment time matches no configured sprint boundary; pass --sprint")


def _adapter(raw: dict) -> ScannerAdapterConfig:
    preset = raw.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown adapter preset {preset!r}; known: {', '.join(sorted(PRESETS))}")
        base = PRESETS[preset]
    else:
        base = None
    try:
        return ScannerAdapterConfig(
            name=raw.get("name", base.name if base else ""),
            command_template=raw.get("command", base.command_template if base else ""),
            sarif_output=raw.get("sarif_output", base.sarif_output if base else "{out}"),
            success_exit_codes=frozenset(raw.get("success_exit_codes", base.success_exit_codes if base else [0])),
            timeout=float(raw.get("timeout", base.timeout if base else 600)),
            version=str(raw.get("version", base.version if base else "")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise ConfigError(f"bad adapter entry {raw!r}: {exc}") from None


def _path(base: Path, value: str | None) -> Path | None:
    return None if value is None else (base / value).resolve()


def parse_config(data: dict, base: Path) -> PipelineConfig:
    try:
        teams = tuple(
            TeamConfig(
                team_id=str(t["id"]),
                members=tuple(str(m) for m in t.get("members", [])),
                repos=tuple(
                    RepoConfig(_path(base, r["path"]), _role(r["role"]), str(r.get("branch", "main")))
                    for r in t.get("repos", [])
                ),
            )
            for t in data.get("teams", [])
        )
        return PipelineConfig(
            cohort=str(data.get("cohort", "")),
            ledger_root=_path(base, data.get("ledger", "ledger")),
            teams=teams,
            adapters=tuple(_adapter(a) for a in data.get("adapters", [])),
            scheme=str(data.get("scheme", "SEC")).upper(),
            schedule=tuple(int(v) for v in data.get("schedule", DEFAULT_SCHEDULE)),
            ignore=tuple(data.get("ignore", DEFAULT_IGNORE)),
            checkout_root=_path(base, data.get("checkout_root")),
            outbox=_path(base, data.get("outbox")),
            assessment_times=tuple(parse_time(str(v)) for v in data.get("assessment_times", [])),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise ConfigError(str(exc)) from None
        raise ConfigError(f"invalid config: {exc}") from None


def _role(value: str) -> str:
    if value not in ROLES:
        raise ConfigError(f"unknown repository role {value!r}")
    return value


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, path.resolve().parent)
