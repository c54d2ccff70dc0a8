"""Snapshot resolution, scanner invocation and assessment runs.

Only commits on the first-parent chain of a branch are considered.  A
snapshot is exported with ``git archive`` into a read-only directory, so
scanners never see uncommitted files or the ``.git`` directory.
"""

from __future__ import annotations

import io
import logging
import os
import shlex
import shutil
import stat
import subprocess
import tarfile
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    ConfigError,
    DataError,
    ExternalToolError,
    SarifOutputMissing,
    ScannerFailed,
    ScannerTimeout,
    SecbonusError,
    SnapshotError,
)
from .ledger import ROLES, Ledger, LedgerEntry, format_time
from .loc import DEFAULT_IGNORE, LocBreakdown, count_tree
from .sarif import ScanReport, parse_sarif, tally

log = logging.getLogger(__name__)

ENV_PREFIX = "SECBONUS_ADAPTER_"


@dataclass(frozen=True)
class SourceSnapshot:
    team_id: str
    repo_role: str
    repo_path: Path
    branch: str
    commit_id: str
    assess_time: datetime
    checkout_path: Path

    @property
    def ref(self) -> str:
        return f"{self.repo_role}@{self.commit_id}"


@dataclass(frozen=True)
class ScannerAdapterConfig:
    name: str
    command_template: str
    sarif_output: str = "{out}"
    success_exit_codes: frozenset[int] = frozenset({0})
    timeout: float = 600.0
    version: str = ""

    def __post_init__(self) -> None:
        if not self.name or not self.name.replace("-", "_").isidentifier():
            raise ConfigError(f"invalid adapter name {self.name!r}")
        for placeholder in ("{src}", "{out}"):
            if placeholder not in self.command_template:
                raise ConfigError(f"adapter {self.name}: command template lacks {placeholder}")
        if not self.timeout > 0:
            raise ConfigError(f"adapter {self.name}: timeout must be positive")
        object.__setattr__(self, "success_exit_codes", frozenset(self.success_exit_codes))

    def argv(self, src: Path, out: Path) -> list[str]:
        """The command line; an environment variable may replace the executable."""
        args = [part.format(src=src, out=out) for part in shlex.split(self.command_template)]
        override = os.environ.get(ENV_PREFIX + self.name.upper().replace("-", "_"))
        if override:
            args[0] = override
        return args


# Reference scanner set.  Bearer and mobsfscan exit 1 when they report
# findings; detekt exits 2.
PRESETS = {
    "bearer": ScannerAdapterConfig(
        "bearer", "bearer scan {src} --format sarif --output {out} --quiet",
        success_exit_codes=frozenset({0, 1}), version="1.49.0",
    ),
    "detekt": ScannerAdapterConfig(
        "detekt", "detekt-cli --input {src} --report sarif:{out}",
        success_exit_codes=frozenset({0, 2}), version="1.23.8",
    ),
    "mobsfscan": ScannerAdapterConfig(
        "mobsfscan", "mobsfscan {src} --sarif --output {out}",
        success_exit_codes=frozenset({0, 1}), version="0.4.5",
    ),
}


def _git(repo: Path, *args: str) -> str:
    return _git_bytes(repo, *args).decode()


def _git_bytes(repo: Path, *args: str) -> bytes:
    try:
        proc = subprocess.run(["git", "-C", str(repo), *args], capture_output=True, check=False, timeout=300)
    except FileNotFoundError:
        raise ExternalToolError("git executable not found") from None
    if proc.returncode != 0:
        raise SnapshotError(f"git {args[0]} failed in {repo}: {proc.stderr.decode(errors='replace').strip()}")
    return proc.stdout


def find_commit(repo_path: str | os.PathLike, branch: str, assess_time: datetime) -> str:
    """Newest first-parent commit on ``branch`` committed no later than ``assess_time``."""
    repo = Path(repo_path)
    if not (repo / ".git").exists() and not (repo / "HEAD").exists():
        raise SnapshotError(f"not a git repository: {repo}")
    ref = f"refs/heads/{branch}"
    try:
        _git(repo, "rev-parse", "--verify", "--quiet", ref + "^{commit}")
    except SnapshotError:
        raise SnapshotError(f"branch {branch!r} not found in {repo}") from None
    limit = int(assess_time.timestamp())
    for line in _git(repo, "log", "--first-parent", "--format=%H %ct", ref).splitlines():
        commit, _, stamp = line.partition(" ")
        if int(stamp) <= limit:
            return commit
    raise SnapshotError(f"no snapshot available in {repo} on {branch!r} at {format_time(assess_time)}")


def _make_read_only(root: Path) -> None:
    for dirpath, dirnames, filenames in os.walk(root):
        for name in filenames:
            p = os.path.join(dirpath, name)
            if not os.path.islink(p):
                os.chmod(p, stat.S_IMODE(os.stat(p).st_mode) & ~0o222)
    for dirpath, _, _ in os.walk(root, topdown=False):
        os.chmod(dirpath, stat.S_IMODE(os.stat(dirpath).st_mode) & ~0o222)


def _make_writable(root: Path) -> None:
    for dirpath, _, filenames in os.walk(root):
        os.chmod(dirpath, stat.S_IMODE(os.stat(dirpath).st_mode) | 0o700)
        for name in filenames:
            p = os.path.join(dirpath, name)
            if not os.path.islink(p):
                os.chmod(p, stat.S_IMODE(os.stat(p).st_mode) | 0o600)


def remove_checkout(path: str | os.PathLike) -> None:
    path = Path(path)
    if path.exists():
        _make_writable(path)
        shutil.rmtree(path)


def export_commit(repo_path: str | os.PathLike, commit_id: str, dest: str | os.PathLike) -> Path:
    """Materialize ``commit_id`` at ``dest`` via ``git archive``; reuses a finished export."""
    dest = Path(dest)
    marker = dest.parent / f".{dest.name}.commit"
    if dest.is_dir() and marker.is_file() and marker.read_text().strip() == commit_id:
        return dest
    if dest.exists() and any(dest.iterdir()):
        raise SnapshotError(f"checkout path {dest} is not empty")
    archive = _git_bytes(Path(repo_path), "archive", "--format=tar", commit_id)
    dest.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".export-", dir=dest.parent))
    try:
        with tarfile.open(fileobj=io.BytesIO(archive)) as tar:
            if hasattr(tarfile, "data_filter"):
                tar.extractall(staging, filter="data")
            else:  # pragma: no cover - older interpreters
                tar.extractall(staging)
        _make_read_only(staging)
        if dest.exists():
            dest.rmdir()
        os.replace(staging, dest)
        marker.write_text(commit_id + "\n")
    except BaseException:
        remove_checkout(staging)
        raise
    return dest


def resolve_snapshot(
    repo_path: str | os.PathLike,
    branch: str,
    assess_time: datetime,
    checkout_path: str | os.PathLike | None = None,
    team_id: str = "",
    repo_role: str = "back_end",
) -> SourceSnapshot:
    if repo_role not in ROLES:
        raise DataError(f"unknown repository role {repo_role!r}")
    commit = find_commit(repo_path, branch, assess_time)
    if checkout_path is None:
        checkout_path = Path(tempfile.mkdtemp(prefix="secbonus-")) / commit[:12]
    dest = export_commit(repo_path, commit, checkout_path)
    return SourceSnapshot(team_id, repo_role, Path(repo_path), branch, commit, assess_time, dest)


def _tail(data: bytes | str | None, limit: int = 2000) -> str:
    if not data:
        return ""
    if isinstance(data, bytes):
        data = data.decode(errors="replace")
    return data[-limit:].strip()


def run_scanner(adapter: ScannerAdapterConfig, snapshot: SourceSnapshot, out_dir: str | os.PathLike) -> ScanReport:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / f"{adapter.name}.sarif"
    sarif_path = Path(adapter.sarif_output.format(out=out, src=snapshot.checkout_path, name=adapter.name))
    if sarif_path.exists():
        sarif_path.unlink()
    argv = adapter.argv(snapshot.checkout_path, out)
    log.info("running %s on %s", adapter.name, snapshot.ref)
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=adapter.timeout, cwd=out_dir, check=False)
    except FileNotFoundError:
        raise ScannerFailed(f"{adapter.name}: command not found: {argv[0]}") from None
    except subprocess.TimeoutExpired as exc:
        partial = _tail(exc.stderr) or _tail(exc.output)
        note = f"; partial output: {partial}" if partial else "; no partial output"
        raise ScannerTimeout(f"{adapter.name}: timed out after {adapter.timeout:g}s{note}") from None
    if proc.returncode not in adapter.success_exit_codes:
        raise ScannerFailed(
            f"{adapter.name}: exit code {proc.returncode}"
            f" (expected {sorted(adapter.success_exit_codes)}): {_tail(proc.stderr) or _tail(proc.stdout)}"
        )
    if not sarif_path.is_file():
        raise SarifOutputMissing(f"{adapter.name}: no SARIF output at {sarif_path}")
    return parse_sarif(sarif_path.read_bytes(), snapshot.ref, default_tool=adapter.name)


@dataclass
class RepoResult:
    repo_role: str
    snapshot: SourceSnapshot | None = None
    reports: list[ScanReport] = field(default_factory=list)
    loc: LocBreakdown | None = None
    errors: list[SecbonusError] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.errors and self.snapshot is not None and self.loc is not None


@dataclass
class Assessment:
    team_id: str
    assess_time: datetime
    sprint_index: int | None
    repos: dict[str, RepoResult]
    stored: list[tuple[str, int, str]] = field(default_factory=list)

    @property
    def incomplete(self) -> bool:
        return any(not r.complete for r in self.repos.values())

    @property
    def errors(self) -> list[SecbonusError]:
        return [e for r in self.repos.values() for e in r.errors]


def _assess_repo(team_id, repo_path, role, branch, assess_time, adapters, checkout_root, ignore, work_root):
    result = RepoResult(role)
    try:
        commit = find_commit(repo_path, branch, assess_time)
        if checkout_root is None:
            dest = Path(work_root) / role / "src"
        else:
            dest = Path(checkout_root) / team_id / role / commit
        dest = export_commit(repo_path, commit, dest)
        result.snapshot = SourceSnapshot(team_id, role, Path(repo_path), branch, commit, assess_time, dest)
    except SecbonusError as exc:
        result.errors.append(exc)
        return result

    out_dir = Path(work_root) / role / "out"

    def scan(adapter):
        try:
            return run_scanner(adapter, result.snapshot, out_dir)
        except SecbonusError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=len(adapters)) as pool:
        outcomes = list(pool.map(scan, adapters))
    for outcome in outcomes:
        (result.errors if isinstance(outcome, SecbonusError) else result.reports).append(outcome)
    result.loc = count_tree(result.snapshot.checkout_path, include_manifest=role == "front_end", ignore=ignore)
    return result


def assess(
    team_id: str,
    repos: Sequence[tuple[str | os.PathLike, str] | tuple[str | os.PathLike, str, str]],
    assess_time: datetime,
    adapters: Sequence[ScannerAdapterConfig],
    ledger: Ledger | None = None,
    sprint_index: int | None = None,
    checkout_root: str | os.PathLike | None = None,
    ignore: Iterable[str] = DEFAULT_IGNORE,
) -> Assessment:
    """Scan every repository of a team at ``assess_time``.

    ``repos`` holds ``(path, role)`` or ``(path, role, branch)`` tuples.  A
    failing repository or adapter marks the assessment incomplete; the
    repositories that succeeded are still written to the ledger.
    """
    if not adapters:
        raise ConfigError("assessment needs at least one scanner adapter")
    if not repos:
        raise ConfigError("assessment needs at least one repository")
    names = [a.name for a in adapters]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate adapter names")
    specs = [(Path(r[0]), r[1], r[2] if len(r) > 2 else "main") for r in repos]
    roles = [s[1] for s in specs]
    for role in roles:
        if role not in ROLES:
            raise ConfigError(f"unknown repository role {role!r}")
    if len(set(roles)) != len(roles):
        raise ConfigError("each repository role may appear only once per team")
    if ledger is not None and sprint_index is None:
        raise ConfigError("a sprint index is required to record an assessment")

    ignore = tuple(ignore)
    with tempfile.TemporaryDirectory(prefix="secbonus-scan-") as work:
        with ThreadPoolExecutor(max_workers=len(specs)) as pool:
            results = list(
                pool.map(
                    lambda s: _assess_repo(team_id, s[0], s[1], s[2], assess_time, adapters, checkout_root, ignore, work),
                    specs,
                )
            )
    assessment = Assessment(team_id, assess_time, sprint_index, {r.repo_role: r for r in results})
    for r in results:
        for exc in r.errors:
            log.error("%s/%s: %s", team_id, r.repo_role, exc)

    if ledger is not None:
        for r in results:
            if not r.complete:
                continue
            try:
                entry = LedgerEntry.build(
                    team_id, sprint_index, r.repo_role, r.snapshot.commit_id, assess_time,
                    tally(r.reports), r.loc.file_count, r.loc.loc_total,
                    tuple(f for rep in r.reports for f in rep.findings),
                )
                assessment.stored.append(ledger.record(entry))
            except DataError as exc:
                r.errors.append(exc)
    return assessment
