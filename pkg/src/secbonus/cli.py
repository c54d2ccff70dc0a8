"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 failure
of an external tool (git, scanner).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from ._backend import BACKEND
from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, MissingEntryError, SecbonusError
from .ledger import Ledger, format_time, parse_time
from .loc import DEFAULT_IGNORE, count_file, count_tree, language_for
from .metrics import SCHEMES
from .orchestrator import PRESETS, assess
from .report import CSV_HEADER, SCOPES, csv_row, encode_json, explain, render, sprint_report
from .sarif import dump_records, parse_sarif, tally
from .shapley import parse_game, scale_to_reward, shapley

log = logging.getLogger("secbonus")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TOOL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _version_text() -> str:
    lines = [f"secbonus {__version__} ({BACKEND} kernels)"]
    lines += [f"  preset {name} {cfg.version}" for name, cfg in sorted(PRESETS.items())]
    return "\n".join(lines)


class _Version(argparse.Action):
    def __init__(self, option_strings, dest=argparse.SUPPRESS, **kwargs):
        super().__init__(option_strings, dest, nargs=0, default=argparse.SUPPRESS, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        print(_version_text())
        parser.exit(EXIT_OK)


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        sys.stdout.write(encode_json(payload) + "\n")
    elif not args.quiet:
        sys.stdout.write(text)


def _store(args) -> tuple[Ledger, PipelineConfig | None]:
    if args.config:
        cfg = load_config(args.config)
        return Ledger(args.ledger or cfg.ledger_root), cfg
    if args.ledger:
        return Ledger(args.ledger), None
    raise ConfigError("pass --config FILE or --ledger DIR")


def _report_for(args):
    ledger, cfg = _store(args)
    scheme = (args.scheme or (cfg.scheme if cfg else "SEC")).upper()
    members, roles, schedule = (), None, None
    if cfg is not None:
        team = cfg.team(args.team)
        members, roles, schedule = team.members, team.roles, cfg.schedule
    kwargs = {"schedule": schedule} if schedule else {}
    return sprint_report(
        ledger, args.team, args.sprint, scheme, members=members, roles=roles, scope=args.scope, **kwargs
    ), cfg


def cmd_loc(args) -> int:
    path = Path(args.path)
    if path.is_file():
        language = language_for(path)
        if language is None:
            raise DataError(f"{path}: not a .java, .kt or manifest file")
        count = count_file(path.read_text(encoding="utf-8"), language)
        payload = {"file_count": 1, "loc_total": count, "per_file": {path.name: count}, "warnings": []}
    else:
        ignore = tuple(args.ignore) if args.ignore else DEFAULT_IGNORE
        breakdown = count_tree(path, include_manifest=args.manifest, ignore=ignore, workers=args.workers)
        payload = {
            "file_count": breakdown.file_count,
            "loc_total": breakdown.loc_total,
            "per_file": breakdown.per_file,
            "warnings": breakdown.warnings,
        }
    for warning in payload["warnings"]:
        log.warning(warning)
    text = "".join(f"{n:8d}  {p}\n" for p, n in payload["per_file"].items()) if args.per_file else ""
    text += f"{payload['file_count']} files, {payload['loc_total']} lines of code\n"
    _emit(args, payload, text)
    return EXIT_OK


def cmd_ingest(args) -> int:
    reports = []
    for name in args.files:
        try:
            raw = Path(name).read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read {name}: {exc.strerror}") from None
        reports.append(parse_sarif(raw, args.snapshot))
    result = tally(reports)
    if args.records:
        Path(args.records).write_text(dump_records(f for r in reports for f in r.findings), encoding="utf-8")
    payload = {
        "snapshot": args.snapshot,
        "per_tool": result.per_tool,
        "total": result.total,
        "warnings": [w for r in reports for w in r.warnings],
    }
    text = "".join(f"{tool:<20} {n:6d}\n" for tool, n in result.per_tool.items())
    text += f"{'total':<20} {result.total:6d}\n"
    _emit(args, payload, text)
    return EXIT_OK


def cmd_assess(args) -> int:
    cfg = load_config(args.config)
    team = cfg.team(args.team)
    when = parse_time(args.time)
    sprint = args.sprint if args.sprint is not None else cfg.sprint_for(when)
    if not cfg.adapters:
        raise ConfigError("no scanner adapters configured")
    result = assess(
        team.team_id,
        [(r.path, r.role, r.branch) for r in team.repos],
        when,
        cfg.adapters,
        ledger=Ledger(cfg.ledger_root),
        sprint_index=sprint,
        checkout_root=cfg.checkout_root,
        ignore=cfg.ignore,
    )
    repos = {}
    lines = []
    for role, r in result.repos.items():
        t = tally(r.reports) if r.reports else None
        repos[role] = {
            "commit_id": r.snapshot.commit_id if r.snapshot else None,
            "per_tool": t.per_tool if t else {},
            "issues": t.total if t else 0,
            "loc": r.loc.loc_total if r.loc else None,
            "complete": r.complete,
            "errors": [str(e) for e in r.errors],
        }
        state = "ok" if r.complete else "INCOMPLETE"
        lines.append(
            f"{role:<10} {(r.snapshot.commit_id[:12] if r.snapshot else '-'):<12} "
            f"issues={repos[role]['issues']} loc={repos[role]['loc']} {state}\n"
        )
    payload = {
        "team_id": team.team_id,
        "sprint_index": sprint,
        "assess_time": format_time(when),
        "complete": not result.incomplete,
        "repos": repos,
    }
    _emit(args, payload, "".join(lines))
    if result.incomplete:
        for err in result.errors:
            print(f"secbonus: {err}", file=sys.stderr)
        return max((e.exit_code for e in result.errors), default=EXIT_DATA)
    return EXIT_OK


def _reward_payload(report) -> dict:
    data = report.to_dict()
    return {k: data[k] for k in (
        "team_id", "sprint_index", "scheme", "scope", "combined", "previous",
        "delta_q", "formula_points", "max_bonus", "points", "member_points",
    )}


def cmd_reward(args) -> int:
    report, _ = _report_for(args)
    if args.explain and args.format != "json":
        sys.stdout.write(explain(report))
        return EXIT_OK
    text = f"{report.team_id} sprint {report.sprint_index} {report.scheme}: {report.points} points\n"
    text += "".join(f"  {m}: {p}\n" for m, p in report.member_points.items())
    _emit(args, _reward_payload(report), text)
    return EXIT_OK


def cmd_report(args) -> int:
    report, cfg = _report_for(args)
    data = render(report, args.format)
    outbox = Path(args.outbox) if args.outbox else None
    if args.output:
        Path(args.output).write_bytes(data)
    elif outbox is not None or (args.to_outbox and cfg and cfg.outbox):
        outbox = outbox or cfg.outbox
        suffix = {"markdown": "md", "json": "json", "csv_row": "csv"}[args.format]
        target = outbox / report.team_id / f"sprint-{report.sprint_index}.{suffix}"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        if not args.quiet:
            print(target)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK


def cmd_export(args) -> int:
    ledger, cfg = _store(args)
    scheme = (args.scheme or (cfg.scheme if cfg else "SEC")).upper()
    rows, skipped = [CSV_HEADER + "\n"], 0
    for team in ledger.teams():
        kwargs = {}
        if cfg is not None:
            try:
                tc = cfg.team(team)
                kwargs = {"members": tc.members, "roles": tc.roles, "schedule": cfg.schedule}
            except ConfigError:
                pass
        for sprint in ledger.sprints(team):
            try:
                rows.append(csv_row(sprint_report(ledger, team, sprint, scheme, **kwargs)))
            except MissingEntryError as exc:
                print(f"secbonus: skipped {team}/{sprint}: {exc}", file=sys.stderr)
                skipped += 1
    text = "".join(rows)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_DATA if skipped else EXIT_OK


def cmd_shapley(args) -> int:
    try:
        game = parse_game(Path(args.game).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {args.game}: {exc.strerror}") from None
    alloc = shapley(game)
    if args.points is not None:
        alloc = scale_to_reward(alloc, args.points)
    payload = {"players": list(game.players), "total": alloc.total, "shares": alloc.shares}
    text = "".join(f"{p:<20} {alloc.shares[p]:.6f}\n" for p in game.players)
    text += f"{'total':<20} {alloc.total:.6f}\n"
    _emit(args, payload, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="secbonus", description="Security issue density bonuses for student teams.")
    parser.add_argument("--version", action=_Version, help="show tool and scanner preset versions")
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress human-readable output")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def command(name, func, help_text, formats=("text", "json")):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        p.add_argument("--format", choices=formats, default=formats[0])
        p.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS)
        return p

    def ledger_options(p, sprint=True):
        p.add_argument("--config", help="pipeline config (TOML)")
        p.add_argument("--ledger", help="ledger directory (overrides the config)")
        p.add_argument("--scheme", type=str.upper, choices=SCHEMES)
        if sprint:
            p.add_argument("--team", required=True)
            p.add_argument("--sprint", type=int, required=True)
            p.add_argument("--scope", choices=SCOPES, default="combined")

    p = command("loc", cmd_loc, "count lines of code in a file or directory tree")
    p.add_argument("path")
    p.add_argument("--manifest", action="store_true", help="include AndroidManifest.xml files")
    p.add_argument("--per-file", action="store_true")
    p.add_argument("--ignore", action="append", metavar="DIR", help="directory name to skip (repeatable)")
    p.add_argument("--workers", type=int, default=1)

    p = command("ingest", cmd_ingest, "tally findings from SARIF files")
    p.add_argument("files", nargs="+", metavar="SARIF")
    p.add_argument("--snapshot", default="", help="snapshot label stored with the findings")
    p.add_argument("--records", metavar="FILE", help="write normalized findings as JSON lines")

    p = command("assess", cmd_assess, "scan a team's repositories at an assessment time")
    p.add_argument("--config", required=True)
    p.add_argument("--team", required=True)
    p.add_argument("--time", required=True, help="ISO-8601 assessment time")
    p.add_argument("--sprint", type=int, help="sprint index (default: from the config's assessment_times)")

    p = command("reward", cmd_reward, "compute the bonus for a team and sprint")
    ledger_options(p)
    p.add_argument("--explain", action="store_true", help="show the formula step by step")

    p = command("report", cmd_report, "render a sprint report", formats=("markdown", "json", "csv_row"))
    ledger_options(p)
    p.add_argument("--output", "-o", metavar="FILE")
    p.add_argument("--outbox", metavar="DIR", help="write into DIR/<team>/sprint-<n>.<ext>")
    p.add_argument("--to-outbox", action="store_true", help="write into the configured outbox")

    p = command("export", cmd_export, "one CSV row per team and sprint", formats=("csv",))
    ledger_options(p, sprint=False)
    p.add_argument("--output", "-o", metavar="FILE")

    p = command("shapley", cmd_shapley, "exact Shapley values of a coalition game file")
    p.add_argument("game")
    p.add_argument("--points", type=float, help="rescale shares to this many points")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR if args.quiet else logging.WARNING,
        format="secbonus: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except SecbonusError as exc:
        print(f"secbonus: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:  # pragma: no cover
        return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
