"""Acceptance gate: one test per criterion, each with its time budget.

Run ``pytest tests/test_acceptance.py`` to get the pass/fail summary block.
"""

from __future__ import annotations

import json
import math
import random
import time
from decimal import Decimal
from fractions import Fraction

import pytest

import e2e
from conftest import _KERNELS
from gen import random_source, sarif_document
from oracles import oracle_loc, oracle_shapley, spreadsheet_reward_con, spreadsheet_reward_sec
from secbonus import _backend
from secbonus.cli import main
from secbonus.errors import ConsistencyError, EmptyCodebaseError
from secbonus.ledger import Ledger, LedgerEntry, parse_time
from secbonus.loc import count_file
from secbonus.metrics import ZERO_BASELINE, combine, delta_q, density, reward_con, reward_sec
from secbonus.report import sprint_report
from secbonus.sarif import IssueTally, parse_sarif, tally
from secbonus.shapley import CoalitionGame, shapley

GOLDEN = e2e.FIXTURES.parent / "golden"


class Budget:
    def __init__(self, seconds: float) -> None:
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s, budget {self.seconds}s"


@pytest.mark.acceptance("reward curve fidelity (1001-point grid, exact, monotone)")
def test_reward_curve():
    with Budget(1.0):
        grid = [k / 500 for k in range(1001)]
        points = [reward_sec(dq, 5) for dq in grid]
        expected = [spreadsheet_reward_sec(Decimal(repr(dq))) for dq in grid]
        assert points == expected
        assert points[0] == 10
        assert all(p == 0 for dq, p in zip(grid, points) if dq >= 1)
        assert all(a >= b for a, b in zip(points, points[1:]))
        # the same grid given as exact fractions
        assert [reward_sec(Fraction(k, 500), 5) for k in range(1001)] == expected


@pytest.mark.acceptance("code-quality reward fidelity (I in 0..200, exact)")
def test_reward_con_curve():
    with Budget(1.0):
        for total in range(201):
            expected = spreadsheet_reward_con(total)
            assert 0 <= expected <= 10
            for front in {0, total // 2, total}:
                assert reward_con(front, total - front) == expected


@pytest.mark.acceptance("LOC oracle equivalence (1000 random Java/Kotlin files)")
def test_loc_oracle_equivalence(monkeypatch):
    rng = random.Random(20250512)
    sources = [(random_source(rng, 60), "java" if i % 2 else "kotlin") for i in range(1000)]
    kernels = [k for k in _KERNELS.values() if k is not None]
    with Budget(30.0):
        for kernel in kernels:
            monkeypatch.setattr(_backend, "count_code_lines", kernel.count_code_lines)
            mismatches = [(s, lang) for s, lang in sources if count_file(s, lang) != oracle_loc(s, lang)]
            assert not mismatches, f"{len(mismatches)} mismatches, first: {mismatches[0]!r}"


@pytest.mark.acceptance("pre-study tally reproduction (83 and 85)")
def test_pre_study_tallies():
    with Budget(1.0):
        for counts, total in (((0, 69, 14), 83), ((0, 67, 18), 85)):
            reports = [
                parse_sarif(sarif_document(tool, n), "team") for tool, n in zip(("bearer", "detekt", "mobsfscan"), counts)
            ]
            result = tally(reports)
            assert result.total == total
            assert result.per_tool == dict(zip(("bearer", "detekt", "mobsfscan"), counts))


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)


@pytest.mark.acceptance("Shapley axioms and oracle agreement (200 games, n=2..6)")
def test_shapley_axioms():
    rng = random.Random(7)
    with Budget(60.0):
        for game_no in range(200):
            n = 2 + game_no % 5
            players = tuple(f"m{i}" for i in range(n))
            v = [0.0] + [rng.uniform(0, 10) for _ in range((1 << n) - 1)]
            w = [0.0] + [rng.uniform(0, 10) for _ in range((1 << n) - 1)]
            null = rng.randrange(n)
            # the null player adds nothing to any coalition
            v = [v[m & ~(1 << null)] for m in range(1 << n)]
            # players i and j become interchangeable
            i, j = rng.sample(range(n), 2)

            def swap(m: int) -> int:
                bi, bj = m >> i & 1, m >> j & 1
                return (m & ~(1 << i) & ~(1 << j)) | (bi << j) | (bj << i)

            sym = [max(w[m], w[swap(m)]) for m in range(1 << n)]
            sym[0] = 0.0

            game_v = CoalitionGame(players, tuple(v))
            game_s = CoalitionGame(players, tuple(sym))
            game_vs = CoalitionGame(players, tuple(a + b for a, b in zip(v, sym)))
            phi_v, phi_s, phi_vs = shapley(game_v).shares, shapley(game_s).shares, shapley(game_vs).shares

            for game, phi in ((game_v, phi_v), (game_s, phi_s), (game_vs, phi_vs)):
                assert _close(sum(phi.values()), game.values[-1])  # efficiency
                oracle = oracle_shapley(players, game.value)
                assert all(_close(phi[p], oracle[p]) for p in players)
            assert _close(phi_v[players[null]], 0.0)  # null player
            assert _close(phi_s[players[i]], phi_s[players[j]])  # symmetry
            assert all(_close(phi_vs[p], phi_v[p] + phi_s[p]) for p in players)  # linearity


@pytest.mark.acceptance("end-to-end two-sprint pipeline with golden reports")
def test_end_to_end(tmp_path, capsys):
    with Budget(30.0):
        ids = e2e.build_repos(tmp_path / "repos")
        config = e2e.write_config(tmp_path, tmp_path / "repos")
        for when in e2e.SPRINT_TIMES:
            assert main(["assess", "--config", str(config), "--team", "t1", "--time", when]) == 0
        capsys.readouterr()

        ledger = Ledger(tmp_path / "ledger")
        assert ledger.get("t1", 1, "front_end").commit_id == ids["app"]["s1"]
        assert ledger.get("t1", 2, "back_end").commit_id == ids["server"]["s2"]
        s1 = sprint_report(ledger, "t1", 1)
        s2 = sprint_report(ledger, "t1", 2)
        # hand counts: sprint 1 has 7+3 issues on 46+20 lines, sprint 2 has 3+2 on 36+30
        assert (s1.issues, s1.loc, s2.issues, s2.loc) == (10, 66, 5, 66)
        assert s2.delta_q == Fraction(1, 2)
        assert (s1.points, s2.points) == (0, 5)

        for sprint in (1, 2):
            for fmt, ext in (("markdown", "md"), ("json", "json")):
                out = tmp_path / f"s{sprint}.{ext}"
                argv = ["report", "--config", str(config), "--team", "t1", "--sprint", str(sprint), "--format", fmt, "-o", str(out)]
                assert main(argv) == 0
                assert out.read_bytes() == (GOLDEN / f"t1_sprint{sprint}.{ext}").read_bytes()
        assert json.loads((tmp_path / "s2.json").read_text())["points"] == 5


@pytest.mark.acceptance("degenerate cases (empty code, zero baseline, clean code, sprint 1)")
def test_degenerate_cases(tmp_path):
    with Budget(5.0):
        with pytest.raises(EmptyCodebaseError):
            density(4, 0)
        with pytest.raises(EmptyCodebaseError):
            combine([(1, 10), (0, 0)])
        when = parse_time("2025-05-12T12:00:00Z")
        with pytest.raises(ConsistencyError):
            LedgerEntry.build("t1", 1, "back_end", "a" * 40, when, IssueTally({}, 0), 0, 0)

        assert delta_q(0, 0) == 1
        assert reward_sec(delta_q(0, 0), 0) == 10
        assert delta_q(0.0, 0.01) is ZERO_BASELINE
        assert reward_sec(ZERO_BASELINE, 3) == 0

        for dq in (0, 0.5, 1, 1.7, ZERO_BASELINE):
            assert reward_sec(dq, 0) == 10

        ledger = Ledger(tmp_path)
        for sprint, issues in ((1, 0), (2, 0)):
            ledger.record(LedgerEntry.build("t1", sprint, "back_end", "a" * 40, when, IssueTally({"detekt": issues}, issues), 1, 50))
        assert sprint_report(ledger, "t1", 1).points == 0
        assert sprint_report(ledger, "t1", 1).formula_points == 10
        assert sprint_report(ledger, "t1", 2).points == 10
