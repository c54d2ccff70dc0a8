from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_shapley
from secbonus.errors import DataError
from secbonus.shapley import (
    Allocation,
    CoalitionGame,
    build_additive_game,
    cross_project_sum,
    equal_award,
    parse_game,
    scale_to_reward,
    shapley,
)

pytestmark = pytest.mark.usefixtures("backend")


def random_game(rng: random.Random, n: int) -> CoalitionGame:
    players = tuple(f"p{i}" for i in range(n))
    values = (0.0,) + tuple(rng.uniform(0, 10) for _ in range((1 << n) - 1))
    return CoalitionGame(players, values)


def close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)


def test_additive_game():
    alloc = shapley(build_additive_game({"a": 3, "b": 1, "c": 0}))
    assert alloc.shares == {"a": 3.0, "b": 1.0, "c": 0.0}
    assert alloc.total == 4.0


def test_two_player_against_orderings():
    game = CoalitionGame(("1", "2"), (0.0, 1.0, 0.0, 2.0))
    # orderings (1,2): 1 gets 1, 2 gets 1; (2,1): 2 gets 0, 1 gets 2
    expected = oracle_shapley(game.players, lambda s: game.value(s))
    assert expected == {"1": 1.5, "2": 0.5}
    assert shapley(game).shares == {"1": 1.5, "2": 0.5}


def test_symmetric_game():
    game = CoalitionGame.from_function("abcd", lambda s: len(s) ** 2)
    alloc = shapley(game)
    assert all(close(v, 16 / 4) for v in alloc.shares.values())


def test_single_player():
    assert shapley(CoalitionGame(("x",), (0.0, 7.0))).shares == {"x": 7.0}


def test_too_many_players():
    with pytest.raises(DataError):
        CoalitionGame.from_function([f"p{i}" for i in range(17)], len)


def test_missing_coalition():
    with pytest.raises(DataError, match="alice,bob"):
        CoalitionGame.from_table(["alice", "bob"], {1: 1.0, 2: 1.0})


@pytest.mark.parametrize(
    "players, values",
    [((), (0.0,)), (("a",), (1.0, 2.0)), (("a",), (0.0,)), (("a", "a"), (0.0,) * 4), (("a",), (0.0, float("nan"))), (("a",), (0.0, -1.0))],
)
def test_invalid_games(players, values):
    with pytest.raises(DataError):
        CoalitionGame(players, values)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32))
def test_matches_permutation_oracle(n, seed):
    game = random_game(random.Random(seed), n)
    alloc = shapley(game)
    expected = oracle_shapley(game.players, game.value)
    assert all(close(alloc.shares[p], expected[p]) for p in game.players)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 2**32))
def test_efficiency(n, seed):
    game = random_game(random.Random(seed), n)
    assert close(sum(shapley(game).shares.values()), game.values[-1])


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 2**32), data=st.data())
def test_null_player_gets_exactly_zero(n, seed, data):
    rng = random.Random(seed)
    null = data.draw(st.integers(0, n - 1))
    base = random_game(rng, n)
    values = [base.values[m & ~(1 << null)] for m in range(1 << n)]
    alloc = shapley(CoalitionGame(base.players, tuple(values)))
    assert alloc.shares[base.players[null]] == 0.0


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 2**32))
def test_symmetry(n, seed):
    rng = random.Random(seed)
    base = random_game(rng, n)

    def swap(m: int) -> int:
        b0, b1 = m & 1, m >> 1 & 1
        return (m & ~3) | (b0 << 1) | b1

    # make players 0 and 1 interchangeable by symmetrizing the value table
    values = [max(base.values[m], base.values[swap(m)]) for m in range(1 << n)]
    values[0] = 0.0
    alloc = shapley(CoalitionGame(base.players, tuple(values)))
    assert close(alloc.shares["p0"], alloc.shares["p1"])


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 7), seed=st.integers(0, 2**32))
def test_linearity(n, seed):
    rng = random.Random(seed)
    v, w = random_game(rng, n), random_game(rng, n)
    vw = CoalitionGame(v.players, tuple(a + b for a, b in zip(v.values, w.values)))
    sv, sw, svw = shapley(v).shares, shapley(w).shares, shapley(vw).shares
    assert all(close(svw[p], sv[p] + sw[p]) for p in v.players)


def test_sixteen_players_additive():
    contributions = {f"m{i:02d}": float(i) for i in range(16)}
    alloc = shapley(build_additive_game(contributions))
    assert all(close(alloc.shares[k], v) for k, v in contributions.items())


def test_equal_award():
    assert equal_award({"a", "b", "c"}, 7) == {"a": 7, "b": 7, "c": 7}
    assert equal_award({"a"}, 10) == {"a": 10}
    with pytest.raises(DataError):
        equal_award(set(), 5)
    with pytest.raises(DataError):
        equal_award({"a"}, 11)


@given(st.sets(st.text(min_size=1, max_size=5), min_size=1, max_size=7), st.integers(0, 10))
def test_equal_award_never_differentiates(members, points):
    assert set(equal_award(members, points).values()) == {points}


def test_build_additive_game():
    game = build_additive_game({"a": 2, "b": 0})
    assert game.value(["a"]) == 2
    assert game.value(["a", "b"]) == 2
    assert game.value([]) == 0
    assert build_additive_game({"a": 1, "b": 1, "c": 1}).values[-1] == 3
    with pytest.raises(DataError):
        build_additive_game({})
    with pytest.raises(DataError):
        build_additive_game({"a": -1})


def test_cross_project_sum():
    out = cross_project_sum([Allocation({"a": 1.0}, 1.0), Allocation({"a": 2.0, "b": 1.0}, 3.0)])
    assert out.shares == {"a": 3.0, "b": 1.0}
    assert out.total == 4.0
    assert cross_project_sum([]) == Allocation({}, 0.0)
    single = Allocation({"x": 2.5}, 2.5)
    assert cross_project_sum([single]) == single


def test_scale_to_reward():
    alloc = scale_to_reward(shapley(build_additive_game({"a": 3, "b": 1})), 8)
    assert alloc.shares == {"a": 6.0, "b": 2.0}
    with pytest.raises(DataError):
        scale_to_reward(Allocation({"a": 0.0}, 0.0), 5)


def test_parse_game_formats():
    text = """
    # two ways of naming coalitions
    players alice bob
    {alice}      1
    0b10         0
    {alice, bob} 2   # grand coalition
    """
    game = parse_game(text)
    assert game.players == ("alice", "bob")
    assert game.values == (0.0, 1.0, 0.0, 2.0)
    assert shapley(game).shares == {"alice": 1.5, "bob": 0.5}
    assert parse_game("players a\n0x1 4\n").values == (0.0, 4.0)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "{a} 1",
        "players a b\n{a} 1\n",
        "players a\n{z} 1\n",
        "players a\n{a} 1\n1 2\n",
        "players a\n4 1\n",
        "players a\n{a} x\n",
        "players a\n{a 1\n",
        "players a\nzz 1\n",
        "players a\n{} 1\n{a} 2\n",
    ],
)
def test_parse_game_errors(text):
    with pytest.raises(DataError):
        parse_game(text)
