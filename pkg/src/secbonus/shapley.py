"""Reward allocation to team members.

Two policies exist.  ``equal_award`` hands every member the full team bonus
and is what the pipeline uses.  ``shapley`` splits a value among contributors
by exact enumeration of all coalitions; it is the unique split that pays
nothing to non-contributors, treats interchangeable members alike, adds up
across projects and distributes the whole value.

Coalitions are bitmasks over the ordered player tuple: bit ``i`` set means
``players[i]`` is in the coalition.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from . import _backend
from .errors import DataError
from .metrics import MAX_POINTS

MAX_PLAYERS = 16


@dataclass(frozen=True)
class CoalitionGame:
    players: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.players)
        if n == 0:
            raise DataError("a game needs at least one player")
        if n > MAX_PLAYERS:
            raise DataError(f"{n} players exceed the exact-enumeration limit of {MAX_PLAYERS}")
        if len(set(self.players)) != n:
            raise DataError("duplicate player names")
        if len(self.values) != 1 << n:
            raise DataError(f"expected {1 << n} coalition values, got {len(self.values)}")
        if self.values[0] != 0:
            raise DataError("the empty coalition must have value 0")
        for v in self.values:
            if not math.isfinite(v) or v < 0:
                raise DataError("coalition values must be finite and non-negative")

    @property
    def n(self) -> int:
        return len(self.players)

    def mask(self, members: Iterable[str]) -> int:
        index = {p: i for i, p in enumerate(self.players)}
        m = 0
        for name in members:
            try:
                m |= 1 << index[name]
            except KeyError:
                raise DataError(f"unknown player {name!r}") from None
        return m

    def value(self, coalition: int | Iterable[str]) -> float:
        if not isinstance(coalition, int):
            coalition = self.mask(coalition)
        return self.values[coalition]

    def members(self, mask: int) -> tuple[str, ...]:
        return tuple(p for i, p in enumerate(self.players) if mask >> i & 1)

    @classmethod
    def from_table(cls, players: Sequence[str], table: Mapping[int, float]) -> "CoalitionGame":
        """Build from an explicit ``mask -> value`` table; the empty set defaults to 0."""
        n = len(players)
        if n > MAX_PLAYERS:
            raise DataError(f"{n} players exceed the exact-enumeration limit of {MAX_PLAYERS}")
        values = []
        for mask in range(1 << n):
            if mask in table:
                values.append(float(table[mask]))
            elif mask == 0:
                values.append(0.0)
            else:
                names = ",".join(p for i, p in enumerate(players) if mask >> i & 1)
                raise DataError(f"no value for coalition {{{names}}} (mask {mask})")
        extra = [m for m in table if not 0 <= m < 1 << n]
        if extra:
            raise DataError(f"coalition masks out of range: {sorted(extra)}")
        return cls(tuple(players), tuple(values))

    @classmethod
    def from_function(cls, players: Sequence[str], fn: Callable[[frozenset], float]) -> "CoalitionGame":
        players = tuple(players)
        if len(players) > MAX_PLAYERS:
            raise DataError(f"{len(players)} players exceed the exact-enumeration limit of {MAX_PLAYERS}")
        values = tuple(
            float(fn(frozenset(p for i, p in enumerate(players) if mask >> i & 1)))
            for mask in range(1 << len(players))
        )
        return cls(players, values)


@dataclass(frozen=True)
class Allocation:
    shares: dict[str, float]
    total: float


def shapley(game: CoalitionGame) -> Allocation:
    phi = _backend.shapley_values(list(game.values), game.n)
    return Allocation(dict(zip(game.players, phi)), game.values[-1])


def build_additive_game(contributions: Mapping[str, float]) -> CoalitionGame:
    """value(S) is the sum of the members' individual contributions."""
    if not contributions:
        raise DataError("no contributions")
    for name, c in contributions.items():
        if c < 0:
            raise DataError(f"negative contribution for {name!r}")
    players = tuple(contributions)
    weights = [float(contributions[p]) for p in players]
    values = [0.0] * (1 << len(players))
    for mask in range(1, len(values)):
        low = mask & -mask
        values[mask] = values[mask ^ low] + weights[low.bit_length() - 1]
    return CoalitionGame(players, tuple(values))


def equal_award(members: Iterable[str], points: int) -> dict[str, int]:
    """Every member receives the full team bonus."""
    members = sorted(set(members))
    if not members:
        raise DataError("no team members to award")
    if not 0 <= points <= MAX_POINTS:
        raise DataError(f"points must be within 0..{MAX_POINTS}, got {points}")
    return {m: points for m in members}


def scale_to_reward(allocation: Allocation, points: float) -> Allocation:
    """Rescale shares so they add up to ``points`` instead of the game value."""
    if allocation.total == 0:
        raise DataError("grand coalition has value 0; nothing to share")
    factor = points / allocation.total
    return Allocation({k: v * factor for k, v in allocation.shares.items()}, float(points))


def cross_project_sum(allocations: Iterable[Allocation]) -> Allocation:
    shares: dict[str, float] = {}
    total = 0.0
    for alloc in allocations:
        total += alloc.total
        for member, share in alloc.shares.items():
            shares[member] = shares.get(member, 0.0) + share
    return Allocation(shares, total)


_MASK = re.compile(r"^(0[bB][01]+|0[xX][0-9a-fA-F]+|\d+)$")


def parse_game(text: str) -> CoalitionGame:
    """Read the game file format.

    ::

        # comment
        players alice bob
        {}          0
        {alice}     3
        0b10        1
        {alice,bob} 4

    A coalition is a brace-enclosed member list or an integer bitmask
    (decimal, ``0b`` or ``0x``), followed by its value.  Every non-empty
    coalition must appear exactly once.
    """
    players: tuple[str, ...] | None = None
    table: dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if players is None:
            head, *rest = line.split()
            if head != "players" or not rest:
                raise DataError(f"line {lineno}: expected 'players <name>...'")
            players = tuple(rest)
            index = {p: i for i, p in enumerate(players)}
            if len(index) != len(players):
                raise DataError(f"line {lineno}: duplicate player names")
            if len(players) > MAX_PLAYERS:
                raise DataError(f"{len(players)} players exceed the exact-enumeration limit of {MAX_PLAYERS}")
            continue
        if line.startswith("{"):
            close = line.find("}")
            if close < 0:
                raise DataError(f"line {lineno}: unterminated member list")
            names = [s.strip() for s in line[1:close].split(",") if s.strip()]
            mask = 0
            for name in names:
                if name not in index:
                    raise DataError(f"line {lineno}: unknown player {name!r}")
                mask |= 1 << index[name]
            rest = line[close + 1 :].split()
        else:
            first, *rest = line.split()
            if not _MASK.match(first):
                raise DataError(f"line {lineno}: bad coalition {first!r}")
            mask = int(first, 0) if not first.isdigit() else int(first)
            if mask >= 1 << len(players):
                raise DataError(f"line {lineno}: mask {first} out of range")
        if len(rest) != 1:
            raise DataError(f"line {lineno}: expected exactly one value")
        try:
            value = float(rest[0])
        except ValueError:
            raise DataError(f"line {lineno}: bad value {rest[0]!r}") from None
        if mask in table:
            raise DataError(f"line {lineno}: coalition listed twice")
        table[mask] = value
    if players is None:
        raise DataError("game file has no players line")
    return CoalitionGame.from_table(players, table)
