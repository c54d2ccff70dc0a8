"""Issue density, improvement ratio and bonus point formulas.

Quantities are computed exactly with :class:`fractions.Fraction` whenever the
inputs are integers or fractions, so the rounding of a bonus never depends
on binary floating point.  Floats are accepted and interpreted by their
shortest decimal representation (``0.15`` means 15/100).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Union

from .errors import DataError, EmptyCodebaseError

MAX_POINTS = 10
DEFAULT_SCHEDULE = (0, 10, 10)
SCHEMES = ("SEC", "CON")

Number = Union[int, float, Fraction]


class _ZeroBaseline:
    """Previous density was zero and the current one is not."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "ZERO_BASELINE"

    def __reduce__(self):
        return "ZERO_BASELINE"


ZERO_BASELINE = _ZeroBaseline()


def _exact(x: Number) -> Fraction:
    if isinstance(x, bool):
        raise TypeError("boolean is not a ratio")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        if x != x or x in (float("inf"), float("-inf")):
            raise DataError(f"non-finite ratio {x!r}")
        return Fraction(repr(x))
    raise TypeError(f"expected a number, got {type(x).__name__}")


def round_half_away(x: Number) -> int:
    """Round to the nearest integer, halves away from zero."""
    q = _exact(x)
    sign = -1 if q < 0 else 1
    return sign * int(abs(q) + Fraction(1, 2))


def density_exact(issues: int, loc: int) -> Fraction:
    if issues < 0 or loc < 0:
        raise DataError("issue and line counts must be non-negative")
    if loc == 0:
        raise EmptyCodebaseError("empty codebase has no density")
    return Fraction(issues, loc)


def density(issues: int, loc: int) -> float:
    """Issues per line of code."""
    density_exact(issues, loc)
    return issues / loc


def delta_q(q_prev: Number, q_curr: Number) -> Fraction | _ZeroBaseline:
    """Ratio of the current density to the previous one.

    ``0 -> 0`` is "no change" (1); ``0 -> positive`` has no ratio and yields
    :data:`ZERO_BASELINE`, which the reward treats like a regression.
    """
    prev, curr = _exact(q_prev), _exact(q_curr)
    if prev < 0 or curr < 0:
        raise DataError("densities must be non-negative")
    if prev == 0:
        return Fraction(1) if curr == 0 else ZERO_BASELINE
    return curr / prev


def reward_sec(dq: Number | _ZeroBaseline, current_issues: int) -> int:
    """Security bonus: round(min[10, 10 (1 - min(dq, 1))]).

    Removing every finding earns the full bonus regardless of ``dq``.
    """
    if current_issues < 0:
        raise DataError("issue count must be non-negative")
    if current_issues == 0:
        return MAX_POINTS
    if dq is ZERO_BASELINE:
        return 0
    ratio = _exact(dq)
    if ratio < 0:
        raise DataError("improvement ratio must be non-negative")
    points = round_half_away(min(Fraction(MAX_POINTS), MAX_POINTS * (1 - min(ratio, Fraction(1)))))
    return min(MAX_POINTS, max(0, points))


def reward_con(issues_frontend: int, issues_backend: int) -> int:
    """Code-quality bonus round(10 (100 - I) / 100), clamped to [0, 10]."""
    if issues_frontend < 0 or issues_backend < 0:
        raise DataError("issue counts must be non-negative")
    total = issues_frontend + issues_backend
    raw = round_half_away(Fraction(MAX_POINTS * (100 - total), 100))
    return min(MAX_POINTS, max(0, raw))


def combine(pairs: Iterable[tuple[int, int]]) -> tuple[int, int]:
    """Sum (issues, loc) across repositories; density of sums, not mean of densities."""
    pairs = list(pairs)
    if not pairs:
        raise DataError("nothing to combine")
    for issues, loc in pairs:
        density_exact(issues, loc)
    return sum(p[0] for p in pairs), sum(p[1] for p in pairs)


def sprint_schedule(sprint_index: int, schedule: tuple[int, ...] | list[int] = DEFAULT_SCHEDULE) -> int:
    """Maximum bonus for a sprint; sprints past the schedule reuse its last value."""
    if sprint_index < 1:
        raise DataError(f"sprint index must be >= 1, got {sprint_index}")
    if not schedule:
        raise DataError("empty bonus schedule")
    return schedule[min(sprint_index, len(schedule)) - 1]


@dataclass(frozen=True)
class DensityRecord:
    team_id: str
    sprint_index: int
    scope: str
    issues: int
    loc: int
    density: float = field(init=False)

    def __post_init__(self) -> None:
        if self.scope not in ("front_end", "back_end", "combined"):
            raise DataError(f"unknown scope {self.scope!r}")
        object.__setattr__(self, "density", density(self.issues, self.loc))

    @property
    def exact(self) -> Fraction:
        return Fraction(self.issues, self.loc)


@dataclass(frozen=True)
class RewardOutcome:
    team_id: str
    sprint_index: int
    scheme: str
    delta_q: Fraction | _ZeroBaseline | None
    points: int
    member_points: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise DataError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.points <= MAX_POINTS:
            raise DataError(f"points out of range: {self.points}")

