"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Both implementations are checked for identical results before timing.
"""

from __future__ import annotations

import argparse
import random
import sys
import timeit

from secbonus import _purepy

try:
    from secbonus import _speedups
except ImportError:
    _speedups = None

SNIPPETS = [
    "val x = compute(a, b) // trailing\n",
    "/* block\n * comment\n */\n",
    '    println("text with // and /* inside")\n',
    "\n",
    "fun f() {\n    return 1\n}\n",
    '"""raw\n  string // kept\n"""\n',
    "    // only a comment\n",
    "/* outer /* inner */ still outer */ code()\n",
]


def make_source(lines: int, seed: int = 1) -> str:
    rng = random.Random(seed)
    parts, count = [], 0
    while count < lines:
        s = rng.choice(SNIPPETS)
        parts.append(s)
        count += s.count("\n")
    return "".join(parts)


def make_values(n: int, seed: int = 2) -> list[float]:
    rng = random.Random(seed)
    return [0.0] + [rng.uniform(0, 10) for _ in range((1 << n) - 1)]


def best(stmt, repeat: int) -> float:
    number = 1
    while timeit.timeit(stmt, number=number) < 0.2:
        number *= 2
    return min(timeit.repeat(stmt, number=number, repeat=repeat)) / number


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _speedups is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    rows = []
    for lines in (1_000, 20_000):
        text = make_source(lines)
        for mode, name in ((_purepy.JAVA, "java"), (_purepy.KOTLIN, "kotlin")):
            assert _speedups.count_code_lines(text, mode) == _purepy.count_code_lines(text, mode)
            py = best(lambda: _purepy.count_code_lines(text, mode), args.repeat)
            cy = best(lambda: _speedups.count_code_lines(text, mode), args.repeat)
            rows.append((f"loc {name} {lines} lines", py, cy))
    for n in (8, 12, 16):
        values = make_values(n)
        assert _speedups.shapley_values(values, n) == _purepy.shapley_values(values, n)
        py = best(lambda: _purepy.shapley_values(values, n), args.repeat)
        cy = best(lambda: _speedups.shapley_values(values, n), args.repeat)
        rows.append((f"shapley n={n}", py, cy))

    print(f"{'kernel':<26}{'python':>12}{'cython':>12}{'speedup':>10}")
    for name, py, cy in rows:
        print(f"{name:<26}{py * 1e3:>10.3f}ms{cy * 1e3:>10.3f}ms{py / cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
