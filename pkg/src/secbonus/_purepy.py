"""Pure-Python kernels, used when the compiled extension is unavailable.

Both kernels must agree bit-for-bit with ``_speedups.pyx``; the Shapley
loop therefore visits coalitions and players in the same order.
"""

from __future__ import annotations

import math
import re

JAVA, KOTLIN, XML = 0, 1, 2

_CODE_TOKEN = re.compile(r'//|/\*|"""|"|\'')
_LINE_COMMENT = re.compile(r"[^\n]*")
_JAVA_BLOCK = re.compile(r"/\*.*?(?:\*/|\Z)", re.S)
_NEST_TOKEN = re.compile(r"\*/|/\*")
_DQUOTE = re.compile(r'"(?:[^"\\\n]|\\[^\n]?)*"?')
_SQUOTE = re.compile(r"'(?:[^'\\\n]|\\[^\n]?)*'?")
_RAW = re.compile(r'""".*?(?:"""|\Z)', re.S)
_TEXT_BLOCK = re.compile(r'"""(?:[^"\\]|\\(?:.|\Z)|"(?!""))*(?:"""|\Z)', re.S)
_XML_COMMENT = re.compile(r"<!--.*?(?:-->|\Z)", re.S)


class _Marker:
    """Tracks which physical lines received a non-whitespace code character."""

    __slots__ = ("text", "pos", "line", "marked")

    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.line = 0
        self.marked: set[int] = set()

    def skip(self, end: int) -> None:
        self.line += self.text.count("\n", self.pos, end)
        self.pos = end

    def code(self, end: int) -> None:
        chunk = self.text[self.pos : end]
        if "\n" not in chunk:
            if chunk and not chunk.isspace():
                self.marked.add(self.line)
        else:
            for offset, piece in enumerate(chunk.split("\n")):
                if piece and not piece.isspace():
                    self.marked.add(self.line + offset)
            self.line += chunk.count("\n")
        self.pos = end


def _kotlin_block_end(text: str, start: int) -> int:
    depth = 1
    pos = start + 2
    while True:
        m = _NEST_TOKEN.search(text, pos)
        if m is None:
            return len(text)
        pos = m.end()
        if m.group() == "*/":
            depth -= 1
            if depth == 0:
                return pos
        else:
            depth += 1


def count_code_lines(text: str, mode: int) -> int:
    marker = _Marker(text)
    if mode == XML:
        for m in _XML_COMMENT.finditer(text):
            marker.code(m.start())
            marker.skip(m.end())
        marker.code(len(text))
        return len(marker.marked)

    nesting = mode == KOTLIN
    triple = _RAW if nesting else _TEXT_BLOCK
    n = len(text)
    while marker.pos < n:
        m = _CODE_TOKEN.search(text, marker.pos)
        if m is None:
            marker.code(n)
            break
        marker.code(m.start())
        tok = m.group()
        if tok == "//":
            marker.skip(_LINE_COMMENT.match(text, m.end()).end())
        elif tok == "/*":
            if nesting:
                marker.skip(_kotlin_block_end(text, m.start()))
            else:
                marker.skip(_JAVA_BLOCK.match(text, m.start()).end())
        elif tok == '"""':
            marker.code(triple.match(text, m.start()).end())
        elif tok == '"':
            marker.code(_DQUOTE.match(text, m.start()).end())
        else:
            marker.code(_SQUOTE.match(text, m.start()).end())
    return len(marker.marked)


def shapley_values(values: list[float], n: int) -> list[float]:
    # the grand coalition (|S| = n) has no missing player, its weight is unused
    weights = [
        math.factorial(s) * math.factorial(n - 1 - s) / math.factorial(n)
        for s in range(n)
    ] + [0.0]
    phi = [0.0] * n
    for mask in range(1 << n):
        w = weights[mask.bit_count()]
        base = values[mask]
        for i in range(n):
            bit = 1 << i
            if not mask & bit:
                phi[i] += w * (values[mask | bit] - base)
    return phi
