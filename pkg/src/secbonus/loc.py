"""Comment-aware lines-of-code counting for Java, Kotlin and Android manifests.

A line counts when it holds at least one non-whitespace character outside
a comment.  Lexing rules:

* ``//`` starts a line comment, ``/* ... */`` a block comment.  Kotlin block
  comments nest, Java ones do not.
* ``"..."`` and ``'...'`` are one-line literals with backslash escapes; an
  unterminated literal ends at the line break.  Comment markers inside a
  literal are ordinary characters.
* A triple double quote opens a multi-line string (Kotlin raw string
  without escapes, Java text block with escapes).  Each line with
  non-whitespace string content counts.
* In XML only ``<!-- ... -->`` is a comment.
* An unterminated comment or multi-line string runs to the end of the file.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import _backend
from .errors import DataError

log = logging.getLogger(__name__)

LANGUAGES = {"java": 0, "kotlin": 1, "xml": 2}
DEFAULT_IGNORE = (".git", "build", ".gradle")
MANIFEST_NAME = "AndroidManifest.xml"


@dataclass
class LocBreakdown:
    file_count: int = 0
    loc_total: int = 0
    per_file: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {"file_count": self.file_count, "loc_total": self.loc_total}


def count_file(content: str, language: str) -> int:
    """Return the number of code lines in ``content``."""
    try:
        mode = LANGUAGES[language]
    except KeyError:
        raise ValueError(f"unsupported language {language!r}") from None
    return _backend.count_code_lines(content, mode)


def language_for(path: str | os.PathLike, include_manifest: bool = True) -> str | None:
    """Map a file name to its language, or None when it is not counted.

    Matching is exact and case-sensitive; ``.kts`` scripts are not sources.
    """
    name = os.path.basename(path)
    if name.endswith(".java"):
        return "java"
    if name.endswith(".kt"):
        return "kotlin"
    if include_manifest and name == MANIFEST_NAME:
        return "xml"
    return None


def _discover(root: Path, include_manifest: bool, ignore: frozenset[str]):
    found = []
    for dirpath, dirnames, filenames in os.walk(root, onerror=_walk_error(root)):
        dirnames[:] = sorted(d for d in dirnames if d not in ignore)
        for name in filenames:
            lang = language_for(name, include_manifest)
            if lang is not None:
                full = Path(dirpath, name)
                found.append((full.relative_to(root).as_posix(), full, lang))
    found.sort()
    return found


def _walk_error(root: Path):
    def handler(exc: OSError) -> None:
        if Path(exc.filename) == root:
            raise DataError(f"cannot read directory {root}: {exc.strerror}")
        log.warning("skipping unreadable directory %s: %s", exc.filename, exc.strerror)

    return handler


def _count_one(item) -> tuple[str, int, str | None]:
    rel, full, lang = item
    try:
        text = full.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        return rel, 0, f"{rel}: {exc}"
    return rel, count_file(text, lang), None


def count_tree(
    root: str | os.PathLike,
    include_manifest: bool = False,
    ignore: tuple[str, ...] | list[str] = DEFAULT_IGNORE,
    workers: int = 1,
) -> LocBreakdown:
    """Count every ``.java``/``.kt`` file (and manifests if asked) below ``root``.

    Directories whose name is in ``ignore`` are pruned.  A file that cannot
    be read or decoded is counted as 0 and reported in ``warnings``.
    """
    root = Path(root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise DataError(f"cannot read directory {root}")
    items = _discover(root, include_manifest, frozenset(ignore))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_count_one, items))
    else:
        results = [_count_one(item) for item in items]

    out = LocBreakdown()
    for rel, count, warning in results:
        out.per_file[rel] = count
        if warning:
            log.warning("unreadable source counted as 0: %s", warning)
            out.warnings.append(warning)
    out.file_count = len(out.per_file)
    out.loc_total = sum(out.per_file.values())
    return out
