"""Select the kernel implementation at import time.

The compiled ``_speedups`` module is preferred.  Setting
``SECBONUS_PURE_PYTHON=1`` forces the pure-Python kernels, which is how the
test-suite and the benchmark exercise both.
"""

from __future__ import annotations

import os

from . import _purepy

if os.environ.get("SECBONUS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _purepy
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _purepy
        BACKEND = "python"

count_code_lines = _impl.count_code_lines
shapley_values = _impl.shapley_values

__all__ = ["BACKEND", "count_code_lines", "shapley_values"]
