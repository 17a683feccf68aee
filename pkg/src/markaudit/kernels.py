"""Kernel selection: compiled extension when available, pure Python otherwise.

Both expose the same ``simulate_trials`` and produce bit-identical results;
``benchmarks/bench_kernels.py`` measures the gap.  Set MARKAUDIT_FORCE_PY=1
to ignore the extension.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("MARKAUDIT_FORCE_PY") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

simulate_trials = _impl.simulate_trials
ACTIVE = "cython" if _impl.__name__.endswith("._kernels") else "python"
