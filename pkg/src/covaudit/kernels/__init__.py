"""Rank/concordance kernels with a compiled fast path.

The compiled extension (_speedups, built from Cython) is preferred when it
imported; otherwise the pure-Python twin (_purepy) is used. Both expose
``midrank`` and ``kendall_tau_b`` with identical semantics, verified
against each other and against quadratic oracles in the test suite.

Set ``COVAUDIT_KERNELS=python`` to force the fallback, ``=c`` to require
the extension (ImportError if it is not built). ``ACTIVE_BACKEND`` names
the selection.
"""
from __future__ import annotations

import os
from array import array
from typing import Callable, Sequence

from . import _purepy

__all__ = ["midrank", "kendall_tau_b", "ACTIVE_BACKEND", "backends"]

try:
    from . import _speedups
except ImportError:
    _speedups = None

_requested = os.environ.get("COVAUDIT_KERNELS", "").strip().lower()
if _requested == "python":
    _impl = None
elif _requested == "c":
    if _speedups is None:
        raise ImportError(
            "COVAUDIT_KERNELS=c but covaudit.kernels._speedups is not built; "
            "run 'python setup.py build_ext --inplace'"
        )
    _impl = _speedups
elif _requested:
    raise ValueError(f"COVAUDIT_KERNELS must be 'python' or 'c', not {_requested!r}")
else:
    _impl = _speedups

ACTIVE_BACKEND = "c" if _impl is not None else "python"


def _wrap(compiled) -> tuple[Callable, Callable]:
    """Adapt the compiled backend's buffer-typed signatures to sequences."""

    def midrank(values: Sequence[float]) -> list[float]:
        return compiled.midrank(array("d", values))

    def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
        return compiled.kendall_tau_b(array("d", x), array("d", y))

    return midrank, kendall_tau_b


if _impl is not None:
    midrank, kendall_tau_b = _wrap(_impl)
else:
    midrank, kendall_tau_b = _purepy.midrank, _purepy.kendall_tau_b


def backends() -> dict[str, dict[str, Callable]]:
    """All importable backends, uniform sequence-in signatures (for tests
    and benchmarks)."""
    table = {
        "python": {
            "midrank": _purepy.midrank,
            "kendall_tau_b": _purepy.kendall_tau_b,
        }
    }
    if _speedups is not None:
        c_midrank, c_tau = _wrap(_speedups)
        table["c"] = {"midrank": c_midrank, "kendall_tau_b": c_tau}
    return table
