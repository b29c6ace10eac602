"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``RCMOMENTS_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

from . import _fallback

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None


def _python_backend():
    return SimpleNamespace(
        name="python",
        iter_nonflat_labels=_fallback.nonflat_labels,
        nonflat_count=_fallback.nonflat_count,
        count_paths=_fallback.count_paths,
    )


def _cython_backend():
    def iter_labels(n, r):
        for batch in _kernels.NonflatBatches(n, r, 4096):
            yield from map(tuple, batch.tolist())

    return SimpleNamespace(
        name="cython",
        iter_nonflat_labels=iter_labels,
        nonflat_count=_kernels.nonflat_count,
        count_paths=_kernels.count_paths,
    )


def available() -> list[str]:
    return ["cython", "python"] if _kernels is not None else ["python"]


def get(name: str | None = None):
    """Return the kernel namespace ``name`` (default: the active one)."""
    if name is None:
        name = ACTIVE.name
    if name == "cython":
        if _kernels is None:
            raise ImportError("compiled kernels are not built")
        return _cython_backend()
    if name == "python":
        return _python_backend()
    raise ValueError(f"unknown backend {name!r}")


if _kernels is not None and not os.environ.get("RCMOMENTS_PURE_PYTHON"):
    ACTIVE = _cython_backend()
else:
    ACTIVE = _python_backend()

run_key = _fallback.run_key
