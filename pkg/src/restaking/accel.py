"""Backend selection for the search kernels.

numba is used when it imports and ``RESTAKING_DISABLE_NUMBA`` is unset (or
``0``). Otherwise, or when the integers of a particular instance would not fit
comfortably in int64, the kernels run as ordinary Python over object arrays.
"""

from __future__ import annotations

import logging
import os
from math import lcm

import numpy as np

from . import _kernels

log = logging.getLogger(__name__)

ENV_FLAG = "RESTAKING_DISABLE_NUMBA"
INT64_SAFE = 1 << 62

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _env_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("", "0", "false", "no")


NUMBA_ENABLED = numba is not None and not _env_disabled()

_jitted: dict[str, object] = {}


def _compiled(name: str):
    fn = _jitted.get(name)
    if fn is None:
        fn = numba.njit(cache=True)(getattr(_kernels, name))
        _jitted[name] = fn
    return fn


def resolve(backend: str | None) -> str:
    """Normalise a backend request to ``"numba"`` or ``"python"``."""
    if backend is None:
        return "numba" if NUMBA_ENABLED else "python"
    if backend not in ("numba", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and numba is None:
        raise RuntimeError("numba is not installed")
    return backend


def kernel(name: str, backend: str):
    if backend == "numba":
        return _compiled(name)
    return getattr(_kernels, name)


def common_denominator(values) -> int:
    d = 1
    for q in values:
        d = lcm(d, q.denominator)
    return d


def int_array(values, backend: str) -> np.ndarray:
    if backend == "numba":
        return np.array([int(x) for x in values], dtype=np.int64)
    out = np.empty(len(values), dtype=object)
    for i, x in enumerate(values):
        out[i] = int(x)
    return out


def pick(backend: str | None, magnitude: int) -> str:
    """Fall back to exact Python ints when ``magnitude`` could overflow int64."""
    b = resolve(backend)
    if b == "numba" and magnitude >= INT64_SAFE:
        log.debug("magnitude %d exceeds int64 headroom, using python kernels", magnitude)
        return "python"
    return b
