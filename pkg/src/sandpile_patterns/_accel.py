"""Backend selection for the hot lattice kernels.

Every kernel in :mod:`sandpile_patterns.kernels` exists twice: a numba-compiled
loop and a pure-numpy (or plain Python) fallback.  The default backend is numba
when it imports cleanly, unless ``SANDPILE_PATTERNS_NUMBA=0`` is set in the
environment.  Both paths must return bit-identical results.
"""
from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENV_FLAG = "SANDPILE_PATTERNS_NUMBA"

USE_NUMBA = HAVE_NUMBA and os.environ.get(ENV_FLAG, "1").strip().lower() not in ("0", "false", "no", "off")

BACKENDS = ("numba", "numpy")


def default_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}, expected one of {BACKENDS}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, else identity."""
    kwargs.setdefault("cache", True)

    def wrap(fn):
        if not HAVE_NUMBA:
            return fn
        return numba.njit(**kwargs)(fn)

    if args and callable(args[0]):
        return wrap(args[0])
    return wrap


def set_threads(threads: int) -> int:
    """Clamp and apply a numba thread count; returns the count in effect."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if not HAVE_NUMBA:
        return 1
    threads = min(threads, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(threads)
    return threads
