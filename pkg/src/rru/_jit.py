"""Backend switch for the hot simulation loops.

Set ``RRU_BACKEND=numpy`` to force the vectorised pure-numpy path even when
numba is installed. Any other value (or unset) uses numba when importable.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend(requested=None):
    """Resolve the backend name: ``"numba"`` or ``"numpy"``."""
    name = requested or os.environ.get("RRU_BACKEND", "").strip().lower() or "numba"
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}; expected 'numba' or 'numpy'")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


def worker_count():
    """Worker threads for replicate batches (``RRU_WORKERS``, default 1)."""
    raw = os.environ.get("RRU_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
