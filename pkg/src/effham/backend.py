"""Numba/numpy backend selection for the hot kernels.

Every hot loop in :mod:`effham.kernels` exists twice: a scalar-loop version
compiled with ``numba.njit`` and a vectorized pure-numpy twin.  Which one the
solvers use is decided once at import time from the environment variable
``EFFHAM_BACKEND``:

* ``auto`` (default) -- numba if importable, numpy otherwise
* ``numba``          -- require numba, fail loudly if missing
* ``numpy``          -- force the pure-numpy path (useful for debugging and
  for the backend benchmark)
"""

import os

_CHOICE = os.environ.get("EFFHAM_BACKEND", "auto").strip().lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"EFFHAM_BACKEND must be auto|numba|numpy, got {_CHOICE!r}")

if _CHOICE == "numpy":
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if _CHOICE == "numba":
            raise
        NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when the numba backend is active, identity otherwise."""
    if NUMBA_ENABLED:
        from numba import njit as _njit

        return _njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]

    def deco(fn):
        return fn

    return deco


_JIT_CACHE = {}


def jit_scalar(fn, arity=3):
    """Compile a scalar callback for use inside numba kernels.

    Returns the compiled dispatcher, or None if the function cannot be
    compiled (the caller then falls back to the numpy path).
    """
    if not NUMBA_ENABLED:
        return None
    key = (fn, arity)
    if key in _JIT_CACHE:
        return _JIT_CACHE[key]
    from numba import njit as _njit

    try:
        jitted = _njit(cache=False, nogil=True)(fn)
        # force a compile now so failures surface here, not mid-march
        jitted(*([0.0] * arity))
    except Exception:
        jitted = None
    _JIT_CACHE[key] = jitted
    return jitted
