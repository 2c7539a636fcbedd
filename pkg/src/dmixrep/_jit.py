"""
Switch between numba-compiled kernels and the pure-numpy fallback.

Set ``DMIXREP_DISABLE_JIT=1`` before import to force the numpy path (useful
for debugging under the interpreter, or on platforms without numba).
"""

import os

_FLAG = "DMIXREP_DISABLE_JIT"


def _env_disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


try:
    if _env_disabled():
        raise ImportError
    from numba import njit as _numba_njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

JIT_ENABLED = HAS_NUMBA


def njit(func=None, **kwargs):
    """``numba.njit`` when the JIT is enabled, identity otherwise."""
    if JIT_ENABLED:
        kwargs.setdefault("cache", True)
        if func is not None:
            return _numba_njit(**kwargs)(func)
        return _numba_njit(**kwargs)
    if func is not None:
        return func

    def wrapper(f):
        return f

    return wrapper


def backend() -> str:
    return "numba" if JIT_ENABLED else "numpy"
