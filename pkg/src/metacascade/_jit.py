"""Optional numba acceleration.

Hot kernels are written in the numba-compatible subset of Python and
decorated with :func:`njit`.  Set ``METACASCADE_DISABLE_NUMBA=1`` (or run
without numba installed) to execute the same kernels as plain Python on
numpy arrays.  Both paths consume identical pre-drawn random numbers, so
they produce the same results up to floating-point rounding.
"""

import os

_DISABLED = os.environ.get("METACASCADE_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

NUMBA_ENABLED = _numba is not None


def njit(func=None, **kwargs):
    if _numba is None:
        if func is None:
            return lambda f: f
        return func
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if func is None:
        return _numba.njit(**kwargs)
    return _numba.njit(**kwargs)(func)


def python_impl(kernel):
    """Return the uncompiled Python function behind a (possibly) jitted kernel."""
    return getattr(kernel, "py_func", kernel)
