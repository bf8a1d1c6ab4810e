"""Numba acceleration switch.

Hot numerical kernels (the ODE stepper, the Jacobi eigensolver, model
right-hand sides) are decorated with :func:`njit`. By default they are
JIT-compiled with numba; setting the environment variable ``PRT_NUMBA=0``
(or ``off``/``false``/``no``) before import selects the pure-numpy
fallback path, in which :func:`njit` is an identity decorator. The flag
is read once at import time.

Both paths execute the same source with the same floating-point
operation order (no fastmath), so results agree between backends.
"""

import os


def _detect() -> bool:
    flag = os.environ.get("PRT_NUMBA", "").strip().lower()
    if flag in {"0", "off", "false", "no"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _detect()

if USING_NUMBA:
    from numba import njit
else:

    def njit(*args, **kwargs):
        """Identity stand-in for ``numba.njit`` on the fallback path."""
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def is_jitted(fn) -> bool:
    """True when *fn* is a numba dispatcher (compiled kernel)."""
    return USING_NUMBA and hasattr(fn, "py_func")


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
