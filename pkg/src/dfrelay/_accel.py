"""Optional numba acceleration.

Set ``DFRELAY_DISABLE_NUMBA=1`` to force the pure-numpy kernels (also the
automatic fallback when numba is not importable).
"""

import os

_DISABLED = os.environ.get("DFRELAY_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba  # noqa: F401
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(func):
            return func

        return wrapper


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
