"""Numba dispatch.

Hot kernels are compiled with ``numba.njit`` unless the environment sets
``QPD_SIM_DISABLE_NUMBA=1`` (or numba is not importable), in which case the
pure-numpy implementations in :mod:`qpd_sim.kernels` are used instead.
"""

import os

_FLAG = "QPD_SIM_DISABLE_NUMBA"


def _env_disabled():
    return os.environ.get(_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _env_disabled()


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator.

    The returned function is compiled lazily even when the env flag disables
    numba dispatch, so both paths stay importable for benchmarking.
    """
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
