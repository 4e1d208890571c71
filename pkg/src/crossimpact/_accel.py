"""Backend switch for the compiled inner loops.

Set ``CROSSIMPACT_DISABLE_NUMBA=1`` in the environment to force the pure-numpy
path.  The choice can also be flipped at runtime with :func:`set_backend`,
which is what the benchmark and the backend-equivalence tests do.
"""

from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_ENV_FLAG = "CROSSIMPACT_DISABLE_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


_backend = "numpy" if (numba is None or _env_disabled()) else "numba"


def backend() -> str:
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and numba is None:
        raise RuntimeError("numba is not installed")
    _backend = name


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)
