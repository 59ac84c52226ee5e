"""Kernel backend selection.

Two interchangeable kernel modules exist: a numba-compiled one (fast) and a
pure-numpy one (reference / fallback). They share signatures and produce
bit-identical results; all randomness is drawn by callers, never in kernels.

Selection: the CONFINEMENT_BACKEND environment variable ("numba" or "numpy")
wins; unset, numba is used when importable, else numpy. `set_backend` lets
programs override at runtime.
"""
from __future__ import annotations

import os

_VALID = ("numba", "numpy")
_modules: dict = {}
_active_name: str | None = None


def _load(name: str):
    if name not in _modules:
        if name == "numba":
            from . import kernels_numba as K
        else:
            from . import kernels_numpy as K
        _modules[name] = K
    return _modules[name]


def active_backend_name() -> str:
    global _active_name
    if _active_name is None:
        env = os.environ.get("CONFINEMENT_BACKEND", "").strip().lower()
        if env:
            if env not in _VALID:
                raise ValueError(
                    f"CONFINEMENT_BACKEND must be one of {_VALID}, got {env!r}")
            _active_name = env
        else:
            try:
                import numba  # noqa: F401
                _active_name = "numba"
            except ImportError:
                _active_name = "numpy"
    return _active_name


def set_backend(name: str) -> None:
    global _active_name
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    _active_name = name


def get_kernels():
    """The active kernel module."""
    return _load(active_backend_name())


def get_kernels_for(name: str):
    """A specific kernel module (used by equivalence tests/benchmarks)."""
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    return _load(name)
