"""Selects between the compiled kernel and the pure-Python fallback.

The compiled extension ``hiresim._core`` is used when it imports.  Setting
``HIRESIM_BACKEND=python`` forces the fallback; ``HIRESIM_BACKEND=compiled``
makes a missing extension an error.
"""

from __future__ import annotations

import os

try:
    from hiresim import _core
except ImportError:
    _core = None

_forced: str | None = None


def available() -> bool:
    return _core is not None


def name() -> str:
    return "compiled" if use_compiled() else "python"


def use_compiled() -> bool:
    choice = _forced or os.environ.get("HIRESIM_BACKEND", "auto")
    if choice == "python":
        return False
    if choice == "compiled" and _core is None:
        raise ImportError("HIRESIM_BACKEND=compiled but hiresim._core is not built")
    return _core is not None


def force(choice: str | None) -> None:
    """Override the backend for this process (``"python"``, ``"compiled"`` or None)."""
    global _forced
    if choice not in (None, "python", "compiled", "auto"):
        raise ValueError(f"unknown backend {choice!r}")
    _forced = choice
