"""Kernel backend selection.

Prefers the compiled extension, falls back to the numpy implementation.
``FLUIDHOPF_BACKEND=python|cython`` forces a choice (cython raises if the
extension is missing), and ``FLUIDHOPF_THREADS`` caps worker threads for the
embarrassingly parallel Monte Carlo replica loop.
"""

from __future__ import annotations

import os

from . import _kernels_py

_forced = os.environ.get("FLUIDHOPF_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _kernels_py
elif _forced == "cython":
    from . import _kernels_cy as _impl  # noqa: F401  (raises if not built)
else:
    try:
        from . import _kernels_cy as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND_NAME


def get_backend(name: str | None = None):
    """Return a kernel module: the active one, or a named one for benchmarks."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels_cy
        return _kernels_cy
    raise ValueError(f"unknown backend {name!r}")


def prepare_pack(pack, impl=None):
    """Convert a FamilyPack into the active backend's native view."""
    impl = impl or _impl
    if hasattr(impl, "make_pack_view"):
        return impl.make_pack_view(pack)
    return pack


def thread_count() -> int:
    raw = os.environ.get("FLUIDHOPF_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
