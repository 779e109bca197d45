"""Select the grid-kernel backend at import time.

The compiled extension is preferred; the NumPy twin is the fallback.
Set ``QUOTEFILTER_BACKEND=python`` or ``=compiled`` to force one (forcing
``compiled`` raises if the extension was not built).
"""

from __future__ import annotations

import os

_requested = os.environ.get("QUOTEFILTER_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _kernels_py as _impl
elif _requested == "compiled":
    from . import _kernels as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as _impl  # type: ignore[no-redef]

name: str = _impl.BACKEND_NAME
cn_diffuse = _impl.cn_diffuse
decay_inplace = _impl.decay_inplace
trade_inplace = _impl.trade_inplace
moments = _impl.moments
filter_step = _impl.filter_step


def available_backends() -> list[str]:
    """Names of the backends importable in this environment."""
    out = ["python"]
    try:
        from . import _kernels  # noqa: F401

        out.insert(0, "compiled")
    except ImportError:
        pass
    return out


def get_backend(backend_name: str):
    """Return the kernel module for ``backend_name`` ('python' or 'compiled')."""
    if backend_name == "python":
        from . import _kernels_py

        return _kernels_py
    if backend_name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {backend_name!r}")
