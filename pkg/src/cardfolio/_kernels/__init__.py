"""Kernel backend selection.

The compiled extension is used when available; the pure-Python reference is
the fallback and the parity oracle. Both produce bit-identical results, so
the choice affects speed only. Set CARDFOLIO_BACKEND=python (or =native) to
force one — forcing native when the extension is missing raises, rather
than silently degrading a benchmark to the slow path.
"""

from __future__ import annotations

import logging
import os

from cardfolio._kernels import pyref

logger = logging.getLogger(__name__)

try:
    from cardfolio._kernels import _native
except ImportError:
    _native = None

_requested = os.environ.get("CARDFOLIO_BACKEND", "").strip().lower()
if _requested in ("", "auto"):
    _active = _native if _native is not None else pyref
elif _requested == "native":
    if _native is None:
        raise ImportError(
            "CARDFOLIO_BACKEND=native but the compiled extension is not built; "
            "reinstall the package with a C toolchain available"
        )
    _active = _native
elif _requested in ("python", "pyref"):
    _active = pyref
else:
    raise ValueError(
        f"CARDFOLIO_BACKEND={_requested!r} not recognized (use 'native' or 'python')"
    )

if _active is pyref and _native is None and _requested in ("", "auto"):
    logger.info("compiled kernels unavailable; using pure-Python backend")


def backend_name() -> str:
    """'native' when the compiled kernels are active, else 'python'."""
    return "native" if _active is _native and _native is not None else "python"


def get_backend(name: str | None = None):
    """Module exposing the kernel functions.

    name=None returns the active backend; 'native'/'python' force one
    (used by the parity tests and the backend benchmark).
    """
    if name is None:
        return _active
    if name == "python":
        return pyref
    if name == "native":
        if _native is None:
            raise ImportError("compiled kernel extension is not built")
        return _native
    raise ValueError(f"unknown backend {name!r}")


eval_equal_weight = _active.eval_equal_weight
mc_search = _active.mc_search
enumerate_search = _active.enumerate_search
dirichlet_reopt = _active.dirichlet_reopt
