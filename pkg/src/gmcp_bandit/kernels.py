"""Backend selection for the coordinate-descent kernel.

The compiled extension is used when it imports; otherwise the pure-Python
twin is used. Set ``GMCP_BANDIT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _cd_py

if os.environ.get("GMCP_BANDIT_PURE_PYTHON", "") not in ("", "0"):
    cd_quadratic = _cd_py.cd_quadratic
    BACKEND = "python"
else:
    try:
        from ._cd import cd_quadratic
        BACKEND = "cython"
    except ImportError:  # extension not built
        cd_quadratic = _cd_py.cd_quadratic
        BACKEND = "python"

__all__ = ["cd_quadratic", "BACKEND"]
