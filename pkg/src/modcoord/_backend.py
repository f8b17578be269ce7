"""Select the closed-loop stepping backend at import time.

The compiled kernel is used when it imports; setting ``MODCOORD_PURE_PYTHON``
to a non-empty value forces the pure-Python loop.
"""

import os

from . import _loop

try:
    if os.environ.get("MODCOORD_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from . import _kernel
except ImportError:
    _kernel = None

BACKEND = "compiled" if _kernel is not None else "python"


def run_steps(problem, scenario, backend=None):
    """Dispatch to ``backend`` (``"compiled"``, ``"python"`` or the import-time default)."""
    backend = BACKEND if backend is None else backend
    if backend == "compiled":
        if _kernel is None:
            raise RuntimeError("compiled kernel is not available")
        return _kernel.run_steps(problem)
    if backend == "python":
        return _loop.run_steps(problem, scenario)
    raise ValueError(f"unknown backend {backend!r}")
