"""Backend selection for the propagator program executor.

The compiled extension is preferred; set ``TRICAVITY_PURE_PYTHON=1`` to force
the numpy fallback (useful for benchmarking and for debugging).
"""

import os

from . import _kernels_py

BACKEND = "python"
run_program = _kernels_py.run_program

if os.environ.get("TRICAVITY_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "compiled"
        run_program = _compiled.run_program


def get_backend(name=None):
    """Return ``(name, run_program)`` for ``name`` in {None, 'compiled', 'python'}."""
    if name is None:
        return BACKEND, run_program
    if name == "python":
        return "python", _kernels_py.run_program
    if name == "compiled":
        from . import _kernels as compiled  # raises ImportError when unavailable

        return "compiled", compiled.run_program
    raise ValueError(f"unknown kernel backend {name!r}")


def compiled_available():
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True
