"""Select the compiled kernels when built, else the pure-Python fallback.

Set ``CSSLAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

BACKEND = "python"
if not os.environ.get("CSSLAB_PURE_PYTHON"):
    try:
        from ._kernels_ext import volterra_march  # noqa: F401

        BACKEND = "cython"
    except ImportError:
        pass
if BACKEND == "python":
    from ._kernels_py import volterra_march  # noqa: F401
