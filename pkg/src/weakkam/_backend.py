"""Selects the compiled kernels when the extension is importable.

Set ``WEAKKAM_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _fallback

BACKEND = "python"
minplus_apply = _fallback.minplus_apply
minplus_argmin = _fallback.minplus_argmin
karp_table = _fallback.karp_table

if not os.environ.get("WEAKKAM_PURE_PYTHON"):
    try:
        from . import _core
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        minplus_apply = _core.minplus_apply
        minplus_argmin = _core.minplus_argmin
        karp_table = _core.karp_table
