"""Select the compiled kernels when available, else the pure-Python ones."""
import os

if os.environ.get("BVFIX_FORCE_PYTHON"):
    from bvfix import _fallback as kernels

    BACKEND = "python"
else:
    try:
        from bvfix import _kernels as kernels

        BACKEND = "compiled"
    except ImportError:
        from bvfix import _fallback as kernels

        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
