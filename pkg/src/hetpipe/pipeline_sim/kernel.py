"""Kernel selection: compiled event loop by default, pure Python on demand.

Set HETPIPE_NUMBA=0 to force the plain-Python path (or when numba is not
installed). Both paths run the same source and produce bit-identical
results; the compiled one is just faster.
"""

import os

from . import _kernel_impl

KERNEL_ENV_VAR = "HETPIPE_NUMBA"

_kernels = {}


def numba_enabled() -> bool:
    if os.environ.get(KERNEL_ENV_VAR, "1") == "0":
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def get_kernel(mode=None):
    """The event-loop callable; mode 'python'/'numba' overrides the env flag."""
    if mode is None:
        mode = "numba" if numba_enabled() else "python"
    if mode not in ("python", "numba"):
        raise ValueError("kernel mode must be 'python' or 'numba'")
    if mode not in _kernels:
        if mode == "python":
            _kernels[mode] = _kernel_impl.simulate_events
        else:
            import numba

            _kernels[mode] = numba.njit(cache=True)(_kernel_impl.simulate_events)
    return _kernels[mode]
