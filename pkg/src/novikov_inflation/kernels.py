"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting
``NOVIKOV_INFLATION_PURE=1`` forces the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("NOVIKOV_INFLATION_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def smooth_cutoff(xi, r1, r2):
    """Smooth radial step: 1 for |xi| <= r1, 0 for |xi| >= r2."""
    import numpy as np

    xi = np.ascontiguousarray(xi, dtype=np.float64)
    shape = xi.shape
    return _impl.smooth_cutoff(xi.ravel(), float(r1), float(r2)).reshape(shape)


def gauss_interp(grid_vals, theta, tau, msp):
    import numpy as np

    return _impl.gauss_interp(
        np.ascontiguousarray(grid_vals, dtype=np.float64),
        np.ascontiguousarray(theta, dtype=np.float64),
        float(tau),
        int(msp),
    )
