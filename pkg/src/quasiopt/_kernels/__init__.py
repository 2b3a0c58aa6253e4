"""Hot reduction kernels with a compiled core and a NumPy fallback.

The compiled extension is preferred when importable; setting the environment
variable ``QUASIOPT_PURE_PYTHON=1`` forces the fallback.  Both implementations
share the same contract and are interchangeable per call via ``impl=``.
"""

import os

import numpy as np

from . import _numpy_impl

_impl = _numpy_impl
backend_name = "numpy"

if os.environ.get("QUASIOPT_PURE_PYTHON", "") != "1":
    try:
        from . import _core as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        backend_name = "compiled"


def backends():
    """All importable backends, keyed by name."""
    found = {"numpy": _numpy_impl}
    try:
        from . import _core as compiled
    except ImportError:
        pass
    else:
        found["compiled"] = compiled
    return found


def _checked(values, bounds):
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[None, :]
    bounds = np.ascontiguousarray(bounds, dtype=np.int64)
    if bounds.ndim != 1 or bounds.shape[0] < 2:
        raise ValueError("bounds must be a 1-d array with at least two entries")
    if np.any(np.diff(bounds) < 0):
        raise ValueError("bounds must be nondecreasing")
    if bounds[0] < 0 or bounds[-1] > values.shape[1]:
        raise ValueError("bounds must lie in [0, n_columns]")
    return values, bounds


def segment_sq_sums(values, bounds, impl=None):
    """Row-wise sums of squares over half-open column segments.

    ``out[i, s] = sum(values[i, bounds[s]:bounds[s+1]] ** 2)``.
    """
    values, bounds = _checked(values, bounds)
    return (impl or _impl).segment_sq_sums(values, bounds)


def segment_sq_sums_diff(a, b, bounds, impl=None):
    """Row-wise sums of squared differences over column segments."""
    a, bounds = _checked(a, bounds)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.ndim == 1:
        b = b[None, :]
    if b.shape != a.shape:
        raise ValueError("a and b must have identical shapes")
    return (impl or _impl).segment_sq_sums_diff(a, b, bounds)
