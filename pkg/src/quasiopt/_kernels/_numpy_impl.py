"""Pure-NumPy reference implementation of the reduction kernels.

Segment sums are computed per segment (not via a running cumulative sum) so
that small segments keep full relative precision next to large neighbours.
"""

import numpy as np


def segment_sq_sums(values, bounds):
    out = np.empty((values.shape[0], bounds.shape[0] - 1), dtype=np.float64)
    for s in range(bounds.shape[0] - 1):
        seg = values[:, bounds[s] : bounds[s + 1]]
        np.einsum("ij,ij->i", seg, seg, out=out[:, s])
    return out


def segment_sq_sums_diff(a, b, bounds):
    out = np.empty((a.shape[0], bounds.shape[0] - 1), dtype=np.float64)
    for s in range(bounds.shape[0] - 1):
        d = a[:, bounds[s] : bounds[s + 1]] - b[:, bounds[s] : bounds[s + 1]]
        np.einsum("ij,ij->i", d, d, out=out[:, s])
    return out
