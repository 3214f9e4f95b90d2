"""Euclidean projection onto the probability simplex."""

import numpy as np


def project_simplex(v):
    """Project ``v`` onto ``{w : w >= 0, sum(w) = 1}``.

    Sorting-based algorithm, O(n log n)::

        argmin_w ||w - v||^2  s.t.  w >= 0, sum(w) = 1
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.size
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    ind = np.arange(1, n + 1)
    rho = np.count_nonzero(u - cssv / ind > 0)
    theta = cssv[rho - 1] / rho
    w = np.maximum(v - theta, 0.0)
    # the thresholding above can leave the sum off by a few ulps
    return w / w.sum()
