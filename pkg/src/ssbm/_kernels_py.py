"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def category_mass(graph, w):
    pos, neg = graph.indicator_matrices()
    w = np.asarray(w, dtype=np.float64)
    out = np.empty((graph.n, 3))
    out[:, 0] = pos.T @ w
    out[:, 1] = neg.T @ w
    out[:, 2] = w.sum() - w - out[:, 0] - out[:, 1]
    np.maximum(out[:, 2], 0.0, out=out[:, 2])
    return out


def log_evidence(graph, loglam):
    pos, neg = graph.indicator_matrices()
    null = loglam[:, 2]
    return (pos @ (loglam[:, 0] - null) + neg @ (loglam[:, 1] - null)
            + (null.sum() - null))
