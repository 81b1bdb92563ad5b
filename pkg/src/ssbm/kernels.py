"""
Per-block kernels used by the learner, with backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback is.  The compiled path walks the cached nonzero structure for
either storage, so its cost scales with the number of edges.  Set ``SSBM_KERNELS=python`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _ext
except ImportError:  # extension not built
    _ext = None

__all__ = ["BACKEND", "available_backends", "category_mass", "log_evidence"]


def available_backends():
    return ("cython", "python") if _ext is not None else ("python",)


def _default_backend():
    wanted = os.environ.get("SSBM_KERNELS", "auto").strip().lower()
    if wanted == "python" or _ext is None:
        return "python"
    return "cython"


BACKEND = _default_backend()


def _resolve(backend):
    backend = backend or BACKEND
    if backend == "cython" and _ext is None:
        raise RuntimeError("compiled kernels are not available")
    if backend not in ("cython", "python"):
        raise ValueError(f"unknown kernel backend {backend!r}")
    return backend


def category_mass(graph, weights, backend=None):
    r"""
    Weighted category counts per column.

    Returns an ``n x 3`` array whose row ``j`` holds
    :math:`\sum_{i \ne j} w_i [a_{ij} = h]` for ``h`` in
    (positive, negative, null).
    """
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if _resolve(backend) == "python":
        return _kernels_py.category_mass(graph, w)
    return _ext.csr_category_mass(*graph.csr_arrays(), w)


def log_evidence(graph, log_lambda, backend=None):
    r"""
    Per-node log evidence under one block.

    ``log_lambda`` is the block's ``n x 3`` log-probability table; entry
    ``i`` of the result is :math:`\sum_{j \ne i} \log\lambda_{j, cat(a_{ij})}`.
    """
    loglam = np.ascontiguousarray(log_lambda, dtype=np.float64)
    if _resolve(backend) == "python":
        return _kernels_py.log_evidence(graph, loglam)
    return _ext.csr_log_evidence(*graph.csr_arrays(), loglam)
