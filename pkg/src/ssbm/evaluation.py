"""
Comparing a recovered partition against a planted one.
"""

from dataclasses import dataclass

import numpy as np

from .graph import Partition

__all__ = ["ConfusionMatrix", "KRecovery", "confusion", "nmi", "k_recovery"]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts ``table[a, b]`` of nodes in true block ``a`` and found block ``b``."""

    table: np.ndarray

    @property
    def n(self):
        return int(self.table.sum())


@dataclass(frozen=True)
class KRecovery:
    k_true: int
    k_found: int
    nmi: float

    @property
    def exact(self):
        return self.k_true == self.k_found


def _assignment(p):
    if isinstance(p, Partition):
        return p.assignment
    return Partition.from_labels(p).assignment


def confusion(truth, found):
    """Contingency table between two partitions of the same nodes."""
    a, b = _assignment(truth), _assignment(found)
    if a.size != b.size:
        raise ValueError(f"partitions cover {a.size} and {b.size} nodes")
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return ConfusionMatrix(table)


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return -float(np.sum(p * np.log(p)))


def nmi(truth, found):
    """
    Normalized mutual information, ``2 I(A; B) / (H(A) + H(B))``.

    Natural logarithms with ``0 log 0 = 0``.  Partitions equal up to
    relabeling score exactly 1.  When only one side has a single block the
    mutual information is zero and so is the score.
    """
    table = confusion(truth, found).table
    nonzero = table > 0
    if np.all(nonzero.sum(axis=0) == 1) and np.all(nonzero.sum(axis=1) == 1):
        return 1.0
    n = table.sum()
    h_a = _entropy(table.sum(axis=1), n)
    h_b = _entropy(table.sum(axis=0), n)
    if h_a + h_b == 0:
        return 1.0
    nz = table > 0
    joint = table[nz] / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))[nz] / (n * n)
    mi = float(np.sum(joint * np.log(joint / outer)))
    return min(1.0, max(0.0, 2.0 * mi / (h_a + h_b)))


def k_recovery(truth, found):
    """
    Block-count recovery summary.

    :param found: a :class:`Partition`, label array or fit result with a
        ``best_partition`` attribute.
    """
    if hasattr(found, "best_partition"):
        found = found.best_partition
    t, f = Partition.from_labels(_assignment(truth)), Partition.from_labels(
        _assignment(found))
    return KRecovery(t.k, f.k, nmi(t, f))

