"""
Signed adjacency storage, hard partitions, and the text edge-list format.

Edge-list files are UTF-8 text with one ``src dst sign`` triple per line,
separated by whitespace, where ``sign`` is literally ``1`` or ``-1``.  Lines
starting with ``#`` are comments.  Two comment forms are also read as
directives so that files written here round-trip exactly::

    # directed: false
    # nodes: a b c

``# nodes:`` lines (there may be several) register node IDs in index order
before any edge is read, which preserves node order and isolated nodes.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConflictingSign, EmptyInput, MalformedLine

__all__ = [
    "DENSE_LIMIT",
    "SignedGraph",
    "Partition",
    "load_edge_list",
    "write_edge_list",
    "load_partition",
    "write_partition",
]

logger = logging.getLogger(__name__)

#: Graphs with at most this many nodes are stored as a dense int8 matrix.
DENSE_LIMIT = 4096

_NODES_PER_HEADER_LINE = 64


class SignedGraph:
    r"""
    An immutable signed network on ``n`` nodes.

    The adjacency has entries in :math:`\{+1, -1, 0\}` with a zero diagonal;
    entry ``(i, j)`` is the edge category from ``i`` to ``j``.  Storage is a
    dense ``int8`` array up to :data:`DENSE_LIMIT` nodes and a CSR matrix
    above that.  Both are exposed through the same methods.

    :param adjacency:
        Square array-like or scipy sparse matrix.

    :param node_labels: [optional]
        External node IDs; defaults to ``"0" .. "n-1"``.

    :param directed: [optional]
        Whether the source data was directed.  Undirected graphs must be
        symmetric.
    """

    def __init__(self, adjacency, node_labels=None, directed=False,
                 dense_limit=DENSE_LIMIT):
        if sp.issparse(adjacency):
            mat = sp.csr_matrix(adjacency, dtype=np.int8)
            mat.eliminate_zeros()
            mat.sum_duplicates()
            values = mat.data
            n = mat.shape[0]
            if mat.shape != (n, n):
                raise ValueError(f"adjacency must be square, got {mat.shape}")
            if np.any(mat.diagonal() != 0):
                raise ValueError("adjacency diagonal must be zero")
        else:
            raw = np.asarray(adjacency)
            if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
                raise ValueError(f"adjacency must be square, got {raw.shape}")
            if not np.all(np.isin(raw, (-1, 0, 1))):
                raise ValueError("adjacency entries must be in {+1, -1, 0}")
            mat = raw.astype(np.int8)
            n = mat.shape[0]
            values = mat
            if np.any(np.diagonal(mat) != 0):
                raise ValueError("adjacency diagonal must be zero")
        if n < 1:
            raise ValueError("a graph needs at least one node")
        if not np.all(np.isin(values, (-1, 0, 1))):
            raise ValueError("adjacency entries must be in {+1, -1, 0}")

        if n > dense_limit and not sp.issparse(mat):
            mat = sp.csr_matrix(mat)
        elif n <= dense_limit and sp.issparse(mat):
            mat = mat.toarray()

        if not directed and not _is_symmetric(mat):
            raise ValueError("undirected graph requires a symmetric adjacency")

        if sp.issparse(mat):
            mat.sort_indices()
            for arr in (mat.data, mat.indices, mat.indptr):
                arr.flags.writeable = False
        else:
            mat = np.ascontiguousarray(mat)
            mat.flags.writeable = False

        if node_labels is None:
            node_labels = tuple(str(i) for i in range(n))
        else:
            node_labels = tuple(str(label) for label in node_labels)
            if len(node_labels) != n:
                raise ValueError(
                    f"expected {n} node labels, got {len(node_labels)}")
            if len(set(node_labels)) != n:
                raise ValueError("node labels must be unique")

        self._adj = mat
        self.n = n
        self.node_labels = node_labels
        self.directed = bool(directed)
        self._indicators = None
        self._csr = None

    @classmethod
    def from_edges(cls, n, rows, cols, signs, node_labels=None,
                   directed=False, dense_limit=DENSE_LIMIT):
        """
        Build a graph from parallel arrays of edge endpoints and signs.

        Self-loops are dropped.  Undirected edges are mirrored.  Repeated
        pairs must agree in sign.

        :raises ConflictingSign:
            If a pair is listed with opposite signs.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        signs = np.asarray(signs, dtype=np.int8)
        keep = rows != cols
        rows, cols, signs = rows[keep], cols[keep], signs[keep]
        if not directed:
            rows, cols = np.concatenate([rows, cols]), np.concatenate([cols, rows])
            signs = np.concatenate([signs, signs])

        if rows.size:
            key = rows * n + cols
            order = np.argsort(key, kind="stable")
            key, signs_sorted = key[order], signs[order]
            same = key[1:] == key[:-1]
            clash = same & (signs_sorted[1:] != signs_sorted[:-1])
            if np.any(clash):
                at = key[1:][clash][0]
                i, j = divmod(int(at), n)
                raise ConflictingSign(
                    f"pair ({i}, {j}) listed with both signs")
            first = np.concatenate([[True], ~same])
            key, signs = key[first], signs_sorted[first]
            rows, cols = np.divmod(key, n)

        mat = sp.csr_matrix((signs, (rows, cols)), shape=(n, n), dtype=np.int8)
        return cls(mat, node_labels=node_labels, directed=directed,
                   dense_limit=dense_limit)

    @property
    def is_sparse(self):
        return sp.issparse(self._adj)

    @property
    def adjacency(self):
        """The stored (read-only) adjacency, dense ``int8`` or CSR."""
        return self._adj

    def to_dense(self):
        if self.is_sparse:
            return self._adj.toarray()
        return np.array(self._adj)

    def row(self, i):
        """Dense ``int8`` copy of row ``i``."""
        if self.is_sparse:
            return self._adj.getrow(i).toarray().ravel()
        return np.array(self._adj[i])

    def entry(self, i, j):
        if self.is_sparse:
            return int(self._adj[i, j])
        return int(self._adj[i, j])

    def edges(self):
        """Nonzero entries as ``(rows, cols, signs)`` in row-major order."""
        if self.is_sparse:
            coo = self._adj.tocoo()
            order = np.lexsort((coo.col, coo.row))
            return coo.row[order], coo.col[order], coo.data[order]
        rows, cols = np.nonzero(self._adj)
        return rows, cols, self._adj[rows, cols]

    @property
    def n_edges(self):
        """Edge count; each undirected edge counts once."""
        return self.nnz if self.directed else self.nnz // 2

    @property
    def nnz(self):
        if self.is_sparse:
            return int(self._adj.nnz)
        return int(np.count_nonzero(self._adj))

    def indicator_matrices(self):
        """
        Float64 indicator matrices ``(P, N)`` of positive and negative
        entries, cached.  Dense or CSR to match the storage.
        """
        if self._indicators is None:
            if self.is_sparse:
                pos = (self._adj == 1).astype(np.float64).tocsr()
                neg = (self._adj == -1).astype(np.float64).tocsr()
            else:
                pos = (self._adj == 1).astype(np.float64)
                neg = (self._adj == -1).astype(np.float64)
            self._indicators = (pos, neg)
        return self._indicators

    def csr_arrays(self):
        """
        ``(indptr, indices, data)`` of the nonzero entries as C ints and
        int8 signs, cached.  Available for both storages.
        """
        if self._csr is None:
            mat = self._adj if self.is_sparse else sp.csr_matrix(self._adj)
            mat = mat.tocsr()
            mat.sort_indices()
            self._csr = (np.ascontiguousarray(mat.indptr, dtype=np.intc),
                         np.ascontiguousarray(mat.indices, dtype=np.intc),
                         np.ascontiguousarray(mat.data, dtype=np.int8))
        return self._csr

    def symmetrized(self):
        """
        Undirected copy where a pair is connected if either direction is.

        :raises ConflictingSign:
            If ``(i, j)`` and ``(j, i)`` carry opposite signs.
        """
        rows, cols, signs = self.edges()
        return SignedGraph.from_edges(self.n, rows, cols, signs,
                                      node_labels=self.node_labels,
                                      directed=False)

    def permuted(self, order):
        """
        Relabel nodes so that new node ``p`` is old node ``order[p]``.
        """
        order = np.asarray(order)
        if sorted(order.tolist()) != list(range(self.n)):
            raise ValueError("order must be a permutation of range(n)")
        inverse = np.empty_like(order)
        inverse[order] = np.arange(self.n)
        rows, cols, signs = self.edges()
        labels = [self.node_labels[i] for i in order]
        return SignedGraph.from_edges(self.n, inverse[rows], inverse[cols],
                                      signs, node_labels=labels,
                                      directed=self.directed)

    def __eq__(self, other):
        if not isinstance(other, SignedGraph):
            return NotImplemented
        if (self.n, self.directed, self.node_labels) != \
                (other.n, other.directed, other.node_labels):
            return False
        a, b = self.edges(), other.edges()
        return all(np.array_equal(x, y) for x, y in zip(a, b))

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        store = "csr" if self.is_sparse else "dense"
        return f"SignedGraph(n={self.n}, nnz={self.nnz}, {kind}, {store})"


def _is_symmetric(mat):
    if sp.issparse(mat):
        return (mat != mat.T).nnz == 0
    return np.array_equal(mat, mat.T)


@dataclass(frozen=True)
class Partition:
    """
    A hard assignment of ``n`` nodes to ``k`` compacted blocks.

    Use :meth:`from_labels` to build one from arbitrary labels.
    """

    assignment: np.ndarray
    k: int = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.assignment, dtype=np.int64).copy()
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("assignment must be a non-empty 1-D sequence")
        used = np.unique(arr)
        if used[0] != 0 or used[-1] != used.size - 1:
            raise ValueError("block labels must be compacted to 0..k-1")
        arr.flags.writeable = False
        object.__setattr__(self, "assignment", arr)
        object.__setattr__(self, "k", int(used.size))

    @classmethod
    def from_labels(cls, labels):
        """Compact arbitrary hashable labels, in sorted label order."""
        labels = np.asarray(labels)
        _, compact = np.unique(labels, return_inverse=True)
        return cls(compact.ravel())

    @property
    def n(self):
        return int(self.assignment.size)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.k)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.assignment, other.assignment)

    def __hash__(self):
        return hash(self.assignment.tobytes())


def _parse_directive(text):
    body = text[1:].strip()
    key, sep, value = body.partition(":")
    if not sep:
        return None, None
    return key.strip().lower(), value.strip()


def load_edge_list(path, n_hint=None, directed=None, dense_limit=DENSE_LIMIT):
    """
    Read a signed edge list.

    :param path:
        File to read.

    :param n_hint: [optional]
        When given, node IDs must be integers in ``[0, n_hint)`` and are used
        as indices directly, so the graph has exactly ``n_hint`` nodes.
        Otherwise IDs are arbitrary tokens mapped to dense indices in order
        of first appearance (after any ``# nodes:`` directive).

    :param directed: [optional]
        Overrides the ``# directed:`` directive; defaults to undirected.

    :raises MalformedLine:
        With the offending line number.
    :raises ConflictingSign:
        If a pair appears with both signs.
    :raises EmptyInput:
        If the file names no nodes at all.
    """
    path = Path(path)
    ids = {}
    labels = []
    header_directed = None
    rows, cols, signs = [], [], []
    self_loops = 0

    def index_of(token, line_number, text):
        if n_hint is not None:
            try:
                idx = int(token)
            except ValueError:
                raise MalformedLine(path, line_number, text,
                                    "node ID is not an integer") from None
            if not 0 <= idx < n_hint:
                raise MalformedLine(path, line_number, text,
                                    f"node ID outside [0, {n_hint})")
            return idx
        idx = ids.get(token)
        if idx is None:
            idx = ids[token] = len(labels)
            labels.append(token)
        return idx

    with open(path, encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            if text.startswith("#"):
                key, value = _parse_directive(text)
                if key == "directed":
                    header_directed = value.lower() in ("1", "true", "yes")
                elif key == "nodes" and n_hint is None:
                    for token in value.split():
                        index_of(token, line_number, text)
                continue
            parts = text.split()
            if len(parts) != 3:
                raise MalformedLine(path, line_number, text,
                                    "expected 'src dst sign'")
            src, dst, sign = parts
            if sign not in ("1", "-1"):
                raise MalformedLine(path, line_number, text,
                                    "sign must be 1 or -1")
            i = index_of(src, line_number, text)
            j = index_of(dst, line_number, text)
            if i == j:
                self_loops += 1
                continue
            rows.append(i)
            cols.append(j)
            signs.append(int(sign))

    if self_loops:
        logger.warning("%s: dropped %d self-loop line(s)", path, self_loops)

    n = n_hint if n_hint is not None else len(labels)
    if not n:
        raise EmptyInput(f"{path}: no nodes found")
    if directed is None:
        directed = bool(header_directed)
    node_labels = None if n_hint is not None else labels
    return SignedGraph.from_edges(n, rows, cols, signs,
                                  node_labels=node_labels, directed=directed,
                                  dense_limit=dense_limit)


def write_edge_list(graph, path):
    """
    Write ``graph`` so that :func:`load_edge_list` restores it exactly.

    Undirected graphs emit only the upper triangle.
    """
    rows, cols, signs = graph.edges()
    if not graph.directed:
        keep = rows < cols
        rows, cols, signs = rows[keep], cols[keep], signs[keep]
    labels = graph.node_labels
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# ssbm signed edge list\n")
        fh.write(f"# directed: {'true' if graph.directed else 'false'}\n")
        for start in range(0, graph.n, _NODES_PER_HEADER_LINE):
            chunk = labels[start:start + _NODES_PER_HEADER_LINE]
            fh.write("# nodes: " + " ".join(chunk) + "\n")
        for i, j, s in zip(rows.tolist(), cols.tolist(), signs.tolist()):
            fh.write(f"{labels[i]}\t{labels[j]}\t{s}\n")


def write_partition(partition, path, node_labels=None):
    """Write ``node block`` lines, one per node."""
    if node_labels is None:
        node_labels = [str(i) for i in range(partition.n)]
    with open(path, "w", encoding="utf-8") as fh:
        for label, block in zip(node_labels, partition.assignment.tolist()):
            fh.write(f"{label}\t{block}\n")


def load_partition(path):
    """
    Read a ``node block`` file.

    :returns:
        ``(node_labels, Partition)`` in file order.
    """
    labels, blocks = [], []
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise MalformedLine(path, line_number, text,
                                    "expected 'node block'")
            labels.append(parts[0])
            blocks.append(parts[1])
    if not labels:
        raise EmptyInput(f"{path}: no nodes found")
    if len(set(labels)) != len(labels):
        raise MalformedLine(path, 0, "", "duplicate node in partition file")
    return labels, Partition.from_labels(blocks)
