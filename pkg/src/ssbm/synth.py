"""
Synthetic signed networks with planted blocks.

Two families are provided:

* ``SG(c, m, k, p_in, p-, p+)``: ``c`` blocks of ``m`` nodes, ``floor(n*k/2)``
  edges.  Each edge lands inside a block with probability ``p_in``; inside
  edges are negative with probability ``p-``, between-block edges positive
  with probability ``p+``.
* Block-pair multinomial networks: every node pair draws one of
  (positive, negative, null) from a per-block-pair probability triple.

All randomness comes from numpy's counter-based Philox bit generator seeded
with the config's ``seed``.  The same seed gives bit-identical output.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InfeasibleConfig
from .graph import Partition, SignedGraph

__all__ = [
    "SgConfig",
    "BlockPairConfig",
    "generate_sg",
    "generate_block_pair",
    "network_vi_config",
    "make_rng",
    "NETWORK_VI_PI",
]

logger = logging.getLogger(__name__)

_ATTEMPT_FACTOR = 100


def make_rng(seed):
    """A Philox-backed :class:`numpy.random.Generator`."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _check_probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise ConfigError(name, f"must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class SgConfig:
    c: int
    m: int
    k: float
    p_in: float
    p_minus: float = 0.0
    p_plus: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.c) != self.c or self.c < 1:
            raise ConfigError("c", f"must be a positive integer, got {self.c}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError("m", f"must be a positive integer, got {self.m}")
        if self.k < 0:
            raise ConfigError("k", f"must be non-negative, got {self.k}")
        if self.k >= self.c * self.m:
            raise ConfigError("k", f"average degree {self.k} must be below "
                                   f"n = {self.c * self.m}")
        _check_probability("p_in", self.p_in)
        _check_probability("p_minus", self.p_minus)
        _check_probability("p_plus", self.p_plus)

    @property
    def n(self):
        return self.c * self.m

    @property
    def n_edges(self):
        return int(self.n * self.k // 2)


def generate_sg(config):
    """
    Sample an SG network.

    Edges are drawn one at a time.  Each edge first picks its pool: with
    probability ``p_in`` both endpoints come from one uniformly chosen block,
    otherwise from two distinct uniformly chosen blocks.  Endpoints are then
    redrawn within that pool until the pair is neither a self-pair nor a
    repeat, so the within-block count is binomial.  When one
    pool of pairs (inside or between blocks) is exhausted, further draws use
    the other pool; if the only pool with nonzero probability is exhausted
    generation stops short of the target and a warning is logged.

    :returns:
        ``(SignedGraph, Partition)`` with the planted blocks.

    :raises InfeasibleConfig:
        If the edges cannot be placed within ``100 * target`` attempts.
    """
    c, m = int(config.c), int(config.m)
    n = c * m
    target = config.n_edges
    rng = make_rng(config.seed)

    within_total = c * m * (m - 1) // 2
    between_total = n * (n - 1) // 2 - within_total
    used = {}
    n_within = n_between = 0
    attempts = 0
    max_attempts = _ATTEMPT_FACTOR * max(target, 1)

    while len(used) < target:
        within_open = n_within < within_total and config.p_in > 0
        between_open = n_between < between_total and config.p_in < 1
        if not within_open and not between_open:
            logger.warning("SG pools exhausted after %d of %d edges",
                           len(used), target)
            break
        if within_open and between_open:
            within = rng.random() < config.p_in
        else:
            within = within_open
        # redraw endpoints inside the chosen pool until the pair is new
        while True:
            attempts += 1
            if attempts > max_attempts:
                raise InfeasibleConfig(
                    f"placed {len(used)} of {target} edges in {max_attempts} "
                    "attempts")
            if within:
                b = rng.integers(c)
                i = b * m + rng.integers(m)
                j = b * m + rng.integers(m)
            else:
                b1, b2 = rng.choice(c, size=2, replace=False)
                i = b1 * m + rng.integers(m)
                j = b2 * m + rng.integers(m)
            key = (i, j) if i < j else (j, i)
            if i != j and key not in used:
                break
        if within:
            sign = -1 if rng.random() < config.p_minus else 1
            n_within += 1
        else:
            sign = 1 if rng.random() < config.p_plus else -1
            n_between += 1
        used[key] = sign

    if used:
        pairs = np.array(list(used.keys()), dtype=np.int64)
        signs = np.fromiter(used.values(), dtype=np.int8, count=len(used))
        rows, cols = pairs[:, 0], pairs[:, 1]
    else:
        rows = cols = np.empty(0, dtype=np.int64)
        signs = np.empty(0, dtype=np.int8)
    graph = SignedGraph.from_edges(n, rows, cols, signs, directed=False)
    truth = Partition(np.repeat(np.arange(c), m))
    return graph, truth


#: Category triples (positive, negative, null) for the four-block network
#: with two communities and two bipartite blocks.  Keys are 0-based block
#: pairs.  The published table lists (3, 4) twice and omits (2, 4); the
#: repeated row is read as the (2, 4) entry, which has the same values.
NETWORK_VI_PI = {
    (0, 0): (0.6, 0.1, 0.3),
    (0, 1): (0.1, 0.2, 0.7),
    (0, 2): (0.1, 0.2, 0.7),
    (0, 3): (0.1, 0.2, 0.7),
    (1, 1): (0.2, 0.1, 0.7),
    (1, 2): (0.01, 0.4, 0.59),
    (1, 3): (0.01, 0.4, 0.59),
    (2, 2): (0.01, 0.01, 0.98),
    (2, 3): (0.01, 0.4, 0.59),
    (3, 3): (0.01, 0.01, 0.98),
}


@dataclass(frozen=True)
class BlockPairConfig:
    """
    Block sizes plus a symmetric table of category triples.

    ``pi`` may be a ``K x K x 3`` array-like or a mapping from block pairs
    ``(k, q)`` to triples; mappings may list each unordered pair once.
    """

    block_sizes: tuple
    pi: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ConfigError("block_sizes", "need at least one block, all "
                                             "sizes positive")
        kb = len(sizes)
        if isinstance(self.pi, dict):
            table = np.full((kb, kb, 3), np.nan)
            for (a, b), triple in self.pi.items():
                if not (0 <= a < kb and 0 <= b < kb):
                    raise ConfigError("pi", f"block pair ({a}, {b}) out of range")
                for x, y in ((a, b), (b, a)):
                    if not np.all(np.isnan(table[x, y])) and \
                            not np.allclose(table[x, y], triple):
                        raise ConfigError(
                            "pi", f"pair ({a}, {b}) given twice with different "
                                  "values")
                    table[x, y] = triple
            if np.any(np.isnan(table)):
                missing = np.argwhere(np.isnan(table[:, :, 0]))[0]
                raise ConfigError("pi", f"no triple for block pair "
                                        f"({missing[0]}, {missing[1]})")
        else:
            table = np.array(self.pi, dtype=np.float64)
        if table.shape != (kb, kb, 3):
            raise ConfigError("pi", f"expected shape ({kb}, {kb}, 3), got "
                                    f"{table.shape}")
        if np.any(table < 0) or np.any(table > 1):
            raise ConfigError("pi", "probabilities must lie in [0, 1]")
        if np.any(np.abs(table.sum(axis=2) - 1.0) > 1e-12):
            raise ConfigError("pi", "each triple must sum to 1")
        if not np.array_equal(table, table.transpose(1, 0, 2)):
            raise ConfigError("pi", "table must be symmetric")
        table.flags.writeable = False
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "pi", table)

    @property
    def n(self):
        return sum(self.block_sizes)


def network_vi_config(seed=0, block_size=32):
    """The four-block community/bipartite benchmark configuration."""
    return BlockPairConfig(block_sizes=(block_size,) * 4, pi=NETWORK_VI_PI,
                           seed=seed)


def generate_block_pair(config):
    """
    Sample a block-pair multinomial network.

    Each unordered pair ``i < j`` draws its category once from
    ``pi[block(i)][block(j)]``.

    :returns:
        ``(SignedGraph, Partition)``.
    """
    sizes = np.asarray(config.block_sizes)
    blocks = np.repeat(np.arange(sizes.size), sizes)
    n = blocks.size
    rng = make_rng(config.seed)
    rows, cols = np.triu_indices(n, k=1)
    u = rng.random(rows.size)
    triples = config.pi[blocks[rows], blocks[cols]]
    positive = u < triples[:, 0]
    negative = ~positive & (u < triples[:, 0] + triples[:, 1])
    signs = np.zeros(rows.size, dtype=np.int8)
    signs[positive] = 1
    signs[negative] = -1
    keep = signs != 0
    graph = SignedGraph.from_edges(n, rows[keep], cols[keep], signs[keep],
                                   directed=False)
    return graph, Partition(blocks)
