"""
Reparameterized signed stochastic block model with component-wise EM.

The model assigns node ``i`` to block ``k`` with probability ``phi[k]``; a
member of block ``k`` then emits a positive, negative or null edge towards
node ``j`` with probabilities ``lam[k, j]``.  Parameters are learned by
component-wise EM under a minimum message length cost whose mixing-weight
update drops any block holding no more than ``c / 2`` nodes' worth of
responsibility, with ``c = 2 * K_ne``.  Starting from ``k_max`` blocks, the
learner converges, records the cost, removes the weakest block and repeats
down to ``k_min``, keeping the cheapest model seen.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from . import kernels
from .errors import ConfigError, DegenerateModel
from .graph import Partition
from .synth import make_rng

__all__ = [
    "LOG_KAPPA",
    "ModelParams",
    "FitConfig",
    "FitResult",
    "PhiUpdate",
    "default_k_max",
    "category_index",
    "log_evidence_per_node",
    "log_evidence_matrix",
    "responsibilities",
    "e_step_row",
    "m_step_phi",
    "m_step_lambda",
    "cost",
    "initial_params",
    "smoothing_operator",
    "restart_scheme",
    "fit",
    "fit_from",
]

logger = logging.getLogger(__name__)

#: log of the lattice constant, kappa = (2 pi e)^-1.
LOG_KAPPA = -math.log(2.0 * math.pi * math.e)

_INIT_SCHEMES = ("mixed", "similarity", "walk", "responsibility", "dirichlet")


def category_index(a):
    """Map an edge sign to its column: +1 -> 0, -1 -> 1, 0 -> 2."""
    return np.where(np.asarray(a) == 1, 0, np.where(np.asarray(a) == -1, 1, 2))


def default_k_max(n):
    """``floor(sqrt(n))``, at least 1."""
    if n < 1:
        raise ValueError("n must be positive")
    return max(1, math.isqrt(int(n)))


@dataclass
class ModelParams:
    """
    Mixing weights and block-to-node category probabilities.

    ``phi`` has one entry per block slot (zero for annihilated blocks) and
    ``lam`` has shape ``(k_max, n, 3)``.
    """

    phi: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64)
        self.lam = np.asarray(self.lam, dtype=np.float64)
        if self.lam.ndim != 3 or self.lam.shape[2] != 3:
            raise ValueError(f"lam must be k_max x n x 3, got {self.lam.shape}")
        if self.phi.shape != (self.lam.shape[0],):
            raise ValueError("phi and lam disagree on k_max")

    @property
    def k_max(self):
        return self.phi.size

    @property
    def n(self):
        return self.lam.shape[1]

    @property
    def live(self):
        return self.phi > 0

    @property
    def k_ne(self):
        return int(np.count_nonzero(self.phi > 0))

    @property
    def c(self):
        """Per-block parameter count used by the annihilation threshold."""
        return 2 * self.k_ne

    def copy(self):
        return ModelParams(self.phi.copy(), self.lam.copy())

    def check(self, lambda_floor=0.0, tol=1e-9):
        """Raise ``AssertionError`` if an invariant is violated."""
        assert np.all(self.phi >= 0), "negative mixing weight"
        assert abs(self.phi.sum() - 1.0) <= tol, "phi does not sum to 1"
        lam = self.lam[self.live]
        assert np.all(np.abs(lam.sum(axis=2) - 1.0) <= tol), \
            "lambda triple does not sum to 1"
        assert np.all(lam >= lambda_floor * (1 - 1e-6)), "lambda below floor"


@dataclass(frozen=True)
class FitConfig:
    """
    Learner settings.

    ``k_max=None`` means ``floor(sqrt(n))``.  ``init`` picks how the
    random starting point is drawn:

    ``"similarity"``
        Flat-Dirichlet responsibilities smoothed once over signed
        neighbourhood overlap, followed by one M-step for ``lam``.
    ``"walk"``
        The same, smoothed by four random-walk steps on ``|A|``.
    ``"mixed"``
        Even restarts use ``"similarity"``, odd ones ``"walk"``.  The two
        get stuck in different places, so the cheapest of both is a better
        minimizer of the cost than either alone.
    ``"responsibility"``
        Unsmoothed flat-Dirichlet responsibilities and one M-step.
    ``"dirichlet"``
        Every ``lam[k, j]`` drawn from a flat Dirichlet.

    ``smoothing_steps=None`` uses the per-scheme default.

    ``assignment`` is ``"argmax"`` or ``"sample"`` for the hard partition.
    """

    k_min: int = 1
    k_max: int = None
    epsilon: float = 1e-4
    restarts: int = 5
    seed: int = 0
    lambda_floor: float = 1e-10
    max_sweeps: int = 500
    init: str = "mixed"
    smoothing_steps: int = None
    assignment: str = "argmax"
    workers: int = 1
    backend: str = None

    def __post_init__(self):
        if self.k_min < 1:
            raise ConfigError("k_min", "must be at least 1")
        if self.k_max is not None and self.k_max < self.k_min:
            raise ConfigError("k_max", f"must be >= k_min ({self.k_min})")
        if not self.epsilon > 0:
            raise ConfigError("epsilon", "must be positive")
        if self.restarts < 1:
            raise ConfigError("restarts", "must be at least 1")
        if not 0 < self.lambda_floor < 1.0 / 3:
            raise ConfigError("lambda_floor", "must lie in (0, 1/3)")
        if self.max_sweeps < 1:
            raise ConfigError("max_sweeps", "must be at least 1")
        if self.init not in _INIT_SCHEMES:
            raise ConfigError("init", f"must be one of {_INIT_SCHEMES}")
        if self.assignment not in ("argmax", "sample"):
            raise ConfigError("assignment", "must be 'argmax' or 'sample'")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")

    def resolved_k_max(self, n):
        k_max = default_k_max(n) if self.k_max is None else self.k_max
        return min(k_max, n)


@dataclass
class FitResult:
    """Outcome of :func:`fit`; ``best_cost == min(per_k_best.values())``."""

    best_params: ModelParams
    best_partition: Partition
    best_cost: float
    best_zeta: np.ndarray = field(repr=False)
    cost_trace: list = field(repr=False)
    per_k_best: dict
    seed_used: int
    wall_time: float
    converged: bool = True
    flags: list = field(default_factory=list)
    sweep_times: list = field(default_factory=list, repr=False)
    restart: int = 0
    restart_costs: list = field(default_factory=list)

    @property
    def k_found(self):
        return self.best_partition.k

    @property
    def n_sweeps(self):
        return len(self.cost_trace)


class PhiUpdate(NamedTuple):
    phi: np.ndarray
    annihilated: frozenset
    zeta: np.ndarray


def _log_phi(phi):
    with np.errstate(divide="ignore"):
        return np.log(phi)


def log_evidence_per_node(graph, params, i, k):
    r"""
    :math:`\log u_{ik} = \sum_{j \ne i} \log \lambda_{k, j, cat(a_{ij})}`.
    """
    row = graph.row(i)
    cats = category_index(row)
    logs = np.log(params.lam[k, np.arange(graph.n), cats])
    logs[i] = 0.0
    return float(logs.sum())


def log_evidence_matrix(graph, params, backend=None):
    """``n x k_max`` matrix of log evidence; columns of dead blocks are 0."""
    out = np.zeros((graph.n, params.k_max))
    for k in np.flatnonzero(params.live):
        out[:, k] = kernels.log_evidence(graph, np.log(params.lam[k]),
                                         backend=backend)
    return out


def responsibilities(phi, log_u):
    """
    Posterior block memberships, normalized in the log domain.

    Dead blocks (``phi == 0``) get exactly zero.
    """
    live = phi > 0
    joint = np.full(log_u.shape, -np.inf)
    joint[:, live] = _log_phi(phi[live]) + log_u[:, live]
    norm = logsumexp(joint[:, live], axis=1, keepdims=True)
    zeta = np.zeros_like(joint)
    zeta[:, live] = np.exp(joint[:, live] - norm)
    return zeta


def e_step_row(graph, params, i):
    """Posterior over blocks for node ``i`` under ``params``."""
    live = np.flatnonzero(params.live)
    if live.size == 0:
        raise DegenerateModel("no live blocks")
    log_u = np.array([log_evidence_per_node(graph, params, i, k)
                      for k in live])
    joint = np.log(params.phi[live]) + log_u
    out = np.zeros(params.k_max)
    out[live] = np.exp(joint - logsumexp(joint))
    return out


# responsibility mass above c/2 below which a block counts as annihilated
MASS_TOL = 1e-8


def m_step_phi(zeta, c):
    """
    Mixing-weight update with annihilation.

    ``phi[k]`` is proportional to ``max(0, sum_i zeta[i, k] - c / 2)``.
    Blocks whose numerator is at most ``MASS_TOL`` are annihilated: their
    responsibility column is zeroed and rows are renormalized over the
    survivors.  The tolerance stops a block that clears ``c / 2`` only by
    rounding from surviving with a vanishing weight.

    :raises DegenerateModel:
        If every block would be annihilated.
    """
    zeta = np.asarray(zeta, dtype=np.float64)
    mass = zeta.sum(axis=0)
    numer = mass - c / 2.0
    numer[numer <= MASS_TOL] = 0.0
    total = numer.sum()
    if total <= 0:
        raise DegenerateModel(
            f"all {zeta.shape[1]} blocks fall at or below c/2 = {c / 2}")
    phi = numer / total
    dead = numer <= 0
    annihilated = frozenset(int(k) for k in np.flatnonzero(dead))
    new_zeta = zeta.copy()
    new_zeta[:, dead] = 0.0
    rows = new_zeta.sum(axis=1, keepdims=True)
    empty = rows[:, 0] <= 0
    if np.any(empty):
        new_zeta[np.ix_(empty, ~dead)] = 1.0 / np.count_nonzero(~dead)
        rows[empty] = 1.0
    new_zeta /= rows
    return PhiUpdate(phi, annihilated, new_zeta)


def _floor_triples(lam, lambda_floor):
    lam = np.maximum(lam, lambda_floor)
    return lam / lam.sum(axis=-1, keepdims=True)


def m_step_lambda(graph, zeta, k, lambda_floor=1e-10, backend=None):
    """
    Category probabilities from block ``k`` towards every node.

    Row ``j`` is the responsibility-weighted fraction of positive, negative
    and null entries in column ``j`` over rows ``i != j``, floored at
    ``lambda_floor`` and renormalized.

    :raises ValueError:
        If block ``k`` carries no responsibility mass.
    """
    weights = np.asarray(zeta)[:, k] if np.ndim(zeta) == 2 else np.asarray(zeta)
    total = weights.sum()
    if not total > 0:
        raise ValueError(f"block {k} has zero responsibility mass")
    counts = kernels.category_mass(graph, weights, backend=backend)
    denom = counts.sum(axis=1, keepdims=True)
    lam = np.full_like(counts, 1.0 / 3.0)
    ok = denom[:, 0] > 0
    lam[ok] = counts[ok] / denom[ok]
    return _floor_triples(lam, lambda_floor)


def _cost_terms(n, phi, log_u):
    live = phi > 0
    k_ne = int(np.count_nonzero(live))
    c = 2 * k_ne
    nll = -float(logsumexp(_log_phi(phi[live]) + log_u[:, live], axis=1).sum())
    scale = k_ne * (c + 1) / 2.0
    penalty = (scale * math.log(n) + (c / 2.0) * float(np.log(phi[live]).sum())
               + scale * (1.0 + LOG_KAPPA))
    return nll, penalty


def cost(graph, params, log_u=None, backend=None):
    r"""
    Message length of ``graph`` under ``params``.

    .. math::

        -\sum_i \log \sum_k \phi_k u_{ik}
        + \frac{K_{ne}(c+1)}{2}\log n
        + \frac{c}{2}\sum_{\phi_k > 0}\log\phi_k
        + \frac{K_{ne}(c+1)}{2}(1 + \log\kappa)

    with ``c = 2 K_ne``.  ``log_u`` may be passed to skip recomputing the
    evidence matrix.
    """
    if log_u is None:
        log_u = log_evidence_matrix(graph, params, backend=backend)
    nll, penalty = _cost_terms(graph.n, params.phi, log_u)
    return nll + penalty


def _row_normalize(weights):
    # rows without mass keep their own responsibilities
    if sp.issparse(weights):
        weights = sp.csr_matrix(weights)
        deg = np.asarray(weights.sum(axis=1)).ravel()
        isolated = deg == 0
        weights = weights + sp.diags(isolated.astype(np.float64))
        deg[isolated] = 1.0
        return sp.diags(1.0 / deg) @ weights
    deg = weights.sum(axis=1)
    isolated = deg == 0
    weights[isolated, isolated] = 1.0
    deg[isolated] = 1.0
    return weights / deg[:, None]


def smoothing_operator(graph, kind):
    """
    Row-stochastic operator used to smooth random initial responsibilities.

    ``"walk"`` is the random walk on the unsigned graph ``|A|``.
    ``"similarity"`` weights node pairs by the positive part of ``A A^T``,
    the signed overlap of their neighbourhoods, which is high for nodes with
    the same connection profile whether the block is a community or one
    side of a bipartite.
    """
    adj = graph.adjacency
    if graph.is_sparse:
        signed = adj.astype(np.float64)
        if kind == "walk":
            return _row_normalize(abs(signed))
        overlap = (signed @ signed.T).tocsr()
        overlap.data = np.maximum(overlap.data, 0.0)
        overlap.setdiag(0.0)
        overlap.eliminate_zeros()
        return _row_normalize(overlap)
    signed = adj.astype(np.float64)
    if kind == "walk":
        return _row_normalize(np.abs(signed))
    overlap = np.maximum(signed @ signed.T, 0.0)
    np.fill_diagonal(overlap, 0.0)
    return _row_normalize(overlap)


#: Default number of operator applications per smoothing scheme.
SMOOTHING_STEPS = {"similarity": 1, "walk": 4}


def initial_params(graph, k_max, rng, scheme="similarity", lambda_floor=1e-10,
                   smoothing_steps=None, backend=None):
    """
    Random starting point with uniform ``phi = 1 / k_max``.

    See :class:`FitConfig` for the schemes; ``"mixed"`` is resolved per
    restart by :func:`fit` and is not accepted here.
    """
    n = graph.n
    phi = np.full(k_max, 1.0 / k_max)
    if scheme == "dirichlet":
        lam = rng.dirichlet(np.ones(3), size=(k_max, n))
        return ModelParams(phi, _floor_triples(lam, lambda_floor))
    if scheme not in ("similarity", "walk", "responsibility"):
        raise ValueError(f"unknown init scheme {scheme!r}")

    zeta = rng.dirichlet(np.ones(k_max), size=n)
    if scheme in SMOOTHING_STEPS:
        steps = SMOOTHING_STEPS[scheme] if smoothing_steps is None \
            else smoothing_steps
        operator = smoothing_operator(graph, scheme)
        for _ in range(steps):
            zeta = operator @ zeta
        zeta /= zeta.sum(axis=1, keepdims=True)
    lam = np.empty((k_max, n, 3))
    for k in range(k_max):
        lam[k] = m_step_lambda(graph, zeta, k, lambda_floor, backend=backend)
    return ModelParams(phi, lam)


def restart_scheme(init, restart):
    """Init scheme for one restart; ``"mixed"`` alternates the smoothers."""
    if init == "mixed":
        return "similarity" if restart % 2 == 0 else "walk"
    return init


def _hard_partition(zeta, rng=None):
    if rng is None:
        labels = np.argmax(zeta, axis=1)
    else:
        cum = np.cumsum(zeta, axis=1)
        u = rng.random(zeta.shape[0])[:, None] * cum[:, -1:]
        labels = np.minimum((cum < u).sum(axis=1), zeta.shape[1] - 1)
    return Partition.from_labels(labels)


class _Run:
    """One pass of the learner from a fixed starting point."""

    def __init__(self, graph, params, config, order=None, backend=None):
        self.graph = graph
        self.config = config
        self.backend = backend
        self.phi = params.phi.copy()
        self.lam = params.lam.copy()
        self.k_max = params.k_max
        self.order = list(range(self.k_max)) if order is None else list(order)
        if sorted(self.order) != list(range(self.k_max)):
            raise ValueError("order must be a permutation of block indices")
        self.log_u = log_evidence_matrix(graph, params, backend=backend)
        self.trace = []
        self.sweep_times = []
        self.per_k_best = {}
        self.best = None
        self.converged = True
        self.flags = []

    @property
    def live(self):
        return self.phi > 0

    def _update_block(self, k):
        # returns True when block k was annihilated
        cfg = self.config
        zeta = responsibilities(self.phi, self.log_u)
        k_ne = int(np.count_nonzero(self.live))
        half_c = float(k_ne)
        numer = np.where(self.live, zeta.sum(axis=0) - half_c, 0.0)
        numer[numer <= MASS_TOL] = 0.0
        total = numer.sum()
        phi_k = numer[k] / total if total > 0 else 0.0
        if phi_k <= 0 and k_ne == 1:
            phi_k = 1.0
        self.phi[k] = phi_k
        self.phi /= self.phi.sum()
        if self.phi[k] > 0:
            self.lam[k] = m_step_lambda(self.graph, zeta, k, cfg.lambda_floor,
                                        backend=self.backend)
            self.log_u[:, k] = kernels.log_evidence(
                self.graph, np.log(self.lam[k]), backend=self.backend)
            return False
        self.phi[k] = 0.0
        self.log_u[:, k] = 0.0
        return True

    def _cost(self):
        nll, penalty = _cost_terms(self.graph.n, self.phi, self.log_u)
        return nll + penalty

    def _converge_regime(self):
        cfg = self.config
        prev = math.inf
        sweeps = 0
        while True:
            start = time.perf_counter()
            killed = False
            for k in self.order:
                if self.phi[k] > 0 and self._update_block(k):
                    killed = True
            current = self._cost()
            self.sweep_times.append(time.perf_counter() - start)
            k_ne = int(np.count_nonzero(self.live))
            self.trace.append((len(self.trace) + 1, k_ne, current))
            sweeps += 1
            if killed:
                sweeps = 0
            elif prev - current < cfg.epsilon:
                return current
            if sweeps >= cfg.max_sweeps:
                self.converged = False
                if "max_sweeps" not in self.flags:
                    self.flags.append("max_sweeps")
                return current
            prev = current

    def _record(self, current, rng):
        k_ne = int(np.count_nonzero(self.live))
        self.per_k_best[k_ne] = min(self.per_k_best.get(k_ne, math.inf),
                                    current)
        if self.best is None or current < self.best[0]:
            zeta = responsibilities(self.phi, self.log_u)
            self.best = (current, ModelParams(self.phi.copy(), self.lam.copy()),
                         zeta, _hard_partition(zeta, rng))

    def run(self, rng=None):
        k_min = self.config.k_min
        fallback = None
        while True:
            current = self._converge_regime()
            k_ne = int(np.count_nonzero(self.live))
            logger.debug("regime converged: k_ne=%d cost=%.6f", k_ne, current)
            if k_ne >= k_min:
                self._record(current, rng)
            else:
                fallback = current
            if k_ne <= max(k_min, 1):
                break
            live = np.flatnonzero(self.live)
            victim = live[np.argmin(self.phi[live])]
            self.phi[victim] = 0.0
            self.log_u[:, victim] = 0.0
            self.phi /= self.phi.sum()
        if self.best is None:
            self.flags.append("below_k_min")
            self._record(fallback, rng)
        return self


def fit_from(graph, params, config=None, order=None, rng=None):
    """
    Run the learner from an explicit starting point.

    ``order`` fixes the block visiting order within a sweep (default
    ascending index).  ``rng`` is used only for sampled hard assignments.
    """
    config = config or FitConfig()
    if graph.n < 2:
        raise ValueError("fitting needs at least two nodes")
    if params.n != graph.n:
        raise ValueError("params and graph disagree on n")
    started = time.perf_counter()
    run = _Run(graph, params, config, order=order, backend=config.backend)
    if config.assignment == "sample" and rng is None:
        rng = make_rng(config.seed)
    run.run(rng if config.assignment == "sample" else None)
    best_cost, best_params, zeta, partition = run.best
    return FitResult(
        best_params=best_params,
        best_partition=partition,
        best_cost=best_cost,
        best_zeta=zeta,
        cost_trace=run.trace,
        per_k_best=dict(sorted(run.per_k_best.items(), reverse=True)),
        seed_used=config.seed,
        wall_time=time.perf_counter() - started,
        converged=run.converged,
        flags=list(run.flags),
        sweep_times=run.sweep_times,
    )


def _one_restart(graph, config, restart, seed_seq):
    rng = make_rng(seed_seq)
    k_max = config.resolved_k_max(graph.n)
    params = initial_params(graph, k_max, rng,
                            scheme=restart_scheme(config.init, restart),
                            lambda_floor=config.lambda_floor,
                            smoothing_steps=config.smoothing_steps,
                            backend=config.backend)
    result = fit_from(graph, params, config, rng=rng)
    result.restart = restart
    return result


def fit(graph, config=None):
    """
    Fit the model, selecting the number of blocks along the way.

    Each of ``config.restarts`` independent random starts runs the full
    sweep from ``k_max`` down to ``k_min``; the cheapest recorded model
    wins.

    :returns:
        :class:`FitResult`.
    """
    config = config or FitConfig()
    if graph.n < 2:
        raise ValueError("fitting needs at least two nodes")
    if config.k_min > config.resolved_k_max(graph.n):
        raise ConfigError("k_min", f"exceeds k_max for n = {graph.n}")
    started = time.perf_counter()
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    if config.workers > 1 and config.restarts > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_one_restart, [graph] * len(seeds),
                                    [config] * len(seeds), range(len(seeds)),
                                    seeds))
    else:
        results = [_one_restart(graph, config, r, s)
                   for r, s in enumerate(seeds)]
    best = min(results, key=lambda res: (res.best_cost, res.restart))
    best = replace(best, wall_time=time.perf_counter() - started,
                   restart_costs=[res.best_cost for res in results],
                   seed_used=config.seed)
    return best
