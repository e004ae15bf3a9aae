"""Location perturbation mechanisms over the whole map.

Three mechanisms share the utility ``-d(x, x')`` and the sensitivity bound
``D(PLS)`` (the protection set's diameter):

* ``closed``: the normalized closed form ``w * exp(-eps (d - max d) / 2D)``;
* ``exp``: the textbook exponential mechanism;
* ``pf``: permute-and-flip, scanning a random permutation of cells and
  accepting each with probability ``exp(-eps d / 2D)``.

The first two are the same distribution; only ``pf`` differs.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import permutations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp

from .grid import GridMap

KINDS = ("pf", "closed", "exp")
MAX_EXACT = 20


def diameter(members, grid: GridMap) -> float:
    """Largest center-to-center distance within ``members``."""
    idx = np.asarray(sorted(set(int(c) for c in members)), dtype=int)
    if len(idx) == 0:
        raise ValueError("empty cell set has no diameter")
    return float(grid.distances[np.ix_(idx, idx)].max())


@dataclass(frozen=True)
class PerturbationModel:
    """Perturbation of true ``cell`` protected by the set ``pls``."""

    kind: str
    cell: int
    pls: tuple
    epsilon: float
    grid: GridMap

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown mechanism {self.kind!r}; expected one of {KINDS}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if int(self.cell) not in {int(c) for c in self.pls}:
            raise ValueError(f"cell {self.cell} is not in its protection set")

    @cached_property
    def sensitivity(self) -> float:
        return diameter(self.pls, self.grid)

    @property
    def degenerate(self) -> bool:
        """Singleton protection set: zero sensitivity, the cell is released as is."""
        return self.sensitivity == 0

    @cached_property
    def dist(self) -> np.ndarray:
        return self.grid.distances[int(self.cell)]

    @cached_property
    def acceptance(self) -> np.ndarray:
        """Permute-and-flip acceptance probability per candidate cell."""
        # Top utility is u(x) = -d(x, x) = 0.
        return np.exp(-self.epsilon * self.dist / (2.0 * self.sensitivity))

    def _point_mass(self):
        p = np.zeros(self.grid.n)
        p[int(self.cell)] = 1.0
        return p

    def pmf(self) -> np.ndarray:
        if self.kind == "pf":
            return pf_pmf(self)
        if self.kind == "closed":
            return closed_form_pmf(self)
        return exponential_baseline_pmf(self)

    def sample(self, rng: np.random.Generator) -> int:
        if self.kind == "pf":
            return int(pf_sample(self, rng))
        return int(rng.choice(self.grid.n, p=self.pmf()))


def closed_form_pmf(model: PerturbationModel) -> np.ndarray:
    """Literal closed form, shifted by the largest distance and normalized."""
    if model.degenerate:
        return model._point_mass()
    d = model.dist
    w = np.exp(-model.epsilon * (d - d.max()) / (2.0 * model.sensitivity))
    omega = 1.0 / w.sum()
    return omega * w


def exponential_baseline_pmf(model: PerturbationModel) -> np.ndarray:
    """Exponential mechanism with utility ``-d`` and sensitivity ``D(PLS)``."""
    if model.degenerate:
        return model._point_mass()
    logw = -model.epsilon * model.dist / (2.0 * model.sensitivity)
    return np.exp(logw - logsumexp(logw))


def pf_sample(model: PerturbationModel, rng: np.random.Generator, size=None):
    """Draw from permute-and-flip by running the procedure itself.

    With ``size`` given, draws are vectorized: one permutation and one row of
    coins per draw.
    """
    n = model.grid.n
    if model.degenerate:
        return int(model.cell) if size is None else np.full(size, int(model.cell))
    a = model.acceptance
    if size is None:
        for cand in rng.permutation(n):
            if rng.random() < a[cand]:
                return int(cand)
        raise AssertionError("top candidate always accepts")  # pragma: no cover
    perm = np.argsort(rng.random((size, n)), axis=1)
    accept = rng.random((size, n)) < a[perm]
    first = accept.argmax(axis=1)
    return perm[np.arange(size), first]


def pf_exact_pmf(model: PerturbationModel) -> np.ndarray:
    """Exact permute-and-flip output distribution by recursion over candidate subsets.

    ``P_S(i) = (a_i + sum_{j in S, j != i} (1 - a_j) P_{S - j}(i)) / |S|``, built
    up by subset size. Memory grows as ``2**n``, so the map must have at most
    ``MAX_EXACT`` cells; use ``pf_pmf`` or sampling for larger maps.
    """
    n = model.grid.n
    if n > MAX_EXACT:
        raise ValueError(f"exact enumeration is limited to {MAX_EXACT} cells (map has {n}); "
                         "use pf_pmf or Monte-Carlo estimation")
    if model.degenerate:
        return model._point_mass()
    a = model.acceptance
    masks = np.arange(1 << n)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    size = bits.sum(axis=1)
    table = np.zeros((1 << n, n))
    for k in range(1, n + 1):
        layer = masks[size == k]
        rows = np.where(bits[layer], a, 0.0)
        for j in range(n):
            has = layer[bits[layer, j]]
            rows[bits[layer, j]] += (1.0 - a[j]) * table[has & ~(1 << j)]
        table[layer] = rows / k
    return table[-1]


@lru_cache(maxsize=32)
def _unit_gauss(m: int):
    nodes, weights = leggauss(m)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def pf_pmf(model: PerturbationModel) -> np.ndarray:
    """Permute-and-flip distribution for any map size.

    Giving each candidate a uniform arrival time ``t`` turns the random order
    into ``P(i) = a_i * int_0^1 prod_{j != i} (1 - t a_j) dt``. The integrand is
    a degree ``n - 1`` polynomial, so Gauss-Legendre with ``n // 2 + 1`` nodes
    is exact up to rounding.
    """
    if model.degenerate:
        return model._point_mass()
    a = model.acceptance
    n = len(a)
    t, w = _unit_gauss(n // 2 + 1)
    logs = np.log1p(-np.outer(t, a))  # (node, cell)
    loo = logs.sum(axis=1, keepdims=True) - logs  # leave-one-out log products
    p = a * (w @ np.exp(loo))
    return p / p.sum()


def enumerate_pf_pmf(acceptance) -> np.ndarray:
    """Permute-and-flip distribution by walking every permutation (small domains only)."""
    a = np.asarray(acceptance, dtype=float)
    n = len(a)
    if n > 10:
        raise ValueError("permutation enumeration is limited to 10 candidates")
    p = np.zeros(n)
    for perm in permutations(range(n)):
        reach = 1.0
        for c in perm:
            p[c] += reach * a[c]
            reach *= 1.0 - a[c]
    fact = np.prod(np.arange(1, n + 1, dtype=float))
    return p / fact


def dp_ratio_check(pmfs, epsilon: float, slack: float = 1e-9):
    """Check ``e^-eps <= f(.|x) / f(.|y) <= e^eps`` for every pair of rows.

    ``pmfs`` is a mapping or sequence of per-true-cell distributions over a
    common output domain. Returns ``(ok, worst)``, where ``worst`` is the
    largest ratio seen (``inf`` if some output has mass under one cell only).
    """
    rows = np.array(list(pmfs.values()) if isinstance(pmfs, dict) else list(pmfs), dtype=float)
    bound = np.exp(epsilon)
    worst = 1.0
    for i in range(len(rows)):
        for j in range(len(rows)):
            if i == j:
                continue
            x, y = rows[i], rows[j]
            if ((x > 0) != (y > 0)).any():
                return False, float("inf")
            both = (x > 0) & (y > 0)
            if both.any():
                worst = max(worst, float((x[both] / y[both]).max()))
    return worst <= bound * (1.0 + slack), worst
