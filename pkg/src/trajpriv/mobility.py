"""Markov mobility model: transition matrices, belief propagation, delta-location sets."""

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridMap

log = logging.getLogger(__name__)

# Priors below this are treated as impossible locations.
IMPOSSIBLE = 1e-12
MASS_TOL = 1e-12


class DegenerateRowWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Belief:
    """Probability vector over cells, tagged as a prior or posterior at step ``t``."""

    probs: np.ndarray
    role: str = "prior"
    t: int = 1

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1:
            raise ValueError("belief must be a 1-D vector")
        if (p < 0).any():
            raise ValueError("belief has negative entries")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"belief sums to {p.sum()!r}, not 1")
        if self.role not in ("prior", "posterior"):
            raise ValueError(f"unknown belief role {self.role!r}")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return len(self.probs)

    @classmethod
    def uniform(cls, n: int, support=None, role="prior", t=1):
        p = np.zeros(n)
        idx = np.arange(n) if support is None else np.asarray(sorted(set(support)), dtype=int)
        p[idx] = 1.0 / len(idx)
        return cls(p, role, t)

    @classmethod
    def point(cls, n: int, cell: int, role="prior", t=1):
        p = np.zeros(n)
        p[cell] = 1.0
        return cls(p, role, t)


@dataclass(frozen=True)
class DeltaSet:
    """Smallest high-prior cell set covering at least ``1 - delta`` of the prior mass."""

    members: tuple[int, ...]
    delta: float
    mass: float

    def __contains__(self, cell):
        return int(cell) in self.members

    def __len__(self):
        return len(self.members)


def normalize_counts(counts) -> np.ndarray:
    """Row-normalize transition counts into a stochastic matrix.

    An all-zero row becomes a self-loop and triggers a ``DegenerateRowWarning``.
    """
    n_ij = np.asarray(counts, dtype=float)
    if n_ij.ndim != 2 or n_ij.shape[0] != n_ij.shape[1]:
        raise ValueError(f"counts must be square, got shape {n_ij.shape}")
    if (n_ij < 0).any():
        raise ValueError("transition counts must be nonnegative")
    sums = n_ij.sum(axis=1)
    m = np.zeros_like(n_ij)
    ok = sums > 0
    m[ok] = n_ij[ok] / sums[ok, None]
    empty = np.flatnonzero(~ok)
    if len(empty):
        m[empty, empty] = 1.0
        warnings.warn(f"rows {empty.tolist()} have no transitions; using self-loops",
                      DegenerateRowWarning, stacklevel=2)
    return m


def check_stochastic(m, tol=1e-12) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {m.shape}")
    if (m < 0).any() or (m > 1).any():
        raise ValueError("transition probabilities must lie in [0, 1]")
    bad = np.flatnonzero(np.abs(m.sum(axis=1) - 1.0) > tol)
    if len(bad):
        raise ValueError(f"rows {bad.tolist()} of the transition matrix do not sum to 1")
    return m


def load_matrix(path) -> np.ndarray:
    """Read a whitespace-separated square matrix (counts or probabilities)."""
    m = np.loadtxt(Path(path), dtype=float, ndmin=2)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{path}: matrix is {m.shape[0]}x{m.shape[1]}, expected square")
    return m


def random_walk_matrix(grid: GridMap, stay: float = 4.0, step: float = 1.0) -> np.ndarray:
    """Nearest-neighbour random walk: weight ``stay`` on the diagonal, ``step`` on each 4-neighbour.

    Border cells simply have fewer neighbours before normalization.
    """
    counts = np.zeros((grid.n, grid.n))
    for cell in range(grid.n):
        col, row = cell % grid.width, cell // grid.width
        counts[cell, cell] = stay
        for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            c, r = col + dc, row + dr
            if 0 <= c < grid.width and 0 <= r < grid.height:
                counts[cell, r * grid.width + c] = step
    return normalize_counts(counts)


def propagate_prior(posterior: Belief, m) -> Belief:
    """Next-step prior ``p_{t+1}^- = p_t^+ M``."""
    m = np.asarray(m, dtype=float)
    if m.shape != (len(posterior), len(posterior)):
        raise ValueError(f"belief of length {len(posterior)} does not match matrix {m.shape}")
    if posterior.role != "posterior":
        raise ValueError("propagate_prior expects a posterior belief")
    p = posterior.probs @ m
    # Row-stochastic M keeps the mass at 1 up to rounding; renormalize to pin it.
    p = np.clip(p, 0.0, None)
    return Belief(p / p.sum(), "prior", posterior.t + 1)


def delta_location_set(prior: Belief, delta: float) -> DeltaSet:
    """Cells by descending prior (ties by id) until the mass reaches ``1 - delta``."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    p = prior.probs
    order = np.lexsort((np.arange(len(p)), -p))
    members, mass = [], 0.0
    for cell in order:
        if p[cell] < IMPOSSIBLE:
            break
        members.append(int(cell))
        mass += float(p[cell])
        if mass >= 1.0 - delta - MASS_TOL:
            break
    return DeltaSet(tuple(members), float(delta), mass)


def surrogate(cell, dset: DeltaSet, grid: GridMap) -> int:
    """Return ``cell`` if it survived the delta set, otherwise its nearest member."""
    if not len(dset):
        raise ValueError("delta-location set is empty")
    cell = grid.check(cell)
    if cell in dset:
        return cell
    members = np.array(sorted(dset.members))
    return int(members[np.argmin(grid.distances[cell, members])])


def restricted_prior(prior: Belief, dset: DeltaSet) -> np.ndarray:
    """Prior restricted to the delta set and renormalized."""
    p = np.zeros(len(prior))
    idx = list(dset.members)
    p[idx] = prior.probs[idx]
    return p / p.sum()
