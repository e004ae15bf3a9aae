"""Protection location set (PLS) search along rotated Hilbert curves.

A PLS for cell ``x`` is a run of delta-set members, contiguous in Hilbert
order and containing ``x``, whose prior-weighted error ``E(PLS)`` reaches
``e^eps * E_m``. Among the four curve rotations the set with the smallest
diameter wins.
"""

import math
from dataclasses import dataclass

import numpy as np

from .adversary import prior_weighted_error
from .grid import ROTATIONS, GridMap
from .mobility import Belief, DeltaSet
from .perturbation import diameter

__all__ = ["PrivacyParams", "PLS", "diameter", "satisfies_condition", "search_pls", "search_all_pls"]


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    e_m: float
    delta: float = 0.05

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.e_m >= 0:
            raise ValueError(f"E_m must be nonnegative, got {self.e_m}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")

    @property
    def threshold(self) -> float:
        """Required prior-weighted error, ``e^eps * E_m``."""
        return math.exp(self.epsilon) * self.e_m


@dataclass(frozen=True)
class PLS:
    cell: int
    members: tuple
    diameter: float
    error: float
    rotation: int | None
    fallback: bool = False

    def __contains__(self, cell):
        return int(cell) in self.members

    def __len__(self):
        return len(self.members)


def _probs(prior):
    return prior.probs if isinstance(prior, Belief) else np.asarray(prior, dtype=float)


def satisfies_condition(members, prior, params: PrivacyParams, grid: GridMap) -> bool:
    return prior_weighted_error(members, _probs(prior), grid) >= params.threshold


class _Windows:
    """Error and diameter of every contiguous run of delta-set members for one rotation."""

    def __init__(self, seq, prior, grid: GridMap, threshold):
        self.seq = seq
        L = len(seq)
        w = prior[seq]
        contrib = w[:, None] * grid.distances[seq]  # (L, n): row k is prior[k] * d(k, .)
        err = np.full((L, L), -np.inf)
        for i in range(L):
            sums = np.cumsum(contrib[i:], axis=0)
            mass = np.cumsum(w[i:])
            with np.errstate(invalid="ignore", divide="ignore"):
                e = sums.min(axis=1) / mass
            err[i, i:] = np.where(mass > 0, e, 0.0)
        dd = grid.distances[np.ix_(seq, seq)]
        diam = np.zeros((L, L))
        for span in range(1, L):
            i = np.arange(L - span)
            j = i + span
            diam[i, j] = np.maximum(np.maximum(diam[i + 1, j], diam[i, j - 1]), dd[i, j])
        self.ok = err >= threshold
        self.diam = diam
        self.pos = {int(c): k for k, c in enumerate(seq)}

    def best(self, cell):
        """Smallest-diameter satisfying window containing ``cell``: ``(diam, size, start, end)``."""
        p = self.pos[cell]
        ok = self.ok[: p + 1, p:]
        if not ok.any():
            return None
        i, j = np.nonzero(ok)
        diam = np.round(self.diam[: p + 1, p:][i, j], 9)
        size = j + p - i + 1
        k = np.lexsort((i, size, diam))[0]
        return float(self.diam[i[k], j[k] + p]), int(size[k]), int(i[k]), int(j[k] + p)


def search_all_pls(dset: DeltaSet, prior, params: PrivacyParams, grid: GridMap, cells=None) -> dict:
    """PLS for each cell in ``cells`` (default: every delta-set member).

    Window tables are built once per rotation and shared by all cells. When no
    window satisfies the condition the whole delta set is returned, flagged
    as a fallback.
    """
    p = _probs(prior)
    members = np.array(sorted(dset.members), dtype=int)
    cells = [int(m) for m in members] if cells is None else [int(c) for c in cells]
    for c in cells:
        if c not in dset:
            raise ValueError(f"cell {c} is not in the delta-location set; apply surrogate first")
    tables = []
    for rot in ROTATIONS:
        rank = grid.hilbert(rot).rank
        seq = members[np.argsort(rank[members], kind="stable")]
        tables.append((rot, _Windows(seq, p, grid, params.threshold)))
    out = {}
    for c in cells:
        best = None
        for rot, tab in tables:
            hit = tab.best(c)
            if hit is None:
                continue
            key = (round(hit[0], 9), hit[1], rot)
            if best is None or key < best[0]:
                best = (key, rot, tab.seq[hit[2]: hit[3] + 1], hit[0])
        if best is None:
            out[c] = PLS(c, tuple(int(m) for m in members), diameter(members, grid),
                         prior_weighted_error(members, p, grid), None, fallback=True)
        else:
            _, rot, run, diam = best
            out[c] = PLS(c, tuple(sorted(int(m) for m in run)), diam,
                         prior_weighted_error(run, p, grid), rot)
    return out


def search_pls(cell, dset: DeltaSet, prior, params: PrivacyParams, grid: GridMap) -> PLS:
    return search_all_pls(dset, prior, params, grid, cells=[cell])[int(cell)]
