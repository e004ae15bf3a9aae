"""Privacy and QoS metrics, trajectory aggregates and the equal-QoS budget solve."""

from dataclasses import dataclass, field

import numpy as np

from .adversary import attack_strategy
from .grid import GridMap


class BracketError(ValueError):
    """The target QoS loss is not bracketed by the epsilon interval."""


class AmbiguityError(ValueError):
    """QoS loss is not monotone over the bracket, so the solution may not be unique."""

    def __init__(self, msg, crossings):
        super().__init__(msg)
        self.crossings = crossings


def _probs(prior):
    return getattr(prior, "probs", np.asarray(prior, dtype=float))


def privacy_metric(prior, family, strategy, grid: GridMap) -> float:
    """Expected distance between the true cell and the attacker's guess.

    ``family[x, x']`` is the perturbation pmf of true cell ``x`` and
    ``strategy[x']`` the (deterministic) guess after observing ``x'``.
    """
    p = _probs(prior)
    f = np.asarray(family, dtype=float)
    strategy = np.asarray(strategy)
    joint = p[:, None] * f
    seen = joint.sum(axis=0) > 0
    if (strategy[seen] < 0).any():
        raise ValueError("strategy is undefined for an observable cell")
    guess = np.where(seen, strategy, 0)
    err = grid.distances[:, guess]  # err[x, x'] = d(x, h(x'))
    return float((joint * err).sum())


def qos_loss(prior, family, grid: GridMap) -> float:
    """Expected distance between the true and the reported cell."""
    p = _probs(prior)
    return float((p[:, None] * np.asarray(family, dtype=float) * grid.distances).sum())


def optimal_privacy(prior, family, grid: GridMap) -> float:
    return privacy_metric(prior, family, attack_strategy(prior, family, grid), grid)


@dataclass
class StepMetrics:
    t: int
    p: float
    q: float
    diameter: float
    exper: float
    flags: tuple = ()

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("metrics must be nonnegative")


@dataclass
class TrajectoryMetrics:
    steps: list = field(default_factory=list)

    @property
    def p(self) -> float:
        return float(np.mean([s.p for s in self.steps]))

    @property
    def q(self) -> float:
        return float(np.mean([s.q for s in self.steps]))

    @property
    def diameter(self) -> float:
        return float(np.mean([s.diameter for s in self.steps]))

    @property
    def exper(self) -> float:
        return float(np.mean([s.exper for s in self.steps]))


def trajectory_metrics(steps) -> TrajectoryMetrics:
    steps = list(getattr(steps, "steps", steps))
    if not steps:
        raise ValueError("no steps to aggregate")
    return TrajectoryMetrics([getattr(s, "metrics", s) for s in steps])


def solve_epsilon_for_qos(target_q, qos, bracket, rel_tol=0.01, max_iter=60, probes=8):
    """Find epsilon with ``qos(epsilon)`` within ``rel_tol`` of ``target_q``.

    ``qos`` maps epsilon to the QoS loss (re-running the full pipeline, since
    the protection sets depend on epsilon). The bracket is probed at
    ``probes`` interior points first; a non-monotone profile raises
    ``AmbiguityError`` listing every sub-interval where the target is crossed.

    Returns ``(epsilon, achieved_q)``.
    """
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError(f"bad bracket {bracket}")
    grid = np.linspace(lo, hi, probes + 2)
    vals = np.array([qos(e) for e in grid])
    diff = vals - target_q
    if diff.min() > 0 or diff.max() < 0:
        raise BracketError(f"target q={target_q:g} outside [{vals.min():g}, {vals.max():g}] "
                           f"over epsilon in [{lo:g}, {hi:g}]")
    steps = np.diff(vals)
    slack = 1e-12 * max(1.0, abs(vals).max())
    crossings = [(float(grid[k]), float(grid[k + 1])) for k in range(len(grid) - 1)
                 if diff[k] == 0 or np.sign(diff[k]) != np.sign(diff[k + 1])]
    if (steps > slack).any() and (steps < -slack).any():
        raise AmbiguityError(f"q(epsilon) is not monotone on [{lo:g}, {hi:g}]; "
                             f"target crossed in {crossings}", crossings)
    # narrow to the probed sub-interval that brackets the target
    a, b = crossings[0]
    qa = vals[list(grid).index(a)]
    best = min(zip(np.abs(diff), grid, vals))
    if best[0] <= rel_tol * abs(target_q):
        return float(best[1]), float(best[2])
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        qm = qos(mid)
        if abs(qm - target_q) <= rel_tol * abs(target_q):
            return mid, float(qm)
        if abs(qm - target_q) < best[0]:
            best = (abs(qm - target_q), mid, qm)
        if np.sign(qm - target_q) == np.sign(qa - target_q):
            a, qa = mid, qm
        else:
            b = mid
    return float(best[1]), float(best[2])
