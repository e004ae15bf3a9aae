"""Bayesian adversary: posterior update, optimal inference and expected inference error."""

import numpy as np

from .grid import GridMap
from .mobility import Belief

TIE_TOL = 1e-12


class InconsistentObservation(ValueError):
    """The observed cell has zero probability under the attacker's model."""


def posterior(prior: Belief, family, observed: int) -> Belief:
    """Bayes update after seeing ``observed``.

    ``family[x]`` is the attacker's perturbation pmf for true cell ``x``;
    rows of zero-prior cells are ignored.
    """
    family = np.asarray(family, dtype=float)
    like = family[:, int(observed)]
    joint = np.where(prior.probs > 0, prior.probs * like, 0.0)
    total = joint.sum()
    if not total > 0:
        raise InconsistentObservation(f"cell {observed} cannot be observed under the model")
    return Belief(joint / total, "posterior", prior.t)


def _guess_costs(probs, grid: GridMap) -> np.ndarray:
    # costs[g] = sum_x probs[x] * d(g, x)
    return grid.distances @ np.asarray(probs, dtype=float)


def _argmin_low(costs) -> int:
    lo = costs.min()
    return int(np.flatnonzero(costs <= lo + TIE_TOL * max(1.0, abs(lo)))[0])


def optimal_inference(post: Belief, grid: GridMap) -> int:
    """Guess minimizing the posterior-expected distance; ties go to the lowest cell id."""
    return _argmin_low(_guess_costs(post.probs, grid))


def expected_inference_error(post: Belief, grid: GridMap) -> float:
    return float(_guess_costs(post.probs, grid).min())


def prior_weighted_error(members, prior, grid: GridMap) -> float:
    """Best-guess expected error when the true cell is known to lie in ``members``.

    The prior is conditioned on the set; the guess may be any cell of the map.
    """
    members = np.asarray(sorted(set(int(c) for c in members)), dtype=int)
    if len(members) == 0:
        raise ValueError("empty protection set")
    p = prior.probs if isinstance(prior, Belief) else np.asarray(prior, dtype=float)
    w = p[members]
    mass = w.sum()
    if not mass > 0:
        raise ValueError("protection set has zero prior mass")
    return float((grid.distances[:, members] @ (w / mass)).min())


def attack_strategy(prior, family, grid: GridMap) -> np.ndarray:
    """Optimal deterministic guess for every observable cell.

    Returns ``guess[x']``; unobservable cells get guess -1.
    """
    p = prior.probs if isinstance(prior, Belief) else np.asarray(prior, dtype=float)
    joint = p[:, None] * np.asarray(family, dtype=float)  # (x, x')
    costs = grid.distances @ joint  # (guess, x')
    guess = np.full(joint.shape[1], -1, dtype=int)
    for obs in np.flatnonzero(joint.sum(axis=0) > 0):
        col = costs[:, obs]
        lo = col.min()
        guess[obs] = np.flatnonzero(col <= lo + TIE_TOL * max(1.0, abs(lo)))[0]
    return guess
