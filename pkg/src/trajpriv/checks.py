"""Randomized and exhaustive verification checks shared by ``selftest`` and the test suite.

Each check returns a ``CheckResult``. The oracles here are deliberately
naive (explicit loops over windows, pairs and observations) so they stay
independent of the vectorized code they verify.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .adversary import expected_inference_error, posterior, prior_weighted_error
from .grid import ROTATIONS, GridMap
from .mobility import Belief, DeltaSet, delta_location_set
from .perturbation import (PerturbationModel, closed_form_pmf, dp_ratio_check, enumerate_pf_pmf,
                           exponential_baseline_pmf, pf_exact_pmf, pf_pmf, pf_sample)
from .pls import PrivacyParams, search_all_pls, search_pls

EXACT_LIMIT = 14


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail}"


def exact_family(kind, pls, epsilon, grid):
    """Per-true-cell pmfs over the whole map for every member of ``pls``."""
    out = {}
    for x in pls:
        model = PerturbationModel(kind, x, tuple(pls), epsilon, grid)
        if kind == "pf":
            out[x] = pf_exact_pmf(model) if grid.n <= EXACT_LIMIT else pf_pmf(model)
        elif kind == "closed":
            out[x] = closed_form_pmf(model)
        else:
            out[x] = exponential_baseline_pmf(model)
    return out


def _random_instance(rng, max_side=6, max_set=6):
    while True:
        grid = GridMap(int(rng.integers(1, max_side + 1)), int(rng.integers(1, max_side + 1)),
                       float(rng.choice([1.0, 2.5, 5.0])))
        if grid.n >= 2:
            break
    size = int(rng.integers(2, min(max_set, grid.n) + 1))
    pls = tuple(sorted(rng.choice(grid.n, size=size, replace=False).tolist()))
    return grid, pls, float(rng.uniform(0.05, 3.0))


def check_dp(instances=50, seed=1, slack=1e-9):
    rng = np.random.default_rng(seed)
    worst_log, bad = 0.0, []
    for k in range(instances):
        grid, pls, eps = _random_instance(rng)
        for kind in ("closed", "exp", "pf"):
            ok, worst = dp_ratio_check(exact_family(kind, pls, eps, grid), eps, slack)
            worst_log = max(worst_log, math.log(worst) / eps)
            if not ok:
                bad.append((k, kind))
    return CheckResult("dp-ratio", not bad,
                       f"{instances} instances x 3 mechanisms, worst log-ratio/eps={worst_log:.6f}, "
                       f"violations={bad}")


def check_pf_exact(max_cells=8, seed=2, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(1, max_cells + 1):
        for _ in range(3):
            w = int(rng.integers(1, n + 1))
            while n % w:
                w -= 1
            grid = GridMap(w, n // w, 5.0)
            x = int(rng.integers(n))
            other = [c for c in range(n) if c != x]
            pls = (x,) + tuple(rng.choice(other, size=min(len(other), int(rng.integers(1, 4))),
                                          replace=False).tolist()) if other else (x,)
            model = PerturbationModel("pf", x, pls, float(rng.uniform(0.1, 4.0)), grid)
            oracle = enumerate_pf_pmf(model.acceptance) if not model.degenerate else model._point_mass()
            worst = max(worst, np.abs(pf_exact_pmf(model) - oracle).max(),
                        np.abs(pf_pmf(model) - oracle).max())
    return CheckResult("pf-exact-vs-enumeration", worst <= tol, f"max abs diff {worst:.3g} (tol {tol:g})")


def check_pf_sampling(draws=200_000, seed=3):
    grid = GridMap(3, 2, 5.0)
    model = PerturbationModel("pf", 1, (1, 2, 4), 1.5, grid)
    exact = pf_exact_pmf(model)
    rng = np.random.default_rng(seed)
    freq = np.bincount(pf_sample(model, rng, size=draws), minlength=grid.n) / draws
    se = np.sqrt(exact * (1 - exact) / draws)
    z = np.abs(freq - exact) / se
    return CheckResult("pf-sampling", bool((z <= 3).all()),
                       f"{draws} draws, max |z|={z.max():.2f} (limit 3)")


def check_closed_vs_exp(instances=50, seed=4, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        grid, pls, eps = _random_instance(rng, max_side=10, max_set=8)
        for x in pls:
            a = closed_form_pmf(PerturbationModel("closed", x, pls, eps, grid))
            b = exponential_baseline_pmf(PerturbationModel("exp", x, pls, eps, grid))
            worst = max(worst, np.abs(a - b).max())
    return CheckResult("closed-form==exponential", worst <= tol, f"max abs diff {worst:.3g} (tol {tol:g})")


def theorem_instances(seed=5, priors=3):
    """Every subset (size >= 2) of a few small maps, with random priors supported on it."""
    rng = np.random.default_rng(seed)
    for grid in (GridMap(2, 2, 5.0), GridMap(3, 2, 5.0), GridMap(4, 1, 5.0), GridMap(3, 3, 2.0)):
        for size in range(2, min(grid.n, 5) + 1):
            for pls in combinations(range(grid.n), size):
                for _ in range(priors):
                    p = np.zeros(grid.n)
                    p[list(pls)] = rng.dirichlet(np.ones(size))
                    yield grid, pls, p, float(rng.uniform(0.05, 3.0))


def check_theorems(seed=5, slack=1e-9, priors=3):
    """Lower bound ExpEr >= e^-eps E(PLS) and the E_m sufficient condition, exhaustively."""
    cases = lower_bad = suff_bad = 0
    rng = np.random.default_rng(seed + 1)
    for grid, pls, p, eps in theorem_instances(seed, priors):
        e_phi = prior_weighted_error(pls, p, grid)
        e_m = e_phi * math.exp(-eps) * float(rng.uniform(0.0, 1.0))
        prior = Belief(p)
        for kind in ("closed", "exp", "pf"):
            fam = exact_family(kind, pls, eps, grid)
            rows = np.zeros((grid.n, grid.n))
            for x, pmf in fam.items():
                rows[x] = pmf
            for obs in range(grid.n):
                if (p * rows[:, obs]).sum() <= 0:
                    continue
                cases += 1
                err = expected_inference_error(posterior(prior, rows, obs), grid)
                if err < math.exp(-eps) * e_phi * (1 - slack) - slack:
                    lower_bad += 1
                if e_phi >= math.exp(eps) * e_m and err < e_m * (1 - slack) - slack:
                    suff_bad += 1
    return CheckResult("inference-error-theorems", lower_bad == 0 and suff_bad == 0,
                       f"{cases} (instance, mechanism, observation) cases, lower-bound violations="
                       f"{lower_bad}, sufficient-condition violations={suff_bad}")


def brute_force_pls_diameter(cell, dset, prior, params, grid):
    """Smallest diameter over all satisfying Hilbert windows containing ``cell`` (None if none)."""
    best = None
    for rot in ROTATIONS:
        rank = grid.hilbert(rot).rank
        seq = sorted(dset.members, key=lambda c: rank[c])
        p = seq.index(cell)
        for i in range(p + 1):
            for j in range(p, len(seq)):
                window = seq[i: j + 1]
                if prior_weighted_error(window, prior, grid) < params.threshold:
                    continue
                diam = max(grid.distances[a, b] for a in window for b in window)
                best = diam if best is None else min(best, diam)
    return best


def random_pls_case(rng, max_side=5):
    grid = GridMap(int(rng.integers(1, max_side + 1)), int(rng.integers(2, max_side + 1)),
                   float(rng.choice([1.0, 5.0])))
    p = rng.dirichlet(np.full(grid.n, float(rng.choice([0.5, 1.0, 5.0]))))
    prior = Belief(p)
    delta = float(rng.uniform(0.01, 0.3))
    dset = delta_location_set(prior, delta)
    params = PrivacyParams(float(rng.uniform(0.05, 1.5)), float(rng.uniform(0.0, 0.6) * grid.cell_size), delta)
    cell = int(rng.choice(dset.members))
    return grid, prior, dset, params, cell


def check_pls_oracle(draws=100, seed=6):
    rng = np.random.default_rng(seed)
    mismatches, fallbacks = [], 0
    for k in range(draws):
        grid, prior, dset, params, cell = random_pls_case(rng)
        got = search_pls(cell, dset, prior, params, grid)
        want = brute_force_pls_diameter(cell, dset, prior.probs, params, grid)
        if want is None:
            fallbacks += 1
            if not got.fallback:
                mismatches.append(k)
        elif got.fallback or abs(got.diameter - want) > 1e-9:
            mismatches.append(k)
    return CheckResult("pls-vs-brute-force", not mismatches,
                       f"{draws} draws ({fallbacks} infeasible), mismatches={mismatches}")


def check_diameter_bound(draws=200, seed=7):
    rng = np.random.default_rng(seed)
    bad = checked = 0
    for _ in range(draws):
        grid, prior, dset, params, _ = random_pls_case(rng, max_side=6)
        for pls in search_all_pls(dset, prior, params, grid).values():
            if pls.fallback:
                continue
            checked += 1
            if not pls.diameter >= params.threshold:
                bad += 1
    return CheckResult("diameter-bound", bad == 0, f"{checked} non-fallback sets, violations={bad}")


QUICK = (
    lambda: check_dp(instances=10),
    lambda: check_pf_exact(max_cells=6),
    lambda: check_pf_sampling(draws=50_000),
    lambda: check_closed_vs_exp(instances=10),
    lambda: check_theorems(priors=1),
    lambda: check_pls_oracle(draws=20),
    lambda: check_diameter_bound(draws=20),
)


def selftest(stream=print):
    results = [fn() for fn in QUICK]
    for r in results:
        stream(r.line())
    return all(r.ok for r in results)
