"""Scenario configuration (YAML) and the default experiment setup."""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .grid import GridMap
from .mobility import Belief, check_stochastic, load_matrix, normalize_counts, random_walk_matrix
from .perturbation import KINDS
from .pls import PrivacyParams


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to replay one experiment.

    ``transition`` is either ``{"random_walk": {"stay": 4, "step": 1}}`` or
    ``{"file": path, "counts": bool}``. ``prior`` is either
    ``{"neighborhood": r}`` (uniform over the (2r+1)^2 block around the first
    true cell), ``{"support": [cells]}``, or ``{"uniform": true}``.
    """

    name: str = "default"
    width: int = 10
    height: int = 10
    cell_size: float = 5.0
    transition: dict = field(default_factory=lambda: {"random_walk": {"stay": 4.0, "step": 1.0}})
    prior: dict = field(default_factory=lambda: {"neighborhood": 1})
    trajectory: tuple = (33, 34, 44, 45, 55)
    epsilon: float = 1.0
    e_m: float = 2.0
    delta: float = 0.05
    mechanism: str = "pf"
    seed: int = 0
    reps: int = 100
    base_dir: str = "."

    def __post_init__(self):
        object.__setattr__(self, "trajectory", tuple(int(c) for c in self.trajectory))
        if not self.trajectory:
            raise ValueError("trajectory must contain at least one cell")
        for c in self.trajectory:
            self.grid.check(c)
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.mechanism not in KINDS:
            raise ValueError(f"mechanism must be one of {KINDS}, got {self.mechanism!r}")
        self.params  # validates epsilon, E_m, delta

    @property
    def grid(self) -> GridMap:
        return GridMap(int(self.width), int(self.height), float(self.cell_size))

    @property
    def params(self) -> PrivacyParams:
        return PrivacyParams(float(self.epsilon), float(self.e_m), float(self.delta))

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def transition_matrix(self) -> np.ndarray:
        src = self.transition
        grid = self.grid
        if "random_walk" in src:
            rw = src["random_walk"] or {}
            m = random_walk_matrix(grid, float(rw.get("stay", 4.0)), float(rw.get("step", 1.0)))
        elif "file" in src:
            path = Path(src["file"])
            if not path.is_absolute():
                path = Path(self.base_dir) / path
            raw = load_matrix(path)
            m = normalize_counts(raw) if src.get("counts", False) else raw
        else:
            raise ValueError(f"unknown transition source {src!r}")
        m = check_stochastic(m)
        if m.shape[0] != grid.n:
            raise ValueError(f"transition matrix is {m.shape[0]}x{m.shape[0]} but map has {grid.n} cells")
        return m

    def initial_prior(self) -> Belief:
        grid, src = self.grid, self.prior
        if "support" in src:
            return Belief.uniform(grid.n, [grid.check(c) for c in src["support"]])
        if "neighborhood" in src:
            r = int(src["neighborhood"])
            col, row = grid.col_row(self.trajectory[0])
            cells = [grid.cell_at(c, w)
                     for w in range(max(0, row - r), min(grid.height, row + r + 1))
                     for c in range(max(0, col - r), min(grid.width, col + r + 1))]
            return Belief.uniform(grid.n, cells)
        if src.get("uniform"):
            return Belief.uniform(grid.n)
        if "probs" in src:
            p = np.asarray(src["probs"], dtype=float)
            return Belief(p / p.sum())
        raise ValueError(f"unknown prior src {src!r}")


_FIELDS = {f for f in ScenarioConfig.__dataclass_fields__}


def load_config(path) -> ScenarioConfig:
    """Read a scenario from YAML. Missing keys take the default-scenario values.

    Grid keys may be nested under ``grid:`` and privacy keys under ``params:``.
    """
    path = Path(path)
    raw = yaml.safe_load(path.read_text()) or {}
    flat = dict(raw)
    for section in ("grid", "params"):
        flat.update(flat.pop(section, None) or {})
    unknown = set(flat) - _FIELDS
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    flat.setdefault("base_dir", str(path.parent))
    return ScenarioConfig(**flat)
