"""Discretized map: cell geometry, distances and Hilbert-curve orderings."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

ROTATIONS = (0, 90, 180, 270)


@dataclass(frozen=True)
class GridMap:
    """A ``width`` x ``height`` grid of square cells, ``cell_size`` km each.

    Cells are indexed row-major: ``index = row * width + col``.
    """

    width: int
    height: int
    cell_size: float = 1.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.width}x{self.height}")
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")

    @property
    def n(self) -> int:
        return self.width * self.height

    def check(self, cell) -> int:
        c = int(cell)
        if not 0 <= c < self.n:
            raise ValueError(f"cell {cell} out of range for a {self.width}x{self.height} map")
        return c

    def col_row(self, cell) -> tuple[int, int]:
        c = self.check(cell)
        return c % self.width, c // self.width

    def cell_at(self, col: int, row: int) -> int:
        if not (0 <= col < self.width and 0 <= row < self.height):
            raise ValueError(f"({col}, {row}) is outside the map")
        return row * self.width + col

    @cached_property
    def centers(self) -> np.ndarray:
        """(n, 2) array of cell centers in km."""
        idx = np.arange(self.n)
        cols, rows = idx % self.width, idx // self.width
        return np.column_stack([(cols + 0.5) * self.cell_size, (rows + 0.5) * self.cell_size])

    @cached_property
    def distances(self) -> np.ndarray:
        """(n, n) Euclidean distance matrix between cell centers, km."""
        diff = self.centers[:, None, :] - self.centers[None, :, :]
        d = np.sqrt((diff**2).sum(axis=-1))
        d.setflags(write=False)
        return d

    @property
    def max_distance(self) -> float:
        return float(self.distances.max())

    def hilbert(self, rotation: int = 0) -> "HilbertOrdering":
        if rotation not in self._cache:
            self._cache[rotation] = hilbert_ordering(self, rotation)
        return self._cache[rotation]


def cell_center(grid: GridMap, cell) -> tuple[float, float]:
    col, row = grid.col_row(cell)
    return ((col + 0.5) * grid.cell_size, (row + 0.5) * grid.cell_size)


def distance(grid: GridMap, a, b) -> float:
    return float(grid.distances[grid.check(a), grid.check(b)])


def hilbert_index(order: int, x: int, y: int) -> int:
    """Position of ``(x, y)`` on the Hilbert curve filling a 2**order square."""
    side = 1 << order
    d = 0
    s = side >> 1
    while s > 0:
        rx = 1 if x & s else 0
        ry = 1 if y & s else 0
        d += s * s * ((3 * rx) ^ ry)
        if ry == 0:
            if rx == 1:
                x = side - 1 - x
                y = side - 1 - y
            x, y = y, x
        s >>= 1
    return d


def rotate_clockwise(col: int, row: int, width: int, height: int, rotation: int):
    """Rotate a cell about the map center; rows grow upward, so clockwise is (x, y) -> (y, -x)."""
    if rotation == 0:
        return col, row
    if rotation == 90:
        return row, width - 1 - col
    if rotation == 180:
        return width - 1 - col, height - 1 - row
    if rotation == 270:
        return height - 1 - row, col
    raise ValueError(f"rotation must be one of {ROTATIONS}, got {rotation}")


@dataclass(frozen=True)
class HilbertOrdering:
    rotation: int
    rank: np.ndarray  # rank[cell] -> position on the curve
    inverse: np.ndarray  # inverse[position] -> cell

    def __len__(self):
        return len(self.rank)


def hilbert_ordering(grid: GridMap, rotation: int = 0) -> HilbertOrdering:
    """Order the map's cells along a Hilbert curve turned ``rotation`` degrees clockwise.

    The map sits in the smallest 2**k square curve; curve positions that fall
    outside the map are skipped, so ranks are dense in ``[0, n)``. Turning the
    curve clockwise is the same as looking cells up after turning them
    counter-clockwise.
    """
    if rotation not in ROTATIONS:
        raise ValueError(f"rotation must be one of {ROTATIONS}, got {rotation}")
    order = max(0, int(np.ceil(np.log2(max(grid.width, grid.height)))))
    keys = np.empty(grid.n, dtype=np.int64)
    for cell in range(grid.n):
        col, row = cell % grid.width, cell // grid.width
        x, y = rotate_clockwise(col, row, grid.width, grid.height, (360 - rotation) % 360)
        keys[cell] = hilbert_index(order, x, y)
    inverse = np.argsort(keys, kind="stable")
    rank = np.empty_like(inverse)
    rank[inverse] = np.arange(grid.n)
    rank.setflags(write=False)
    inverse.setflags(write=False)
    return HilbertOrdering(rotation, rank, inverse)
