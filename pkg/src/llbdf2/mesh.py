"""Cell-centered grids with one ghost layer per side.

Fields store one 3-vector per cell, ghosts included, in an array of shape
``(n_x + 2, [n_y + 2, n_z + 2,] 3)``. Index ``0`` and ``n + 1`` on every
active axis are ghosts; ``1..n`` are interior cells, so the ``(i, j, k)``
addressing matches the usual 1-based cell numbering.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class NonFiniteFieldError(ValueError):
    """Raised when a field holds NaN or infinite values."""


class StaleGhostsError(RuntimeError):
    """Raised when a stencil is applied to a field whose ghosts are out of date."""


@dataclass(frozen=True)
class GridSpec:
    dim: int
    n: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ValueError(f"dim must be 1 or 3, got {self.dim}")
        if len(self.n) != self.dim or len(self.lengths) != self.dim:
            raise ValueError("need one cell count and one extent per axis")
        for n in self.n:
            if int(n) != n or n < 1:
                raise ValueError(f"cell counts must be positive integers, got {self.n}")
        for length in self.lengths:
            if not (np.isfinite(length) and length > 0):
                raise ValueError(f"extents must be positive, got {self.lengths}")

    @property
    def n_x(self) -> int:
        return self.n[0]

    @property
    def n_y(self) -> int:
        return self.n[1] if self.dim == 3 else 1

    @property
    def n_z(self) -> int:
        return self.n[2] if self.dim == 3 else 1

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.n))

    @property
    def h_x(self) -> float:
        return self.spacing[0]

    # A 1-D grid is a single unit-width cell across y and z.
    @property
    def h_y(self) -> float:
        return self.spacing[1] if self.dim == 3 else 1.0

    @property
    def h_z(self) -> float:
        return self.spacing[2] if self.dim == 3 else 1.0

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.n))

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return tuple(self.n)

    @property
    def padded_shape(self) -> tuple[int, ...]:
        return tuple(n + 2 for n in self.n)

    def centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates ``(i - 1/2) h`` for ``i = 1..n`` on one axis."""
        h = self.spacing[axis]
        return (np.arange(1, self.n[axis] + 1) - 0.5) * h

    def coordinates(self) -> np.ndarray:
        """Interior cell centers as an array of shape ``(*interior_shape, dim)``."""
        axes = [self.centers(a) for a in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def make_grid(dim: int, n: int | Sequence[int], lengths: float | Sequence[float] = 1.0) -> GridSpec:
    """Build a grid; scalar ``n`` or ``lengths`` are broadcast to every axis."""
    if np.isscalar(n):
        n = (n,) * dim
    if np.isscalar(lengths):
        lengths = (lengths,) * dim
    return GridSpec(int(dim), tuple(int(v) for v in n), tuple(float(v) for v in lengths))


@dataclass
class VectorField:
    grid: GridSpec
    data: np.ndarray
    ghosts_filled: bool = field(default=False)

    def __post_init__(self):
        expected = self.grid.padded_shape + (3,)
        if self.data.shape != expected:
            raise ValueError(f"field data has shape {self.data.shape}, expected {expected}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls(grid, np.zeros(grid.padded_shape + (3,)))

    @classmethod
    def from_interior(cls, grid: GridSpec, values: np.ndarray) -> "VectorField":
        """Wrap interior values (shape ``(*interior_shape, 3)``) and fill the ghosts."""
        values = np.asarray(values, dtype=float)
        if values.shape == (3,):
            values = np.broadcast_to(values, grid.interior_shape + (3,))
        out = cls.zeros(grid)
        out.interior[...] = values
        return fill_ghosts(out)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "VectorField":
        """Sample ``func(coords)`` at the cell centers, ``coords`` shaped ``(..., dim)``."""
        return cls.from_interior(grid, func(grid.coordinates()))

    @property
    def interior(self) -> np.ndarray:
        return self.data[(slice(1, -1),) * self.grid.dim]

    def __getitem__(self, index) -> np.ndarray:
        if np.isscalar(index):
            index = (index,)
        return self.data[tuple(index)]

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.data.copy(), self.ghosts_filled)

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.interior)):
            bad = np.argwhere(~np.isfinite(self.interior).all(axis=-1))[0] + 1
            raise NonFiniteFieldError(f"non-finite value at cell {tuple(int(i) for i in bad)}")


def fill_ghosts(f: VectorField) -> VectorField:
    """Return a copy whose ghost cells mirror the adjacent interior cells.

    This is the discrete homogeneous Neumann condition on a cell-centered grid.
    """
    f.check_finite()
    data = f.data.copy()
    for axis in range(f.grid.dim):
        lo = [slice(None)] * data.ndim
        src = [slice(None)] * data.ndim
        lo[axis], src[axis] = 0, 1
        data[tuple(lo)] = data[tuple(src)]
        lo[axis], src[axis] = -1, -2
        data[tuple(lo)] = data[tuple(src)]
    return VectorField(f.grid, data, ghosts_filled=True)


def restrict_factor3(fine: VectorField, coarse_grid: GridSpec) -> VectorField:
    """Inject a fine field onto a grid three times coarser per axis.

    Coarse cell ``i`` takes fine cell ``3i - 1``; their centers coincide.
    """
    fg = fine.grid
    if fg.dim != coarse_grid.dim or not np.allclose(fg.lengths, coarse_grid.lengths, rtol=1e-14):
        raise ValueError("grids must share dimension and extents")
    if any(nf != 3 * nc for nf, nc in zip(fg.n, coarse_grid.n)):
        raise ValueError(f"fine counts {fg.n} are not 3x coarse counts {coarse_grid.n}")
    picks = tuple(slice(2, 3 * nc, 3) for nc in coarse_grid.n)
    return VectorField.from_interior(coarse_grid, fine.data[picks])


def restrict(fine: VectorField, coarse_grid: GridSpec) -> VectorField:
    """Repeated factor-3 injection down to ``coarse_grid`` (identity if equal)."""
    current = fine
    while current.grid.n != coarse_grid.n:
        step = tuple(n // 3 for n in current.grid.n)
        if any(n % 3 for n in current.grid.n) or any(s < c for s, c in zip(step, coarse_grid.n)):
            raise ValueError(f"{fine.grid.n} does not reach {coarse_grid.n} by factor-3 steps")
        current = restrict_factor3(current, GridSpec(coarse_grid.dim, step, coarse_grid.lengths))
    return current
