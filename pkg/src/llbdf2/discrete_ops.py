"""Finite-difference operators, discrete norms and pointwise vector algebra."""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .mesh import GridSpec, StaleGhostsError, VectorField

#: Smallest magnitude :func:`project` accepts before declaring the step diverged.
PROJECTION_EPS = 1e-8


class DegenerateMagnitude(ArithmeticError):
    def __init__(self, cell, magnitude):
        self.cell = cell
        self.magnitude = magnitude
        super().__init__(f"magnetization magnitude {magnitude:.3e} below {PROJECTION_EPS:g} at cell {cell}")


class FaceField(list):
    """Per-axis arrays of face values, as returned by :func:`gradient`.

    Entry ``a`` has shape ``interior_shape`` with axis ``a`` shortened by one:
    only faces between two interior cells are stored.
    """

    def __init__(self, grid: GridSpec, faces: Sequence[np.ndarray]):
        super().__init__(faces)
        self.grid = grid


Field = Union[VectorField, FaceField]


def _shift(a: np.ndarray, axis: int, lo: int, hi: int, dim: int) -> np.ndarray:
    index = [slice(1, -1)] * dim
    index[axis] = slice(lo, a.shape[axis] - hi if hi else None)
    return a[tuple(index)]


def laplacian_array(padded: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Seven-point (or three-point) Laplacian of a ghost-filled padded array."""
    dim = len(spacing)
    center = padded[(slice(1, -1),) * dim]
    out = np.zeros_like(center)
    for axis, h in enumerate(spacing):
        out += (_shift(padded, axis, 2, 0, dim) - 2.0 * center + _shift(padded, axis, 0, 2, dim)) / h**2
    return out


def laplacian(f: VectorField) -> np.ndarray:
    """Discrete Laplacian on interior cells, shape ``(*interior_shape, 3)``."""
    if not f.ghosts_filled:
        raise StaleGhostsError("fill_ghosts must run before applying the Laplacian")
    return laplacian_array(f.data, f.grid.spacing)


def gradient_array(interior: np.ndarray, spacing: Sequence[float]) -> list[np.ndarray]:
    out = []
    for axis, h in enumerate(spacing):
        out.append(np.diff(interior, axis=axis) / h)
    return out


def gradient(f: VectorField) -> FaceField:
    """Forward differences across every interior face, one array per axis."""
    return FaceField(f.grid, gradient_array(f.interior, f.grid.spacing))


def _entries(a, grid: GridSpec | None = None):
    if isinstance(a, VectorField):
        return [a.interior], a.grid
    if isinstance(a, FaceField):
        return list(a), a.grid
    return [np.asarray(a)], grid


def inner(a: Field | np.ndarray, b: Field | np.ndarray, grid: GridSpec | None = None) -> float:
    """Discrete l2 inner product ``h^d * sum(a . b)``, ghosts excluded.

    Raw arrays are treated as interior values and need ``grid``.
    """
    ea, ga = _entries(a, grid)
    eb, gb = _entries(b, grid)
    g = ga or gb
    if g is None:
        raise ValueError("a grid is required to weight raw arrays")
    if len(ea) != len(eb) or any(x.shape != y.shape for x, y in zip(ea, eb)):
        raise ValueError("inner product operands differ in shape")
    return g.cell_volume * float(sum(np.sum(x * y) for x, y in zip(ea, eb)))


def norm_l2(f: Field | np.ndarray, grid: GridSpec | None = None) -> float:
    return float(np.sqrt(inner(f, f, grid)))


def norm_inf(f: Field | np.ndarray) -> float:
    """Largest component magnitude over all cells (not the Euclidean cell norm)."""
    entries, _ = _entries(f)
    return float(max((np.max(np.abs(e)) for e in entries if e.size), default=0.0))


def norm_h1(f: VectorField | np.ndarray, grid: GridSpec | None = None) -> float:
    values, g = _entries(f, grid)
    g = g or grid
    grad = FaceField(g, gradient_array(values[0], g.spacing))
    return float(np.sqrt(inner(values[0], values[0], g) + inner(grad, grad)))


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    # Explicit components beat np.cross by ~3x on (N, 3) arrays.
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def triple(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a x (a x b)``."""
    return cross(a, cross(a, b))


def project(f: VectorField) -> VectorField:
    """Normalize every cell to unit length, ghosts refilled."""
    values = f.interior
    mag = np.linalg.norm(values, axis=-1)
    if mag.size and mag.min() < PROJECTION_EPS:
        cell = tuple(int(i) + 1 for i in np.unravel_index(np.argmin(mag), mag.shape))
        raise DegenerateMagnitude(cell, float(mag.min()))
    return VectorField.from_interior(f.grid, values / mag[..., None])


def exchange_energy(f: VectorField) -> float:
    """Exchange energy ``0.5 * ||grad_h m||_2^2``."""
    grad = gradient(f)
    return 0.5 * inner(grad, grad)
