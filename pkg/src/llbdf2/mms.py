"""Manufactured exact solutions and the forcing that makes them exact.

Both solutions share the shape

    m_e = (cos(psi) sin t, sin(psi) sin t, cos t),

with ``psi = phi(x)`` in 1-D and ``psi = phi(x) phi(y) phi(z)`` in 3-D, where
``phi(s) = s^2 (1 - s)^2``. Since ``phi'(0) = phi'(1) = 0`` the normal
derivative vanishes on the boundary of the unit interval / cube.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrete_ops import cross


def phi(s):
    return s**2 * (1 - s) ** 2


def dphi(s):
    return 2 * s - 6 * s**2 + 4 * s**3


def d2phi(s):
    return 2 - 12 * s + 12 * s**2


def _psi_derivatives(coords: np.ndarray):
    """``psi``, ``|grad psi|^2`` and ``Lap psi`` at points shaped ``(..., d)``."""
    coords = np.asarray(coords, dtype=float)
    p = phi(coords)
    dp = dphi(coords)
    d2p = d2phi(coords)
    psi = np.prod(p, axis=-1)
    grad_sq = np.zeros_like(psi)
    lap = np.zeros_like(psi)
    d = coords.shape[-1]
    for a in range(d):
        others = np.prod(np.delete(p, a, axis=-1), axis=-1) if d > 1 else 1.0
        grad_sq = grad_sq + (dp[..., a] * others) ** 2
        lap = lap + d2p[..., a] * others
    return psi, grad_sq, lap


@dataclass(frozen=True)
class ManufacturedSolution:
    dim: int

    def exact(self, coords, t):
        psi, _, _ = _psi_derivatives(coords)
        st = np.sin(t)
        return np.stack([np.cos(psi) * st, np.sin(psi) * st, np.full_like(psi, np.cos(t))], axis=-1)

    def time_derivative(self, coords, t):
        psi, _, _ = _psi_derivatives(coords)
        ct = np.cos(t)
        return np.stack([np.cos(psi) * ct, np.sin(psi) * ct, np.full_like(psi, -np.sin(t))], axis=-1)

    def laplacian(self, coords, t):
        # Lap cos(psi) = -cos(psi)|grad psi|^2 - sin(psi) Lap psi, and similarly for sin.
        psi, grad_sq, lap = _psi_derivatives(coords)
        c, s, st = np.cos(psi), np.sin(psi), np.sin(t)
        return np.stack([(-c * grad_sq - s * lap) * st,
                         (-s * grad_sq + c * lap) * st,
                         np.zeros_like(psi)], axis=-1)

    def forcing(self, coords, t, alpha):
        return forcing(self, coords, t, alpha)


def exact_1d(x, t):
    return ManufacturedSolution(1).exact(np.asarray(x, dtype=float)[..., None], t)


def exact_3d(x, y, z, t):
    coords = np.stack(np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z))), axis=-1)
    return ManufacturedSolution(3).exact(coords, t)


def forcing(solution: ManufacturedSolution, coords, t, alpha):
    """``m_t + m x Lap m + alpha m x (m x Lap m)`` evaluated on the exact solution."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    m = solution.exact(coords, t)
    lap = solution.laplacian(coords, t)
    mxl = cross(m, lap)
    return solution.time_derivative(coords, t) + mxl + alpha * cross(m, mxl)


def forcing_callback(solution: ManufacturedSolution, alpha: float):
    """Adapt :func:`forcing` to the scheme's ``(coords, t)`` callback contract."""
    def f(coords, t):
        return forcing(solution, coords, t, alpha)
    return f
