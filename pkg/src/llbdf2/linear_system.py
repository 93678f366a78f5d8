"""Assembly and solution of the per-step block-sparse system.

Each step solves

    (c/k) x + B(m_hat) Lap_h x = rhs,   B(v) = [v]_x + alpha [v]_x^2,

for the unprojected update ``x``, where ``[v]_x`` is the skew matrix of
``v x .`` and ``c`` is 3/2 for BDF2 (1 for the BDF1 startup step).
Unknowns are ordered cell-major (C order over interior cells) with the
three components interleaved.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import GridSpec, NonFiniteFieldError, VectorField

log = logging.getLogger(__name__)


class SolverBreakdown(RuntimeError):
    """Iterative solve failed to reach the tolerance."""


class SingularFactor(RuntimeError):
    """Direct factorization failed; the system is always nonsingular, so this is a bug."""


@dataclass(frozen=True)
class SolverConfig:
    method: str = "direct"
    tolerance: float = 1e-10
    max_iterations: int = 5000
    restart: int = 50

    def __post_init__(self):
        if self.method not in ("direct", "iterative"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class BlockSparseSystem:
    grid: GridSpec
    matrix: sp.bsr_matrix
    rhs: np.ndarray  # (n_cells, 3)
    diag_blocks: np.ndarray  # (n_cells, 3, 3)

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    def block(self, row: int, col: int) -> np.ndarray:
        """3x3 coefficient block coupling cell ``row`` to cell ``col`` (flat indices)."""
        m = self.matrix
        lo, hi = m.indptr[row], m.indptr[row + 1]
        hit = np.nonzero(m.indices[lo:hi] == col)[0]
        if hit.size == 0:
            return np.zeros((3, 3))
        return m.data[lo + hit[0]]

    def blocks_in_row(self, row: int) -> int:
        return int(self.matrix.indptr[row + 1] - self.matrix.indptr[row])


@dataclass
class SolveResult:
    x: np.ndarray  # (n_cells, 3)
    residual: float
    iterations: int


@lru_cache(maxsize=16)
def neumann_laplacian(grid: GridSpec) -> sp.csr_matrix:
    """Scalar Laplacian on interior cells with the ghost copies folded in.

    A boundary cell's ghost equals the cell itself, so the matching ``+1/h^2``
    cancels one ``-1/h^2`` on the diagonal.
    """
    mat = None
    for axis, (n, h) in enumerate(zip(grid.n, grid.spacing)):
        main = np.full(n, -2.0)
        main[0] += 1.0
        main[-1] += 1.0
        d1 = sp.diags([np.ones(n - 1), main, np.ones(n - 1)], [-1, 0, 1], shape=(n, n)) / h**2
        term = d1
        # Kronecker ordering: axis 0 is slowest.
        for other in range(grid.dim):
            if other < axis:
                term = sp.kron(sp.identity(grid.n[other]), term)
            elif other > axis:
                term = sp.kron(term, sp.identity(grid.n[other]))
        mat = term if mat is None else mat + term
    # Drop cancelled entries but keep the diagonal stored (it can be an exact
    # zero on a single-cell grid) so the block pattern is always the stencil.
    coo = sp.coo_matrix(mat)
    keep = coo.data != 0.0
    diag = np.arange(grid.n_cells)
    rows = np.concatenate([coo.row[keep], diag])
    cols = np.concatenate([coo.col[keep], diag])
    data = np.concatenate([coo.data[keep], np.zeros(grid.n_cells)])
    lap = sp.coo_matrix((data, (rows, cols)), shape=mat.shape).tocsr()
    lap.sort_indices()
    return lap


def skew(v: np.ndarray) -> np.ndarray:
    """Stack of cross-product matrices: ``skew(v) @ w == cross(v, w)``."""
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def coupling_blocks(hat_m: np.ndarray, alpha: float) -> np.ndarray:
    """``B(m_hat) = [m_hat]_x + alpha [m_hat]_x^2`` per cell, shape ``(N, 3, 3)``."""
    s = skew(hat_m.reshape(-1, 3))
    return s + alpha * (s @ s)


def assemble(hat_m: VectorField, history_rhs: np.ndarray, k: float, alpha: float,
             grid: GridSpec | None = None, leading: float = 1.5) -> BlockSparseSystem:
    """Build the step matrix ``(leading/k) I + B(m_hat) Lap_h`` and attach ``history_rhs``."""
    grid = grid or hat_m.grid
    if k <= 0 or alpha < 0:
        raise ValueError("need k > 0 and alpha >= 0")
    values = hat_m.interior if isinstance(hat_m, VectorField) else np.asarray(hat_m)
    if not np.all(np.isfinite(values)):
        raise NonFiniteFieldError("extrapolated field m_hat has non-finite entries")
    N = grid.n_cells
    lap = neumann_laplacian(grid)
    B = coupling_blocks(values, alpha)

    # Row block (I, J) = B_I * lap[I, J]; the identity goes on the diagonal.
    rows = _row_of_entry(grid)
    data = B[rows] * lap.data[:, None, None]
    diag_pos = _diagonal_positions(grid)
    data[diag_pos] += (leading / k) * np.eye(3)
    matrix = sp.bsr_matrix((data, lap.indices, lap.indptr), shape=(3 * N, 3 * N))
    rhs = np.asarray(history_rhs, dtype=float).reshape(N, 3)
    return BlockSparseSystem(grid, matrix, rhs, data[diag_pos])


@lru_cache(maxsize=16)
def _row_of_entry(grid: GridSpec) -> np.ndarray:
    lap = neumann_laplacian(grid)
    return np.repeat(np.arange(grid.n_cells), np.diff(lap.indptr))


@lru_cache(maxsize=16)
def _diagonal_positions(grid: GridSpec) -> np.ndarray:
    lap = neumann_laplacian(grid)
    pos = np.flatnonzero(lap.indices == _row_of_entry(grid))
    assert pos.size == grid.n_cells
    return pos


def apply_operator(system: BlockSparseSystem, x: np.ndarray) -> np.ndarray:
    return (system.matrix @ np.asarray(x).reshape(-1)).reshape(-1, 3)


def _block_jacobi(system: BlockSparseSystem) -> spla.LinearOperator:
    inv = np.linalg.inv(system.diag_blocks)
    n = 3 * system.n_cells

    def apply(v):
        return np.einsum("nij,nj->ni", inv, v.reshape(-1, 3)).reshape(-1)

    return spla.LinearOperator((n, n), matvec=apply, dtype=float)


def _gmres(system: BlockSparseSystem, b: np.ndarray, config: SolverConfig, guess):
    A = system.matrix.tocsr()
    M = _block_jacobi(system)
    bnorm = np.linalg.norm(b) or 1.0
    x = np.zeros_like(b) if guess is None else np.asarray(guess, dtype=float).reshape(-1).copy()
    count = [0]

    def tick(_):
        count[0] += 1

    # GMRES monitors the preconditioned residual; restart with a tighter target
    # until the true residual meets the tolerance.
    rtol = 0.5 * config.tolerance
    while True:
        budget = config.max_iterations - count[0]
        if budget <= 0:
            break
        x, info = spla.gmres(A, b, x0=x, rtol=rtol, atol=0.0, restart=config.restart,
                             maxiter=max(1, budget // config.restart), M=M,
                             callback=tick, callback_type="pr_norm")
        if info < 0:
            raise SolverBreakdown(f"GMRES reported illegal input (info={info})")
        if np.linalg.norm(A @ x - b) / bnorm <= config.tolerance:
            break
        rtol *= 0.1
        if rtol < 1e-15:
            break
    return x, count[0]


@lru_cache(maxsize=16)
def _band_layout(grid: GridSpec):
    # Scalar (row, col) of every entry in the BSR data array, in data order.
    lap = neumann_laplacian(grid)
    brow = _row_of_entry(grid)
    bcol = lap.indices
    r = (3 * brow[:, None, None] + np.arange(3)[None, :, None]) + np.zeros((1, 1, 3), dtype=int)
    c = (3 * bcol[:, None, None] + np.arange(3)[None, None, :]) + np.zeros((1, 3, 1), dtype=int)
    return r.ravel(), c.ravel()


# Cell-major interleaving in 1-D couples unknowns at most 5 apart.
_BANDWIDTH = 5


def _banded_lu_solve(system: BlockSparseSystem) -> np.ndarray:
    """LU with partial pivoting on the band of the 1-D block-tridiagonal matrix."""
    rows, cols = _band_layout(system.grid)
    n = 3 * system.n_cells
    ab = np.zeros((2 * _BANDWIDTH + 1, n))
    ab[_BANDWIDTH + rows - cols, cols] = system.matrix.data.ravel()
    return sla.solve_banded((_BANDWIDTH, _BANDWIDTH), ab, system.rhs.reshape(-1),
                            overwrite_ab=True, check_finite=False)


def solve(system: BlockSparseSystem, config: SolverConfig = SolverConfig(),
          guess: np.ndarray | None = None) -> SolveResult:
    """Solve the step system and verify the relative residual against ``config.tolerance``."""
    A = system.matrix
    b = system.rhs.reshape(-1)
    bnorm = np.linalg.norm(b)
    iterations = 1
    if config.method == "direct":
        try:
            if system.grid.dim == 1:
                x = _banded_lu_solve(system)
            else:
                x = spla.splu(A.tocsc()).solve(b)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            raise SingularFactor(str(exc)) from exc
    else:
        x, iterations = _gmres(system, b, config, guess)
    r = np.linalg.norm(A @ x - b)
    residual = r / bnorm if bnorm > 0 else r
    if not np.all(np.isfinite(x)):
        raise SingularFactor("solution has non-finite entries")
    if residual > config.tolerance:
        if config.method == "direct":
            raise SingularFactor(f"direct solve residual {residual:.3e} exceeds {config.tolerance:g}")
        raise SolverBreakdown(
            f"GMRES stopped at relative residual {residual:.3e} after {iterations} iterations")
    log.debug("solve %s: residual %.3e, %d iterations", config.method, residual, iterations)
    return SolveResult(x.reshape(-1, 3), float(residual), iterations)
