"""Semi-implicit BDF2 projection time stepping for the Landau-Lifshitz equation.

Each step extrapolates ``m_hat = 2 m^{n+1} - m^n``, solves the linear system

    (3/2 mt^{n+2} - 2 mt^{n+1} + 1/2 mt^n) / k
        = -m_hat x Lap_h mt^{n+2} - alpha m_hat x (m_hat x Lap_h mt^{n+2}) + f(t^{n+2})

for the unprojected field ``mt^{n+2}`` and then normalizes it pointwise.
The history is started with one BDF1 step that uses ``m_hat = m^0``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .discrete_ops import cross, exchange_energy, laplacian, project
from .linear_system import SolverConfig, assemble, solve
from .mesh import VectorField, fill_ghosts

log = logging.getLogger(__name__)

Forcing = Callable[[np.ndarray, float], np.ndarray]
Observer = Callable[[int, float, "SchemeState"], Optional[bool]]

UNIT_TOLERANCE = 1e-8


class StepFailure(RuntimeError):
    """A step failed; ``step`` is the index of the level being computed."""

    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"step {step} failed: {cause}")


@dataclass(frozen=True)
class SchemeParams:
    alpha: float
    k: float
    t_final: float
    forcing: Optional[Forcing] = None
    h_app: Optional[Sequence[float]] = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("damping alpha must be positive")
        if not self.k > 0:
            raise ValueError("time step k must be positive")
        if not self.k <= self.t_final * (1 + 1e-12):
            raise ValueError("time step exceeds the final time")
        if self.h_app is not None and not np.all(np.isfinite(self.h_app)):
            raise ValueError("applied field must be finite")

    @property
    def n_steps(self) -> int:
        """Number of time levels after the initial one (floor of ``t_final / k``)."""
        return int(math.floor(self.t_final / self.k + 1e-9))


@dataclass
class SchemeState:
    n: int
    m_prev: VectorField
    m_curr: VectorField
    mt_prev: VectorField
    mt_curr: VectorField
    t_curr: float
    solver_residual: float = 0.0
    solver_iterations: int = 0

    @property
    def grid(self):
        return self.m_curr.grid


def apply_field_terms(hat_m: np.ndarray | VectorField, h_app, alpha: float) -> np.ndarray:
    """Explicit applied-field contribution ``-m_hat x H - alpha m_hat x (m_hat x H)``."""
    values = hat_m.interior if isinstance(hat_m, VectorField) else np.asarray(hat_m, dtype=float)
    h = np.broadcast_to(np.asarray(h_app, dtype=float), values.shape)
    mxh = cross(values, h)
    return -mxh - alpha * cross(values, mxh)


def _source(params: SchemeParams, state_grid, hat_m: np.ndarray, t: float) -> np.ndarray:
    out = np.zeros_like(hat_m)
    if params.forcing is not None:
        out += params.forcing(state_grid.coordinates(), t)
    if params.h_app is not None:
        out += apply_field_terms(hat_m, params.h_app, params.alpha)
    return out


def _implicit_solve(hat_m: np.ndarray, rhs: np.ndarray, params: SchemeParams, leading: float,
                    grid, guess: np.ndarray | None):
    system = assemble(hat_m, rhs, params.k, params.alpha, grid, leading=leading)
    result = solve(system, params.solver, guess=guess)
    mt = VectorField.from_interior(grid, result.x.reshape(grid.interior_shape + (3,)))
    return mt, result


def init(m0: VectorField, params: SchemeParams) -> SchemeState:
    """Accept ``m0`` and produce the first level with one BDF1 projection step."""
    m0.check_finite()
    mag = np.linalg.norm(m0.interior, axis=-1)
    if np.max(np.abs(mag - 1.0)) > UNIT_TOLERANCE:
        raise ValueError("initial magnetization is not pointwise unit length")
    m0 = project(m0)
    grid = m0.grid
    k = params.k
    try:
        hat_m = m0.interior
        rhs = m0.interior / k + _source(params, grid, hat_m, k)
        mt1, result = _implicit_solve(hat_m, rhs, params, 1.0, grid, m0.interior)
        m1 = project(mt1)
    except Exception as exc:
        raise StepFailure(1, exc) from exc
    return SchemeState(0, m0, m1, m0, mt1, k, result.residual, result.iterations)


def bdf2_step(state: SchemeState, params: SchemeParams) -> SchemeState:
    """Advance the two-level history by one BDF2 step."""
    grid = state.grid
    k = params.k
    level = state.n + 2
    t_new = level * k
    try:
        hat_m = 2.0 * state.m_curr.interior - state.m_prev.interior
        rhs = (2.0 * state.mt_curr.interior - 0.5 * state.mt_prev.interior) / k
        rhs = rhs + _source(params, grid, hat_m, t_new)
        guess = 2.0 * state.mt_curr.interior - state.mt_prev.interior
        mt, result = _implicit_solve(hat_m, rhs, params, 1.5, grid, guess)
        m = project(mt)
    except Exception as exc:
        raise StepFailure(level, exc) from exc
    return SchemeState(state.n + 1, state.m_curr, m, state.mt_curr, mt, t_new,
                       result.residual, result.iterations)


def equation_residual(before: SchemeState, after: SchemeState, params: SchemeParams) -> float:
    """Relative pointwise residual of the BDF2 update ``before -> after``.

    Evaluated with the stencil operators directly, independent of the assembled
    matrix. Normalized by the largest magnitude among the individual terms.
    """
    k, alpha = params.k, params.alpha
    hat_m = 2.0 * before.m_curr.interior - before.m_prev.interior
    mt = after.mt_curr
    lap = laplacian(mt)
    time_part = (1.5 * mt.interior - 2.0 * before.mt_curr.interior + 0.5 * before.mt_prev.interior) / k
    mxl = cross(hat_m, lap)
    damp = alpha * cross(hat_m, mxl)
    src = _source(params, mt.grid, hat_m, after.t_curr)
    res = time_part + mxl + damp - src
    scale = max(np.max(np.abs(t)) for t in (1.5 * mt.interior / k, mxl, damp, src,
                                             (2.0 * before.mt_curr.interior) / k))
    return float(np.max(np.abs(res)) / scale)


def run(m0: VectorField, params: SchemeParams, observers: Sequence[Observer] = ()) -> SchemeState:
    """Integrate from ``m0`` to ``params.t_final``.

    Observers are called as ``observer(step, t, state)`` after every step; any
    truthy return value ends the run early.
    """
    ratio = params.t_final / params.k
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        warnings.warn(f"t_final/k = {ratio:.6g} is not an integer; stopping at "
                      f"t = {params.n_steps * params.k:.6g}", stacklevel=2)
    state = init(m0, params)
    if _notify(observers, state):
        return state
    while state.t_curr < params.t_final - params.k / 2 and state.n + 1 < params.n_steps:
        state = bdf2_step(state, params)
        if _notify(observers, state):
            break
    log.info("finished at t = %.6g after %d steps", state.t_curr, state.n + 1)
    return state


def _notify(observers, state: SchemeState) -> bool:
    stop = False
    for obs in observers:
        stop = bool(obs(state.n + 1, state.t_curr, state)) or stop
    return stop


class EnergyStop:
    """Observer that stops once the relative change of exchange energy drops below ``rel_tol``."""

    def __init__(self, rel_tol: float = 1e-7):
        self.rel_tol = rel_tol
        self.history: list[float] = []

    def __call__(self, step, t, state) -> bool:
        energy = exchange_energy(state.m_curr)
        self.history.append(energy)
        if len(self.history) < 2:
            return False
        prev = self.history[-2]
        change = abs(energy - prev) / max(abs(prev), np.finfo(float).tiny)
        return change < self.rel_tol
