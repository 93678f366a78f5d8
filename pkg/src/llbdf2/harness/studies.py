"""Refinement studies: manufactured-solution ladders, self-convergence against a
fine reference run, and (k, h) stability sweeps."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..discrete_ops import norm_h1, norm_inf, norm_l2
from ..linear_system import SolverConfig
from ..mesh import GridSpec, NonFiniteFieldError, VectorField, restrict
from ..mms import ManufacturedSolution, forcing_callback, phi
from ..scheme import SchemeParams, SchemeState, StepFailure, run

log = logging.getLogger(__name__)

MODES = ("mms-1d", "mms-3d", "reference-1d", "stability-1d", "stability-3d", "single-run")
THREADS_ENV = "LLBDF2_THREADS"


@dataclass
class StudyConfig:
    mode: str
    ladder: list  # of (k, GridSpec)
    alpha: float = 0.01
    t_final: float = 1.0
    reference: Optional[tuple] = None  # (k_ref, GridSpec)
    solver: Optional[SolverConfig] = None  # None picks direct in 1-D, iterative in 3-D
    h_app: Optional[tuple] = None
    forced: Optional[bool] = None  # single-run only; defaults to forced for mms initial data
    initial: str = "mms"  # "mms" or "profile"
    out_table: Optional[str] = None
    out_field: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.ladder:
            raise ValueError("ladder must not be empty")
        if self.mode == "reference-1d" and self.reference is None:
            raise ValueError("reference mode needs a (k_ref, grid_ref) reference")

    def solver_for(self, grid: GridSpec) -> SolverConfig:
        if self.solver is not None:
            return self.solver
        return SolverConfig("direct" if grid.dim == 1 else "iterative")


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)  # (k, h, err_inf, err_l2, err_h1)
    orders: tuple = ()

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (-r[0], -r[1]))
        if not self.orders and len(self.rows) >= 2:
            self.orders = self.fit_orders()

    @property
    def refinement_column(self) -> int:
        """0 if k varies across rows (temporal or k = h ladders), else 1 (h)."""
        return 0 if len({r[0] for r in self.rows}) > 1 else 1

    def fit_orders(self) -> tuple:
        if len(self.rows) < 2:
            return ()
        c = self.refinement_column
        steps = [r[c] for r in self.rows]
        return tuple(fit_order(list(zip(steps, [r[col] for r in self.rows]))) for col in (2, 3, 4))

    def column(self, name: str) -> np.ndarray:
        index = {"k": 0, "h": 1, "err_inf": 2, "err_l2": 3, "err_h1": 4}[name]
        return np.array([r[index] for r in self.rows])


@dataclass
class StabilityTable:
    ks: list
    hs: list
    err_inf: np.ndarray  # shape (len(ks), len(hs))

    def value(self, k: float, h: float) -> float:
        i = int(np.argmin(np.abs(np.array(self.ks) - k)))
        j = int(np.argmin(np.abs(np.array(self.hs) - h)))
        return float(self.err_inf[i, j])


class StabilityFailure(RuntimeError):
    def __init__(self, k, h, cause):
        self.k, self.h, self.cause = k, h, cause
        super().__init__(f"run with k={k:g}, h={h:g} blew up: {cause}")


def fit_order(points: Sequence[tuple]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(step)``."""
    points = list(points)
    if len(points) < 2:
        raise ValueError("need at least two (step, error) points to fit an order")
    steps = np.array([p[0] for p in points], dtype=float)
    errors = np.array([p[1] for p in points], dtype=float)
    if np.any(errors <= 0) or np.any(steps <= 0):
        raise ValueError("steps and errors must be positive to take logarithms")
    if np.unique(steps).size < 2:
        raise ValueError("need at least two distinct step sizes")
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)


def error_norms(values: np.ndarray, exact: np.ndarray, grid: GridSpec) -> tuple:
    e = values - exact
    return norm_inf(e), norm_l2(e, grid), norm_h1(e, grid)


def reference_profile(grid: GridSpec) -> VectorField:
    """Unit, Neumann-compatible initial data ``(cos psi, sin psi, 0)``.

    ``psi`` is ``phi(x)`` in 1-D and ``phi(x) phi(y) phi(z)`` in 3-D.
    """
    def f(coords):
        psi = np.prod(phi(coords), axis=-1)
        return np.stack([np.cos(psi), np.sin(psi), np.zeros_like(psi)], axis=-1)
    return VectorField.from_function(grid, f)


def mms_params(k: float, grid: GridSpec, config: StudyConfig) -> tuple:
    solution = ManufacturedSolution(grid.dim)
    params = SchemeParams(alpha=config.alpha, k=k, t_final=config.t_final,
                          forcing=forcing_callback(solution, config.alpha),
                          h_app=config.h_app, solver=config.solver_for(grid))
    m0 = VectorField.from_function(grid, lambda c: solution.exact(c, 0.0))
    return solution, params, m0


def _check_step_count(k: float, t_final: float):
    ratio = t_final / k
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"t_final={t_final:g} is not an integer multiple of k={k:g}")


def _mms_row(args) -> tuple:
    k, grid, config = args
    _check_step_count(k, config.t_final)
    solution, params, m0 = mms_params(k, grid, config)
    state = run(m0, params)
    exact = solution.exact(grid.coordinates(), state.t_curr)
    norms = error_norms(state.m_curr.interior, exact, grid)
    log.info("k=%.4g h=%.4g: inf %.4e l2 %.4e h1 %.4e", k, grid.h_x, *norms)
    return (k, grid.h_x) + norms


def _map(func, items):
    threads = int(os.environ.get(THREADS_ENV, "1"))
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def converge_mms(config: StudyConfig) -> ConvergenceTable:
    """Run the forced manufactured-solution problem down the ladder."""
    if config.mode not in ("mms-1d", "mms-3d"):
        raise ValueError(f"converge_mms needs an mms mode, got {config.mode!r}")
    rows = []
    items = [(k, g, config) for k, g in config.ladder]
    for index, (k, g, _) in enumerate(items):
        if g.dim != int(config.mode[-2]):
            raise ValueError(f"ladder row {index} has a {g.dim}-D grid in {config.mode}")
    try:
        rows = _map(_mms_row, items)
    except StepFailure as exc:
        raise RuntimeError(f"ladder run failed: {exc}") from exc
    return ConvergenceTable(rows)


def _unforced_run(k: float, grid: GridSpec, config: StudyConfig) -> SchemeState:
    _check_step_count(k, config.t_final)
    params = SchemeParams(alpha=config.alpha, k=k, t_final=config.t_final,
                          h_app=config.h_app, solver=config.solver_for(grid))
    return run(reference_profile(grid), params)


def _reference_row(args) -> tuple:
    k, grid, config, ref_values, ref_grid = args
    state = _unforced_run(k, grid, config)
    ref = restrict(VectorField.from_interior(ref_grid, ref_values), grid)
    norms = error_norms(state.m_curr.interior, ref.interior, grid)
    log.info("k=%.4g h=%.4g: inf %.4e l2 %.4e h1 %.4e", k, grid.h_x, *norms)
    return (k, grid.h_x) + norms


def converge_reference(config: StudyConfig) -> ConvergenceTable:
    """Self-convergence of the unforced problem against one fine reference run.

    Rows on the reference grid are compared directly (temporal study); coarser
    rows are compared at coincident cell centers via factor-3 injection.
    """
    if config.reference is None:
        raise ValueError("reference configuration missing")
    k_ref, ref_grid = config.reference
    for k, g in config.ladder:
        if g.n != ref_grid.n:
            # Raises for grids that are not factor-3 ancestors of the reference.
            restrict(VectorField.zeros(ref_grid), g)
    ref_state = _unforced_run(k_ref, ref_grid, config)
    items = [(k, g, config, ref_state.m_curr.interior, ref_grid) for k, g in config.ladder]
    return ConvergenceTable(_map(_reference_row, items))


def _stability_cell(args):
    k, grid, config = args
    try:
        row = _mms_row((k, grid, config))
    except (StepFailure, NonFiniteFieldError, ArithmeticError) as exc:
        raise StabilityFailure(k, grid.h_x, exc) from exc
    if not np.all(np.isfinite(row)):
        raise StabilityFailure(k, grid.h_x, "non-finite error norm")
    return row


def stability_table(config: StudyConfig) -> StabilityTable:
    """``err_inf`` of the forced problem over every (k, grid) pair in the ladder."""
    if not config.mode.startswith("stability"):
        raise ValueError(f"stability_table needs a stability mode, got {config.mode!r}")
    mms_mode = "mms-" + config.mode.split("-")[1]
    sub = StudyConfig(mms_mode, config.ladder, config.alpha, config.t_final, solver=config.solver,
                      h_app=config.h_app)
    rows = _map(_stability_cell, [(k, g, sub) for k, g in config.ladder])
    ks = sorted({r[0] for r in rows}, reverse=True)
    hs = sorted({r[1] for r in rows}, reverse=True)
    grid = np.full((len(ks), len(hs)), np.nan)
    for r in rows:
        grid[ks.index(r[0]), hs.index(r[1])] = r[2]
    return StabilityTable(ks, hs, grid)


def run_single(config: StudyConfig) -> tuple[SchemeState, Optional[tuple]]:
    """One run of the first ladder entry; returns the state and MMS error norms if forced."""
    k, grid = config.ladder[0]
    forced = config.forced if config.forced is not None else config.initial == "mms"
    if forced:
        solution, params, m0 = mms_params(k, grid, config)
    else:
        params = SchemeParams(alpha=config.alpha, k=k, t_final=config.t_final,
                              h_app=config.h_app, solver=config.solver_for(grid))
        m0 = reference_profile(grid)
        if config.initial == "mms":
            m0 = VectorField.from_function(grid, lambda c: ManufacturedSolution(grid.dim).exact(c, 0.0))
    state = run(m0, params)
    norms = None
    if forced:
        norms = error_norms(state.m_curr.interior, solution.exact(grid.coordinates(), state.t_curr), grid)
    return state, norms
