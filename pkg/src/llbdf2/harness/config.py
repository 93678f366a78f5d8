"""Flat ``key = value`` study configuration files and the built-in table presets."""
from __future__ import annotations

import itertools
from pathlib import Path

from ..linear_system import SolverConfig
from ..mesh import make_grid
from .studies import StudyConfig

KEYS = {
    "mode", "dim", "nx", "ny", "nz", "dt", "t_final", "alpha", "solver", "solver_tol",
    "out_table", "out_field", "h_app_x", "h_app_y", "h_app_z",
    # Extensions: reference run, initial data and the CI ladder cut.
    "ref_dt", "ref_nx", "initial", "quick",
}

PRESETS = {
    # 1-D manufactured solution, h = k.
    "table1": {"mode": "mms-1d", "dt": "5.0D-3, 2.5D-3, 1.25D-3, 6.25D-4, 3.125D-4",
               "nx": "200, 400, 800, 1600, 3200", "alpha": "0.01", "t_final": "1"},
    "table2": {"mode": "stability-1d", "dt": "2.0D-1, 1.0D-1, 5.0D-2, 2.5D-2, 1.25D-2, 6.25D-3",
               "nx": "10, 20, 40, 80", "alpha": "0.01", "t_final": "1"},
    # Unforced self-convergence; the reference run uses the same h (temporal) or h = 1/3^8 (spatial).
    "table3": {"mode": "reference-1d", "dt": "5.0D-3, 2.5D-3, 1.25D-3, 6.25D-4, 3.125D-4",
               "nx": "10000", "ref_dt": "1.0D-4", "ref_nx": "10000", "alpha": "0.01",
               "t_final": "1", "initial": "profile"},
    "table6": {"mode": "reference-1d", "dt": "1.0D-4", "nx": "9, 27, 81, 243, 729",
               "ref_dt": "1.0D-4", "ref_nx": "6561", "alpha": "0.01", "t_final": "1",
               "initial": "profile"},
    "table4": {"mode": "stability-3d", "dt": "0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125",
               "nx": "4, 8, 16, 32", "alpha": "0.01", "t_final": "1"},
    "table5": {"mode": "mms-3d", "dt": "0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625",
               "nx": "32", "alpha": "0.01", "t_final": "1"},
}


def parse_number(text: str) -> float:
    """Parse a float, accepting Fortran-style ``D`` exponents (``5.0D-3``)."""
    return float(text.strip().replace("D", "e").replace("d", "e"))


def parse_list(text: str) -> list[float]:
    return [parse_number(t) for t in str(text).split(",") if t.strip()]


def read_config(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _broadcast(*lists):
    n = max(len(v) for v in lists)
    for v in lists:
        if len(v) not in (1, n):
            raise ValueError("ladder lists must have equal length or a single entry")
    return [v * n if len(v) == 1 else v for v in lists]


def _grids(values: dict, dim: int) -> list:
    nx = [int(v) for v in parse_list(values["nx"])]
    if dim == 1:
        return [make_grid(1, n) for n in nx]
    ny = [int(v) for v in parse_list(values.get("ny", values["nx"]))]
    nz = [int(v) for v in parse_list(values.get("nz", values["nx"]))]
    nx, ny, nz = _broadcast(nx, ny, nz)
    return [make_grid(3, (a, b, c)) for a, b, c in zip(nx, ny, nz)]


def _truthy(value) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def build_study(values: dict) -> StudyConfig:
    """Turn parsed key/value pairs into a :class:`StudyConfig`."""
    mode = values.get("mode", "single-run")
    dim = int(values.get("dim", 3 if mode.endswith("3d") else 1))
    dts = parse_list(values["dt"])
    grids = _grids(values, dim)
    if mode.startswith("stability"):
        ladder = list(itertools.product(dts, grids))
    else:
        dts, grids = _broadcast(dts, grids)
        ladder = list(zip(dts, grids))
    if _truthy(values.get("quick", "0")):
        # CI ladder: drop time steps finer than 1/128.
        ladder = [(k, g) for k, g in ladder if k >= 1 / 128 - 1e-15]
    reference = None
    if "ref_dt" in values:
        ref_grid = _grids({"nx": values.get("ref_nx", values["nx"])}, dim)[0]
        reference = (parse_number(values["ref_dt"]), ref_grid)
    solver = None
    method = values.get("solver", "auto")
    if method != "auto" or "solver_tol" in values:
        if method == "auto":
            method = "direct" if dim == 1 else "iterative"
        solver = SolverConfig(method, parse_number(values.get("solver_tol", "1e-10")))
    h_app = None
    if any(f"h_app_{c}" in values for c in "xyz"):
        h_app = tuple(parse_number(values.get(f"h_app_{c}", "0")) for c in "xyz")
    return StudyConfig(
        mode=mode, ladder=ladder, alpha=parse_number(values.get("alpha", "0.01")),
        t_final=parse_number(values.get("t_final", "1")), reference=reference, solver=solver,
        h_app=h_app, initial=values.get("initial", "profile" if mode == "reference-1d" else "mms"),
        out_table=values.get("out_table"), out_field=values.get("out_field"),
    )
