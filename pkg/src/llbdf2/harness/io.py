"""CSV tables and field snapshots (legacy VTK structured points, plain CSV)."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..mesh import VectorField

TABLE_HEADER = ["k", "h", "err_inf", "err_l2", "err_h1"]


def _fmt(x: float) -> str:
    # 17 significant digits round-trip doubles exactly.
    return f"{x:.16e}"


def _open(path, mode="w"):
    path = Path(path)
    try:
        return path.open(mode, newline="")
    except OSError as exc:
        raise OSError(f"cannot open {path}: {exc.strerror}") from exc


def export_csv(table, path) -> Path:
    """Write ``k,h,err_inf,err_l2,err_h1`` rows and, with two or more rows, an ``order`` footer."""
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_HEADER)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])
        if table.orders:
            w.writerow(["order", ""] + [f"{o:.6f}" for o in table.orders])
    return Path(path)


def read_table_csv(path):
    """Parse a file written by :func:`export_csv` into ``(rows, orders)``."""
    rows, orders = [], ()
    with _open(path, "r") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TABLE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for rec in reader:
            if not rec:
                continue
            if rec[0] == "order":
                orders = tuple(float(v) for v in rec[2:])
            else:
                rows.append(tuple(float(v) for v in rec))
    return rows, orders


def export_stability_csv(table, path) -> Path:
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(["k", "h", "err_inf"])
        for i, k in enumerate(table.ks):
            for j, h in enumerate(table.hs):
                if np.isfinite(table.err_inf[i, j]):
                    w.writerow([_fmt(k), _fmt(h), _fmt(table.err_inf[i, j])])
    return Path(path)


def read_points_csv(path):
    """Two-column ``step,error`` file; a non-numeric first line is taken as a header."""
    points = []
    with _open(path, "r") as fh:
        for n, rec in enumerate(csv.reader(fh)):
            if not rec or rec[0].startswith("#"):
                continue
            try:
                points.append((float(rec[0].replace("D", "e")), float(rec[1].replace("D", "e"))))
            except ValueError:
                if n == 0:
                    continue
                raise ValueError(f"{path}: line {n + 1} is not a step,error pair")
    return points


def _padded3(field: VectorField):
    """Interior values as a ``(nx, ny, nz, 3)`` array plus spacing and origin triples."""
    g = field.grid
    values = field.interior
    if g.dim == 1:
        values = values[:, None, None, :]
    spacing = (g.h_x, g.h_y, g.h_z)
    origin = tuple(h / 2 for h in spacing)
    return values, spacing, origin


def export_field(field: VectorField, path) -> Path:
    """Legacy ASCII VTK ``STRUCTURED_POINTS`` file with a ``magnetization`` vector attribute."""
    values, spacing, origin = _padded3(field)
    nx, ny, nz = values.shape[:3]
    # VTK wants x varying fastest.
    flat = values.transpose(2, 1, 0, 3).reshape(-1, 3)
    with _open(path) as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("magnetization snapshot\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} {nz}\n")
        fh.write("ORIGIN {} {} {}\n".format(*(repr(float(o)) for o in origin)))
        fh.write("SPACING {} {} {}\n".format(*(repr(float(s)) for s in spacing)))
        fh.write(f"POINT_DATA {nx * ny * nz}\n")
        fh.write("VECTORS magnetization double\n")
        np.savetxt(fh, flat, fmt="%.16e")
    return Path(path)


def export_field_csv(field: VectorField, path) -> Path:
    """Plain CSV with columns ``i,j,k,x,y,z,u,v,w`` (1-based cell indices)."""
    values, spacing, _ = _padded3(field)
    nx, ny, nz = values.shape[:3]
    i, j, k = np.meshgrid(np.arange(1, nx + 1), np.arange(1, ny + 1), np.arange(1, nz + 1), indexing="ij")
    cols = [i.ravel(), j.ravel(), k.ravel()]
    cols += [(idx.ravel() - 0.5) * h for idx, h in zip((i, j, k), spacing)]
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "k", "x", "y", "z", "u", "v", "w"])
        vals = values.reshape(-1, 3)
        for n in range(vals.shape[0]):
            w.writerow([int(cols[0][n]), int(cols[1][n]), int(cols[2][n])]
                       + [_fmt(cols[c][n]) for c in (3, 4, 5)] + [_fmt(v) for v in vals[n]])
    return Path(path)
