"""Convergence, conservation and sampling studies with CSV/VTK output."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import AnalyticField
from .mesh import TetMesh
from .meshgen import SOURCE_NAME, TARGET_NAME
from .mshio import load_mesh
from .quadrature import AdaptiveConfig, gauss_legendre_cube
from .transfer import TransferConfig, l2_points, project_analytic, rms, transfer

__all__ = [
    "ORDER_BANDS",
    "StudyReport",
    "load_grid",
    "observed_orders",
    "fitted_order",
    "run_convergence",
    "check_orders",
    "run_conservation",
    "sample_points",
    "run_sample",
    "write_vtk",
    "format_float",
]

log = logging.getLogger(__name__)

#: accepted observed-order bands for the WF transfer of a smooth field,
#: keyed by k: (solution band, gradient-magnitude band)
ORDER_BANDS = {
    1: ((1.8, 2.3), (0.8, 1.3)),
    2: ((2.6, 3.3), (1.7, 2.3)),
}


def format_float(x) -> str:
    """15 significant digits in scientific notation."""
    return f"{float(x):.14e}"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else format_float(v)
    return str(v)


@dataclass
class StudyReport:
    """A table of study results plus free-form metadata."""

    kind: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def to_csv(self, path=None) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(_fmt(v) for v in r) for r in self.rows]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def pretty(self) -> str:
        cells = [self.columns] + [[_fmt(v) for v in r] for r in self.rows]
        widths = [max(len(c[j]) for c in cells) for j in range(len(self.columns))]
        return "\n".join("  ".join(c[j].rjust(widths[j]) for j in range(len(c))) for c in cells)


def load_grid(mesh_dir, level: int) -> tuple[TetMesh, TetMesh]:
    """Source and target meshes of one grid level from ``mesh_dir``."""
    d = Path(mesh_dir)
    ps = d / SOURCE_NAME.format(level=level)
    pt = d / TARGET_NAME.format(level=level)
    for p in (ps, pt):
        if not p.is_file():
            raise FileNotFoundError(f"missing mesh file {p} (create it with 'gen-meshes')")
    return load_mesh(ps), load_mesh(pt)


def observed_orders(h, err) -> list[float | None]:
    """log(e_i / e_{i+1}) / log(h_i / h_{i+1}) between consecutive grids; None for the first."""
    out: list[float | None] = [None]
    for i in range(1, len(h)):
        out.append(math.log(err[i - 1] / err[i]) / math.log(h[i - 1] / h[i]))
    return out


def fitted_order(h, err) -> float:
    """Least-squares slope of log(err) against log(h) over all grids."""
    return float(np.polyfit(np.log(np.asarray(h, float)), np.log(np.asarray(err, float)), 1)[0])


def run_convergence(u: AnalyticField, levels, k: int, method: str, mesh_dir=None, meshes=None,
                    cfg: TransferConfig | None = None) -> StudyReport:
    """Transfer error versus grid level.

    On each level the analytic field is L2-projected onto the degree-``k``
    source space and transferred to the target mesh; the L2 error of the
    transferred solution and of its gradient magnitude against ``u`` are
    measured with the tensor Gauss metric.  ``meshes`` may supply
    ``{level: (source, target)}`` instead of reading ``mesh_dir``.
    """
    cfg = TransferConfig(k=k) if cfg is None else cfg
    cols = ["level", "n_source", "n_target", "h", "err_l2", "order_l2", "err_grad", "order_grad"]
    rep = StudyReport("convergence", cols, meta={"field": u.name, "k": k, "method": method})
    h, e, eg, counts = [], [], [], []
    for level in levels:
        src, tgt = meshes[level] if meshes is not None else load_grid(mesh_dir, level)
        source = project_analytic(u, src, k)
        target = transfer(method, source, tgt, cfg)
        pts, _ = l2_points()
        vals, grads = target.evaluate(pts, gradient=True)
        err = rms(vals - u(pts))
        gerr = rms(np.linalg.norm(grads, axis=1) - np.linalg.norm(u.grad(pts), axis=1))
        log.info("level %d: err %.3e grad %.3e", level, err, gerr)
        h.append(src.h)
        e.append(err)
        eg.append(gerr)
        counts.append((src.n_elements, tgt.n_elements))
    o, og = observed_orders(h, e), observed_orders(h, eg)
    for i, level in enumerate(levels):
        rep.rows.append([level, counts[i][0], counts[i][1], h[i], e[i], o[i], eg[i], og[i]])
    return rep


def check_orders(rep: StudyReport, k: int) -> list[str]:
    """Band violations of the fitted orders over all grids of ``rep`` (empty list = pass)."""
    if k not in ORDER_BANDS or len(rep.rows) < 2:
        return []
    (lo, hi), (glo, ghi) = ORDER_BANDS[k]
    h = rep.column("h")
    o, og = fitted_order(h, rep.column("err_l2")), fitted_order(h, rep.column("err_grad"))
    problems = []
    if not lo <= o <= hi:
        problems.append(f"solution order {o:.3f} outside [{lo}, {hi}]")
    if not glo <= og <= ghi:
        problems.append(f"gradient order {og:.3f} outside [{glo}, {ghi}]")
    return problems


#: (column name, method, TransferConfig overrides)
CONSERVATION_VARIANTS = (
    ("geometric_c1", "wf", {"spline": "c1", "quad": "fixed"}),
    ("geometric_c1_adaptive", "wf", {"spline": "c1", "quad": "adaptive"}),
    ("global_c0_adaptive", "wf", {"spline": "c0", "quad": "adaptive"}),
)


def run_conservation(u: AnalyticField, source: TetMesh, target: TetMesh, k: int = 1, variants=None,
                     adaptive: AdaptiveConfig | None = None, threads: int | None = None) -> StudyReport:
    """Mass change of every pipeline step for each variant (one column each)."""
    variants = CONSERVATION_VARIANTS if variants is None else variants
    adaptive = AdaptiveConfig() if adaptive is None else adaptive
    field0 = project_analytic(u, source, k)
    cols = ["step"] + [name for name, _, _ in variants]
    results = []
    for name, method, opts in variants:
        cfg = TransferConfig(k=k, adaptive=adaptive, threads=threads, **opts)
        res = transfer(method, field0, target, cfg, report=True)
        log.info("%s: %s", name, res.report)
        results.append(res.report)
    rep = StudyReport("conservation", cols, meta={"field": u.name, "k": k, "source_mass": field0.integral()})
    for j, label in enumerate(results[0].ROWS):
        rep.rows.append([label] + [r.rows()[j][1] for r in results])
    return rep


# ---------------------------------------------------------------------------
# sampling


def sample_points(n: int) -> tuple[np.ndarray, tuple]:
    """Tensor Gauss points of the unit cube (n**3, 3), x varying fastest, and the 1-D axes."""
    _, _, axes = gauss_legendre_cube(n)
    Z, Y, X = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    return pts, axes


def write_vtk(path, n: int, axes, arrays: dict, kind: str = "structured_points", title: str = "wfspline samples") -> None:
    """Legacy ASCII VTK of point data on an n x n x n lattice (x fastest).

    ``structured_points`` places the samples on the uniform lattice spanning
    the first/last abscissa; ``rectilinear`` keeps the exact coordinates.
    """
    out = ["# vtk DataFile Version 3.0", title, "ASCII"]
    if kind == "structured_points":
        lo = [a[0] for a in axes]
        sp = [(a[-1] - a[0]) / (n - 1) if n > 1 else 1.0 for a in axes]
        out += ["DATASET STRUCTURED_POINTS", f"DIMENSIONS {n} {n} {n}",
                "ORIGIN " + " ".join(format_float(v) for v in lo),
                "SPACING " + " ".join(format_float(v) for v in sp)]
    elif kind == "rectilinear":
        out += ["DATASET RECTILINEAR_GRID", f"DIMENSIONS {n} {n} {n}"]
        for name, a in zip("XYZ", axes):
            out.append(f"{name}_COORDINATES {n} double")
            out.append(" ".join(format_float(v) for v in a))
    else:
        raise ValueError(f"unknown VTK dataset kind {kind!r}")
    out.append(f"POINT_DATA {n**3}")
    for name, vals in arrays.items():
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out.extend(format_float(v) for v in np.asarray(vals).ravel())
    Path(path).write_text("\n".join(out) + "\n")


def _write_sample_csv(path, pts, vals, gmag) -> None:
    data = np.column_stack([pts, vals, gmag])
    np.savetxt(path, data, fmt="%.14e", delimiter=",", header="x,y,z,value,grad_mag", comments="")


def run_sample(evaluate, n: int, out_dir=None, name: str = "samples", vtk_kind: str = "structured_points"):
    """Sample ``evaluate(pts) -> (values, gradients)`` on the n^3 Gauss lattice.

    Writes ``name.vtk`` and ``name.csv`` into ``out_dir`` when given and
    returns (points, values, gradient magnitudes).
    """
    if n < 1:
        raise ValueError("resolution must be positive")
    pts, axes = sample_points(n)
    vals, grads = evaluate(pts)
    vals = np.asarray(vals, dtype=float)
    gmag = np.linalg.norm(np.asarray(grads, dtype=float).reshape(-1, 3), axis=1)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_vtk(out / f"{name}.vtk", n, axes, {"value": vals, "grad_mag": gmag}, kind=vtk_kind)
        _write_sample_csv(out / f"{name}.csv", pts, vals, gmag)
    return pts, vals, gmag
