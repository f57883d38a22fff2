"""Solution transfer between non-matching tetrahedral meshes.

The WF pipeline has three steps:

1. *synchronise* the discontinuous source field into single-valued Hermite
   data (vertex values/gradients, edge-midpoint perpendicular derivatives);
2. build the Worsey-Farin C1 spline on the source mesh from that data (or,
   in ``c0`` mode, the global L2 projection of the source field onto the C0
   piecewise-cubic space of the refined source mesh);
3. L2-project the spline onto the degree-``k`` discontinuous space of the
   target mesh, element by element.

With ``report=True`` the transfer functions also return the mass change of
every step.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .bernstein import CUBIC_INDICES, bernstein_basis, reference_mass_matrix
from .bvh import locate_points
from .coefficients import COEFF_MAP, WFSpline
from .mesh import TetMesh
from .quadrature import AdaptiveConfig, QuadRule, adaptive_integrals, gauss_legendre_cube, rule_56
from .smoothing import PiecewiseField, build_edge_frames, synchronize, vertex_average
from .split import SPLIT_NODES, SPLIT_OPPOSITE, SUBTET_NODES, SplitSet, build_splits

__all__ = [
    "THREADS_ENV",
    "TransferConfig",
    "GlobalDofTable",
    "MassReport",
    "TransferResult",
    "build_dof_table",
    "project_analytic",
    "project_sampler",
    "transfer_wf",
    "transfer_linear",
    "transfer_l2",
    "transfer",
    "global_spline_projection",
    "mass",
    "l2_error",
    "l2_points",
    "rms",
    "default_threads",
]

log = logging.getLogger(__name__)

#: environment variable holding the default worker-thread count
THREADS_ENV = "WFSPLINE_THREADS"
L2_ERROR_POINTS = 41
MAX_DEGREE = 3


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


@dataclass(frozen=True)
class TransferConfig:
    k: int = 1
    quad: str = "fixed"  # "fixed" | "adaptive"
    spline: str = "c1"  # "c1" (geometric WF) | "c0" (global projection)
    adaptive: AdaptiveConfig = field(default_factory=AdaptiveConfig)
    threads: int | None = None

    def __post_init__(self):
        if self.k not in (1, 2, 3):
            raise ValueError(f"target degree k must be 1, 2 or 3 (got {self.k})")
        if self.quad not in ("fixed", "adaptive"):
            raise ValueError(f"quadrature mode must be 'fixed' or 'adaptive' (got {self.quad!r})")
        if self.spline not in ("c1", "c0"):
            raise ValueError(f"spline mode must be 'c1' or 'c0' (got {self.spline!r})")

    @property
    def n_threads(self) -> int:
        return default_threads() if self.threads is None else max(1, int(self.threads))


# ---------------------------------------------------------------------------
# helpers


def _map_chunks(fn, n: int, threads: int, chunk: int = 50_000):
    """Apply ``fn(slice)`` to consecutive chunks of ``range(n)``; results in order."""
    slices = [slice(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    if threads <= 1 or len(slices) <= 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, slices))


@lru_cache(maxsize=None)
def _mass_factor(k: int):
    return scipy.linalg.cho_factor(reference_mass_matrix(k))


def _local_solve(mesh: TetMesh, k: int, rhs: np.ndarray) -> np.ndarray:
    """Solve vol * M_ref c = rhs for every element; rhs (ne, nb)."""
    c = scipy.linalg.cho_solve(_mass_factor(k), rhs.T).T
    return c / mesh.volumes[:, None]


def project_sampler(sampler, mesh: TetMesh, k: int, quad: str = "fixed", adaptive: AdaptiveConfig | None = None,
                    rule: QuadRule | None = None, threads: int = 1) -> PiecewiseField:
    """L2-project onto the degree-``k`` discontinuous space of ``mesh``.

    ``sampler(x, owner)`` returns values at points ``x`` (m, 3) that lie in
    target elements ``owner`` (m,).
    """
    if k < 0 or k > MAX_DEGREE:
        raise ValueError(f"degree must be in 0..{MAX_DEGREE}")
    rule = rule_56() if rule is None else rule
    ne = mesh.n_elements
    if quad == "fixed":
        x = np.einsum("qk,ekd->eqd", rule.points, mesh.points).reshape(-1, 3)
        owner = np.repeat(np.arange(ne), len(rule))
        parts = _map_chunks(lambda s: np.asarray(sampler(x[s], owner[s]), dtype=float), len(x), threads)
        vals = np.concatenate(parts).reshape(ne, len(rule))
        B = bernstein_basis(k, rule.points)  # (nq, nb)
        rhs = mesh.volumes[:, None] * ((vals * rule.weights) @ B)
    elif quad == "adaptive":
        cfg = AdaptiveConfig() if adaptive is None else adaptive

        def integrand(xx, own):
            parts = _map_chunks(lambda s: np.asarray(sampler(xx[s], own[s]), dtype=float), len(xx), threads)
            v = np.concatenate(parts)
            lam = mesh.barycentric_coords(own, xx)
            return v[:, None] * bernstein_basis(k, lam)

        rhs, levels, conv = adaptive_integrals(integrand, mesh.points, cfg, rule)
        if not conv.all():
            log.warning("adaptive quadrature hit max_levels=%d on %d of %d elements", cfg.max_levels, (~conv).sum(), ne)
    else:
        raise ValueError(f"unknown quadrature mode {quad!r}")
    return PiecewiseField(mesh, k, _local_solve(mesh, k, rhs))


def project_analytic(f, mesh: TetMesh, k: int, quad: str = "fixed", adaptive: AdaptiveConfig | None = None,
                     rule: QuadRule | None = None) -> PiecewiseField:
    """Element-local L2 projection of a vectorised function ``f`` (n, 3) -> (n,)."""
    return project_sampler(lambda x, _owner: f(x), mesh, k, quad, adaptive, rule)


# ---------------------------------------------------------------------------
# global C0 projection onto the refined piecewise-cubic space


@dataclass(frozen=True, eq=False)
class GlobalDofTable:
    """Global numbering of the distinct cubic nodes of the WF-refined mesh.

    ``macro[e, c-1]`` is the global dof of coefficient ``c`` (1..91) of
    element ``e``; ``subtet[e, alpha-1]`` lists the 20 dofs of subtet
    ``alpha`` in canonical multi-index order.
    """

    n_dofs: int
    macro: np.ndarray  # (ne, 91)
    subtet: np.ndarray  # (ne, 12, 20)
    keys: np.ndarray  # (n_dofs, 3) sorted node-symbol triples


@lru_cache(maxsize=None)
def _coefficient_labels() -> np.ndarray:
    """(91, 3) split-node labels whose average is each coefficient's domain point."""
    out = np.zeros((91, 3), dtype=np.int64)
    seen = set()
    for a in range(12):
        nodes = SUBTET_NODES[a]
        for j, mi in enumerate(CUBIC_INDICES):
            c = int(COEFF_MAP[a, j])
            if c in seen:
                continue
            seen.add(c)
            out[c - 1] = [nodes[v] for v in range(4) for _ in range(mi[v])]
    assert len(seen) == 91
    return out


def build_dof_table(mesh: TetMesh) -> GlobalDofTable:
    nv, nf, ne = mesh.n_vertices, len(mesh.faces), mesh.n_elements
    # per element: split-node label -> global symbol
    symbol = np.zeros((ne, 92), dtype=np.int64)
    symbol[:, 1:5] = mesh.tets
    for s, node in enumerate(SPLIT_NODES):
        symbol[:, node] = nv + mesh.tet_faces[:, SPLIT_OPPOSITE[s]]
    symbol[:, 91] = nv + nf + np.arange(ne)
    labels = _coefficient_labels()
    keys = np.sort(symbol[:, labels], axis=2).reshape(-1, 3)  # (ne*91, 3)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    macro = inv.reshape(ne, 91)
    subtet = macro[:, COEFF_MAP - 1]
    return GlobalDofTable(len(uniq), macro, subtet, uniq)


def _assemble_mass(splits: SplitSet, table: GlobalDofTable, block: int = 2000) -> scipy.sparse.csr_matrix:
    Mref = reference_mass_matrix(3)
    vol = splits.volumes()
    ne = len(vol)
    M = scipy.sparse.csr_matrix((table.n_dofs, table.n_dofs))
    for s in range(0, ne, block):
        ids = table.subtet[s : s + block].reshape(-1, 20)
        data = (vol[s : s + block].reshape(-1)[:, None, None] * Mref[None]).reshape(-1)
        rows = np.repeat(ids, 20, axis=1).reshape(-1)
        cols = np.tile(ids, (1, 20)).reshape(-1)
        M = M + scipy.sparse.coo_matrix((data, (rows, cols)), shape=M.shape).tocsr()
    return M


def _subtet_vertices(mesh: TetMesh, splits: SplitSet) -> np.ndarray:
    """(ne, 12, 4, 3) subtet vertex coordinates."""
    nodes = np.zeros((mesh.n_elements, 92, 3))
    nodes[:, 1:5] = mesh.points
    for s, node in enumerate(SPLIT_NODES):
        nodes[:, node] = splits.split_points[:, s]
    nodes[:, 91] = splits.incenter
    return nodes[:, np.array(SUBTET_NODES)]


def global_spline_projection(field: PiecewiseField, splits: SplitSet | None = None,
                             table: GlobalDofTable | None = None, rule: QuadRule | None = None,
                             rtol: float = 1e-12, return_info: bool = False):
    """L2 projection of ``field`` onto the C0 cubic spline space of its WF-refined mesh.

    Returns the (ne, 91) macro coefficients.  The mass system is solved by
    Jacobi-preconditioned conjugate gradients; failure to reach ``rtol``
    within ``50 * sqrt(n)`` iterations raises :class:`RuntimeError`.
    """
    mesh = field.mesh
    splits = build_splits(mesh) if splits is None else splits
    table = build_dof_table(mesh) if table is None else table
    rule = rule_56() if rule is None else rule
    M = _assemble_mass(splits, table)

    # rhs: exact for source degree <= 3 (integrand degree <= 6)
    sub = _subtet_vertices(mesh, splits)  # (ne, 12, 4, 3)
    vol = splits.volumes()
    B3 = bernstein_basis(3, rule.points)  # (nq, 20)
    x = np.einsum("qk,eakd->eaqd", rule.points, sub)
    ne, nq = mesh.n_elements, len(rule)
    owner = np.repeat(np.arange(ne), 12 * nq)
    lam = mesh.barycentric_coords(owner, x.reshape(-1, 3))
    u = field.values_at(owner, lam).reshape(ne, 12, nq)
    local = vol[..., None] * np.einsum("eaq,q,qb->eab", u, rule.weights, B3)
    b = np.bincount(table.subtet.reshape(-1), weights=local.reshape(-1), minlength=table.n_dofs)

    n = table.n_dofs
    maxiter = int(np.ceil(50 * np.sqrt(n)))
    precond = scipy.sparse.diags(1.0 / M.diagonal())
    it = [0]

    def count(_):
        it[0] += 1

    bnorm = max(np.linalg.norm(b), 1e-300)
    sol = None
    res = np.inf
    # scipy's cg can stop early with info == 0 (e.g. on breakdown); judge by the
    # true residual and restart from the current iterate while budget remains
    while res > rtol and it[0] < maxiter:
        start = it[0]
        sol, _ = scipy.sparse.linalg.cg(M, b, x0=sol, rtol=rtol, atol=0.0, maxiter=maxiter - start,
                                        M=precond, callback=count)
        res = np.linalg.norm(M @ sol - b) / bnorm
        if it[0] == start:
            break
    if res > rtol:
        raise RuntimeError(
            f"global projection did not converge in {maxiter} iterations: relative residual {res:.3e} (target {rtol:g})"
        )
    coeffs = sol[table.macro]
    if return_info:
        return coeffs, {"dofs": n, "iterations": it[0], "residual": res}
    return coeffs


# ---------------------------------------------------------------------------
# transfers


@dataclass
class MassReport:
    """Per-step signed mass changes; ``total`` is the absolute end-to-end change."""

    source: float
    sync: float
    spline_rep: float
    l2_proj: float
    total: float

    ROWS = ("Sync", "Spline-Rep", "L2-proj", "Total")

    def rows(self) -> list[tuple[str, float]]:
        return list(zip(self.ROWS, (self.sync, self.spline_rep, self.l2_proj, self.total)))


@dataclass
class TransferResult:
    field: PiecewiseField
    report: MassReport
    intermediate: object = None  # the WF spline or P1 interpolant, when built


def _quadrature_mass(field: PiecewiseField, rule: QuadRule) -> float:
    """Rule-based re-integration (mass of the field the pipeline samples)."""
    mesh = field.mesh
    B = bernstein_basis(field.degree, rule.points)
    vals = field.coeffs @ B.T  # (ne, nq)
    return float(np.sum(mesh.volumes * (vals @ rule.weights)))


def _spline_sampler(spline: WFSpline):
    def sample(x, _owner):
        elems = locate_points(spline.mesh, spline.bvh, x)
        return spline.evaluate(x, elems, gradient=False)

    return sample


def _field_sampler(src: PiecewiseField):
    bvh = src.bvh

    def sample(x, _owner):
        elems = locate_points(src.mesh, bvh, x)
        return src.evaluate(x, elems)

    return sample


def build_source_spline(field: PiecewiseField, spline: str = "c1", splits: SplitSet | None = None) -> WFSpline:
    """Step 1+2: the WF spline representation of a source field."""
    mesh = field.mesh
    splits = build_splits(mesh) if splits is None else splits
    if spline == "c1":
        data = synchronize(field, build_edge_frames(mesh))
        return WFSpline.from_hermite(mesh, data, splits)
    if spline == "c0":
        # no synchronisation/smoothing in global mode
        return WFSpline(mesh, global_spline_projection(field, splits), splits)
    raise ValueError(f"unknown spline mode {spline!r}")


def transfer_wf(field: PiecewiseField, target: TetMesh, cfg: TransferConfig = TransferConfig(),
                splits: SplitSet | None = None, report: bool = False):
    """Synchronise, build the WF spline and project it onto ``target``."""
    rule = rule_56()
    s = build_source_spline(field, cfg.spline, splits)
    out = project_sampler(_spline_sampler(s), target, cfg.k, cfg.quad, cfg.adaptive, rule, cfg.n_threads)
    if not report:
        return out
    src_mass = field.integral()
    sm = s.integral()
    rep = MassReport(src_mass, _quadrature_mass(field, rule) - src_mass, sm - src_mass, out.integral() - sm,
                     abs(out.integral() - src_mass))
    return TransferResult(out, rep, s)


def linear_interpolant(field: PiecewiseField) -> PiecewiseField:
    """Continuous P1 interpolant of the vertex-averaged source values."""
    mesh = field.mesh
    vv = vertex_average(mesh, field.vertex_values())
    return PiecewiseField(mesh, 1, vv[mesh.tets])


def transfer_linear(field: PiecewiseField, target: TetMesh, k: int = 1, quad: str = "fixed",
                    threads: int | None = None, report: bool = False, adaptive: AdaptiveConfig | None = None):
    """Vertex-value synchronisation, P1 interpolation, degree-``k`` projection."""
    rule = rule_56()
    p1 = linear_interpolant(field)
    nthreads = default_threads() if threads is None else threads
    out = project_sampler(_field_sampler(p1), target, k, quad, adaptive, rule, nthreads)
    if not report:
        return out
    src_mass = field.integral()
    pm = p1.integral()
    rep = MassReport(src_mass, _quadrature_mass(field, rule) - src_mass, pm - src_mass, out.integral() - pm,
                     abs(out.integral() - src_mass))
    return TransferResult(out, rep, p1)


def transfer_l2(field: PiecewiseField, target: TetMesh, k: int = 1, quad: str = "fixed",
                threads: int | None = None, report: bool = False, adaptive: AdaptiveConfig | None = None):
    """Direct projection of the discontinuous source onto the target space."""
    rule = rule_56()
    nthreads = default_threads() if threads is None else threads
    out = project_sampler(_field_sampler(field), target, k, quad, adaptive, rule, nthreads)
    if not report:
        return out
    src_mass = field.integral()
    rep = MassReport(src_mass, _quadrature_mass(field, rule) - src_mass, 0.0, out.integral() - src_mass,
                     abs(out.integral() - src_mass))
    return TransferResult(out, rep, None)


def transfer(method: str, field: PiecewiseField, target: TetMesh, cfg: TransferConfig = TransferConfig(),
             report: bool = False):
    """Dispatch on ``method`` in {"wf", "linear", "l2"}."""
    if method == "wf":
        return transfer_wf(field, target, cfg, report=report)
    if method == "linear":
        return transfer_linear(field, target, cfg.k, cfg.quad, cfg.n_threads, report, cfg.adaptive)
    if method == "l2":
        return transfer_l2(field, target, cfg.k, cfg.quad, cfg.n_threads, report, cfg.adaptive)
    raise ValueError(f"unknown transfer method {method!r}")


# ---------------------------------------------------------------------------
# measures


def mass(obj, quad: str = "exact", rule: QuadRule | None = None, adaptive: AdaptiveConfig | None = None) -> float:
    """Integral of a :class:`PiecewiseField` or :class:`WFSpline` over its mesh.

    ``quad="exact"`` uses the closed form (mean Bernstein coefficient times
    volume); ``"fixed"``/``"adaptive"`` integrate numerically per element.
    """
    if quad == "exact":
        return obj.integral()
    mesh = obj.mesh
    rule = rule_56() if rule is None else rule
    if isinstance(obj, PiecewiseField):
        def f(x, owner):
            return obj.values_at(owner, mesh.barycentric_coords(owner, x))
    else:
        def f(x, owner):
            return obj.evaluate(x, owner, gradient=False)
    if quad == "fixed":
        cfg = AdaptiveConfig(max_levels=0)
    elif quad == "adaptive":
        cfg = AdaptiveConfig() if adaptive is None else adaptive
    else:
        raise ValueError(f"unknown quadrature mode {quad!r}")
    vals, _, _ = adaptive_integrals(f, mesh.points, cfg, rule)
    return float(vals.sum())


@lru_cache(maxsize=4)
def l2_points(n: int = L2_ERROR_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Points (n**3, 3) and weights of the error metric's tensor Gauss rule."""
    pts, w, _ = gauss_legendre_cube(n)
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def rms(diff, n: int = L2_ERROR_POINTS) -> float:
    """Root-mean-square of values ``diff`` given at :func:`l2_points`."""
    _, w = l2_points(n)
    d = np.asarray(diff, dtype=float)
    return float(np.sqrt(np.sum(w * d * d) / np.sum(w)))


def l2_error(candidate, exact, n: int = L2_ERROR_POINTS) -> float:
    """sqrt(mean-square difference) over the unit cube by an n^3 tensor Gauss rule.

    ``candidate`` and ``exact`` map (m, 3) points to (m,) values.
    """
    pts, _ = l2_points(n)
    return rms(np.asarray(candidate(pts), dtype=float) - np.asarray(exact(pts), dtype=float), n)
