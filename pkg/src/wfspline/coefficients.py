"""B-coefficients of the Worsey-Farin C1 cubic macroelement.

Every macro element carries 91 coefficients c1..c91.  Each of its 12
subtetrahedra reads 20 of them through :data:`COEFF_MAP`.  The
coefficients are determined by 28 Hermite data per element: values and
gradients at the four vertices and two derivatives perpendicular to each
edge at the edge midpoint.

Coefficient families (each is computed once per element, in this order):

1. vertex values c1..c4;
2. "vertex-directional" coefficients ``f(v) + Df(v).(q - v)/3`` along the
   edges, towards the face split points and towards the incenter;
3. "edge-interior" coefficients next to an edge of a triangle (v1, v2, q),
   fixed by the cross-edge derivative at the edge midpoint;
4. face-split combinations weighted by sigma (shells 0 and 1);
5. incenter combinations weighted by kappa (shell 2);
6. shell-2 face-split combinations and finally the incenter value c91.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .bernstein import CUBIC_INDICES, CubicBForm, decasteljau_eval, decasteljau_gradient, multi_indices
from .bvh import Bvh, build_bvh, locate_point, locate_points
from .mesh import INSIDE_TOL, LOCAL_EDGES, TetMesh
from .split import SPLIT_NODES, SplitSet, WFSplit, build_splits, locate_subtet

__all__ = [
    "COEFF_MAP",
    "GMSH_NODE",
    "HermiteData",
    "MacroCoefficients",
    "CoeffMap",
    "coeff_map",
    "edge_interior_coefficient",
    "compute_macro_coefficients",
    "compute_all_coefficients",
    "subtet_bform",
    "evaluate_wf",
    "WFSpline",
    "coefficient_domain_points",
]

# ---------------------------------------------------------------------------
# element mapping: (alpha, multi-index) -> coefficient number

_MAP_ROWS = {
    (3, 0, 0, 0): (1, 2, 3, 2, 4, 3, 4, 1, 3, 2, 1, 4),
    (0, 3, 0, 0): (2, 3, 1, 4, 3, 2, 1, 3, 4, 1, 4, 2),
    (0, 0, 3, 0): (5, 5, 5, 12, 12, 12, 19, 19, 19, 26, 26, 26),
    (0, 0, 0, 3): (91,) * 12,
    (2, 1, 0, 0): (33, 35, 39, 41, 38, 36, 43, 40, 37, 34, 44, 42),
    (1, 2, 0, 0): (34, 36, 40, 42, 37, 35, 44, 39, 38, 33, 43, 41),
    (0, 2, 1, 0): (9, 10, 11, 16, 17, 18, 23, 24, 25, 31, 32, 30),
    (0, 1, 2, 0): (6, 7, 8, 13, 14, 15, 20, 21, 22, 28, 29, 27),
    (1, 0, 2, 0): (8, 6, 7, 15, 13, 14, 22, 20, 21, 27, 28, 29),
    (2, 0, 1, 0): (11, 9, 10, 18, 16, 17, 25, 23, 24, 30, 31, 32),
    (1, 0, 0, 2): (47, 45, 46, 45, 51, 46, 51, 47, 46, 45, 47, 51),
    (2, 0, 0, 1): (50, 48, 49, 48, 52, 49, 52, 50, 49, 48, 50, 52),
    (0, 0, 1, 2): (53, 53, 53, 55, 55, 55, 57, 57, 57, 59, 59, 59),
    (0, 0, 2, 1): (54, 54, 54, 56, 56, 56, 58, 58, 58, 60, 60, 60),
    (0, 1, 0, 2): (45, 46, 47, 51, 46, 45, 47, 46, 51, 47, 51, 45),
    (0, 2, 0, 1): (48, 49, 50, 52, 49, 48, 50, 49, 52, 50, 52, 48),
    (1, 1, 1, 0): (61, 62, 63, 64, 65, 66, 67, 68, 69, 71, 72, 70),
    (1, 1, 0, 1): (73, 77, 78, 80, 79, 77, 87, 78, 79, 73, 87, 80),
    (1, 0, 1, 1): (76, 74, 75, 81, 83, 82, 84, 85, 86, 89, 88, 90),
    (0, 1, 1, 1): (74, 75, 76, 83, 82, 81, 85, 86, 84, 88, 90, 89),
}

#: local node number of each multi-index in the 20-node tetrahedron of the
#: Gmsh format (vertices, edge nodes, face nodes), in ``_MAP_ROWS`` order
GMSH_NODE = {mi: k + 1 for k, mi in enumerate(_MAP_ROWS)}

#: (12, 20) coefficient numbers (1-based) in canonical multi-index order
COEFF_MAP = np.array([[_MAP_ROWS[mi][a] for mi in CUBIC_INDICES] for a in range(12)], dtype=np.int64)
COEFF_MAP.setflags(write=False)


@dataclass(frozen=True)
class CoeffMap:
    """The (alpha, multi-index) -> coefficient-number association."""

    table: np.ndarray  # (12, 20), 1-based coefficient numbers
    gmsh: dict

    def __call__(self, alpha: int, mi) -> int:
        return int(self.table[alpha - 1, CUBIC_INDICES.index(tuple(mi))])

    def column(self, alpha: int) -> np.ndarray:
        return self.table[alpha - 1]


def coeff_map() -> CoeffMap:
    return CoeffMap(COEFF_MAP, dict(GMSH_NODE))


def coefficient_domain_points(split: WFSplit) -> np.ndarray:
    """Domain point of every coefficient c1..c91 (row k-1 for c_k)."""
    out = np.full((91, 3), np.nan)
    w = np.array(CUBIC_INDICES, dtype=float) / 3.0
    for a in range(12):
        out[COEFF_MAP[a] - 1] = w @ split.subtets[a]
    return out


# ---------------------------------------------------------------------------
# Hermite data


@dataclass
class HermiteData:
    """Interpolation data of one or more macro elements.

    Arrays have a leading element axis; single-element data uses length 1.

    values : (n, 4)       f at the vertices
    gradients : (n, 4, 3) Df at the vertices
    edge_derivs : (n, 6, 2) derivatives along the two edge-perpendicular
        frame vectors at the midpoint of each local edge (``LOCAL_EDGES``)
    frames : (n, 6, 2, 3) those frame vectors
    """

    values: np.ndarray
    gradients: np.ndarray
    edge_derivs: np.ndarray
    frames: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1, 4)
        n = len(self.values)
        self.gradients = np.asarray(self.gradients, dtype=float).reshape(n, 4, 3)
        self.edge_derivs = np.asarray(self.edge_derivs, dtype=float).reshape(n, 6, 2)
        self.frames = np.asarray(self.frames, dtype=float).reshape(n, 6, 2, 3)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, idx) -> "HermiteData":
        idx = np.atleast_1d(np.arange(len(self))[idx])
        return HermiteData(self.values[idx], self.gradients[idx], self.edge_derivs[idx], self.frames[idx])

    @classmethod
    def from_function(cls, tets, f, grad, frames=None) -> "HermiteData":
        """Exact data of a smooth function on elements ``tets`` (n, 4, 3).

        ``f`` maps (m, 3) points to (m,) values, ``grad`` to (m, 3) gradients.
        Without ``frames`` a per-edge frame is built from the local edge.
        """
        from .smoothing import edge_frame

        P = np.asarray(tets, dtype=float).reshape(-1, 4, 3)
        n = len(P)
        vals = np.asarray(f(P.reshape(-1, 3))).reshape(n, 4)
        grads = np.asarray(grad(P.reshape(-1, 3))).reshape(n, 4, 3)
        if frames is None:
            frames = np.empty((n, 6, 2, 3))
            for k, (a, b) in enumerate(LOCAL_EDGES):
                for i in range(n):
                    _, e1, e2 = edge_frame(P[i, b] - P[i, a])
                    frames[i, k] = e1, e2
        mids = np.stack([(P[:, a] + P[:, b]) / 2 for a, b in LOCAL_EDGES], axis=1)
        gm = np.asarray(grad(mids.reshape(-1, 3))).reshape(n, 6, 3)
        dperp = np.einsum("nkd,nkjd->nkj", gm, frames)
        return cls(vals, grads, dperp, frames)


@dataclass
class MacroCoefficients:
    """The 91 coefficients of one macro element, addressed 1..91."""

    c: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(91)

    def __getitem__(self, k: int) -> float:
        if not 1 <= k <= 91:
            raise IndexError(k)
        return float(self.c[k - 1])

    def subtet(self, alpha: int) -> np.ndarray:
        return self.c[COEFF_MAP[alpha - 1] - 1]


# ---------------------------------------------------------------------------
# coefficient formulas

# (coefficient, vertex node, target node): f(v) + Df(v).(target - v)/3
_DIRECTIONAL = (
    # face 123 / split node 5
    (9, 2, 5), (10, 3, 5), (11, 1, 5),
    (33, 1, 2), (34, 2, 1), (35, 2, 3), (36, 3, 2), (39, 3, 1), (40, 1, 3),
    (48, 2, 91), (49, 3, 91), (50, 1, 91),
    # face 243 / split node 12 (c18 runs from p2 towards p12)
    (16, 4, 12), (17, 3, 12), (18, 2, 12),
    (37, 3, 4), (38, 4, 3), (41, 2, 4), (42, 4, 2),
    (52, 4, 91),
    # face 413 / split node 19
    (23, 1, 19), (24, 3, 19), (25, 4, 19),
    (43, 4, 1), (44, 1, 4),
    # face 214 / split node 26
    (30, 2, 26), (31, 1, 26), (32, 4, 26),
)

# (coefficient, v1, v2, q, c300, c210, c120, c030, c201, c021) on the
# triangle (v1, v2, q); c201/c021 sit next to v1/v2 towards q
_EDGE_INTERIOR = (
    (61, 1, 2, 5, 1, 33, 34, 2, 11, 9),
    (62, 2, 3, 5, 2, 35, 36, 3, 9, 10),
    (63, 3, 1, 5, 3, 39, 40, 1, 10, 11),
    (64, 2, 4, 12, 2, 41, 42, 4, 18, 16),
    (65, 4, 3, 12, 4, 38, 37, 3, 16, 17),
    (66, 3, 2, 12, 3, 36, 35, 2, 17, 18),
    (67, 4, 1, 19, 4, 43, 44, 1, 25, 23),
    (68, 1, 3, 19, 1, 40, 39, 3, 23, 24),
    (69, 3, 4, 19, 3, 37, 38, 4, 24, 25),
    (70, 4, 2, 26, 4, 42, 41, 2, 32, 30),
    (71, 2, 1, 26, 2, 34, 33, 1, 30, 31),
    (72, 1, 4, 26, 1, 44, 43, 4, 31, 32),
    (73, 1, 2, 91, 1, 33, 34, 2, 50, 48),
    (77, 2, 3, 91, 2, 35, 36, 3, 48, 49),
    (78, 3, 1, 91, 3, 39, 40, 1, 49, 50),
    (79, 4, 3, 91, 4, 38, 37, 3, 52, 49),
    (80, 2, 4, 91, 2, 41, 42, 4, 48, 52),
    (87, 4, 1, 91, 4, 43, 44, 1, 52, 50),
)

# (coefficient, split region 0..3, (i1, i2, i3)): sum_k sigma_k c_ik
_SIGMA_SHELL0 = (
    (6, 0, (61, 9, 62)), (7, 0, (63, 62, 10)), (8, 0, (11, 61, 63)), (5, 0, (8, 6, 7)),
    (13, 1, (64, 16, 65)), (14, 1, (66, 65, 17)), (15, 1, (18, 64, 66)), (12, 1, (15, 13, 14)),
    (20, 2, (67, 23, 68)), (21, 2, (69, 68, 24)), (22, 2, (25, 67, 69)), (19, 2, (22, 20, 21)),
    (27, 3, (30, 71, 70)), (28, 3, (71, 31, 72)), (29, 3, (70, 72, 32)), (26, 3, (27, 28, 29)),
)
_SIGMA_SHELL1 = (
    (74, 0, (73, 48, 77)), (75, 0, (78, 77, 49)), (76, 0, (50, 73, 78)), (54, 0, (76, 74, 75)),
    (81, 1, (48, 80, 77)), (82, 1, (77, 79, 49)), (83, 1, (80, 52, 79)), (56, 1, (81, 83, 82)),
    (84, 2, (52, 87, 79)), (85, 2, (87, 50, 78)), (86, 2, (79, 78, 49)), (58, 2, (84, 85, 86)),
    (88, 3, (73, 50, 87)), (89, 3, (48, 73, 80)), (90, 3, (80, 87, 52)), (60, 3, (89, 88, 90)),
)
# (coefficient, (i1, i2, i3, i4)): sum_k kappa_k c_ik, kappa in order p1, p2, p4, p3
_KAPPA_SHELL2 = (
    (45, (73, 48, 80, 77)),
    (46, (78, 77, 79, 49)),
    (47, (50, 73, 87, 78)),
    (51, (87, 80, 52, 79)),
)
_SIGMA_SHELL2 = (
    (53, 0, (47, 45, 46)),
    (55, 1, (45, 51, 46)),
    (57, 2, (51, 47, 46)),
    (59, 3, (45, 47, 51)),
)
_KAPPA_SHELL3 = ((91, (47, 45, 51, 46)),)

_LOCAL_EDGE_INDEX = {frozenset(e): k for k, e in enumerate(LOCAL_EDGES)}

_EDGE_A = np.array([-0.5, -0.5, 1.0])


def edge_interior_coefficient(dir_deriv, ring, a=_EDGE_A):
    """Interior coefficient c111 next to edge (v1, v2) of a cubic on triangle (v1, v2, v3).

    ``dir_deriv`` is the derivative at the edge midpoint along the direction
    whose barycentric coordinates are ``a`` (for the midpoint-to-v3 vector
    a = (-1/2, -1/2, 1)); ``ring`` holds (c300, c210, c120, c030, c201, c021).
    Works element-wise on arrays.
    """
    c300, c210, c120, c030, c201, c021 = ring
    a1, a2, a3 = a
    if a3 == 0:
        raise ValueError("a3 must be non-zero")
    return (
        4.0 / (6.0 * a3) * dir_deriv
        - 0.5 * (c201 + c021)
        - a1 / (2.0 * a3) * (c300 + 2.0 * c210 + c120)
        - a2 / (2.0 * a3) * (c210 + 2.0 * c120 + c030)
    )


def _node_positions(V, incenter, split_points) -> dict:
    nodes = {k + 1: V[:, k] for k in range(4)}
    for r, k in enumerate(SPLIT_NODES):
        nodes[k] = split_points[:, r]
    nodes[91] = incenter
    return nodes


def _coefficients(V, incenter, kappa, split_points, sigma, data: HermiteData) -> np.ndarray:
    """Vectorised coefficient computation; returns (n, 92) with column k = c_k."""
    n = len(V)
    c = np.empty((n, 92))
    c[:, 0] = np.nan
    P = _node_positions(V, incenter, split_points)
    f = data.values
    g = data.gradients

    c[:, 1:5] = f
    for k, v, q in _DIRECTIONAL:
        c[:, k] = f[:, v - 1] + np.einsum("nd,nd->n", g[:, v - 1], P[q] - P[v]) / 3.0

    for k, v1, v2, q, c300, c210, c120, c030, c201, c021 in _EDGE_INTERIOR:
        d = P[v2] - P[v1]
        # derivative along the edge from the edge cubic; across it from the data
        dt = 0.75 * (-c[:, c300] - c[:, c210] + c[:, c120] + c[:, c030])
        grad_mid = (dt / np.einsum("nd,nd->n", d, d))[:, None] * d
        e = _LOCAL_EDGE_INDEX[frozenset((v1 - 1, v2 - 1))]
        grad_mid = grad_mid + np.einsum("nj,njd->nd", data.edge_derivs[:, e], data.frames[:, e])
        u = P[q] - 0.5 * (P[v1] + P[v2])
        du = np.einsum("nd,nd->n", grad_mid, u)
        c[:, k] = edge_interior_coefficient(du, (c[:, c300], c[:, c210], c[:, c120], c[:, c030], c[:, c201], c[:, c021]))

    for table in (_SIGMA_SHELL0, _SIGMA_SHELL1):
        for k, r, idx in table:
            c[:, k] = np.einsum("nj,nj->n", sigma[:, r], c[:, list(idx)])
    for k, idx in _KAPPA_SHELL2:
        c[:, k] = np.einsum("nj,nj->n", kappa, c[:, list(idx)])
    for k, r, idx in _SIGMA_SHELL2:
        c[:, k] = np.einsum("nj,nj->n", sigma[:, r], c[:, list(idx)])
    for k, idx in _KAPPA_SHELL3:
        c[:, k] = np.einsum("nj,nj->n", kappa, c[:, list(idx)])
    return c


def compute_macro_coefficients(split: WFSplit, data: HermiteData) -> MacroCoefficients:
    """The 91 coefficients of one macro element."""
    if len(data) != 1:
        raise ValueError("compute_macro_coefficients expects data for a single element")
    c = _coefficients(
        split.vertices[None],
        split.incenter[None],
        split.kappa[None],
        split.split_points[None],
        split.sigma[None],
        data,
    )
    return MacroCoefficients(c[0, 1:])


def compute_all_coefficients(mesh: TetMesh, splits: SplitSet, data: HermiteData) -> np.ndarray:
    """Coefficients of every element, shape (ne, 91) (column k-1 holds c_k)."""
    if len(data) != mesh.n_elements:
        raise ValueError("one HermiteData row per element is required")
    c = _coefficients(mesh.points, splits.incenter, splits.kappa, splits.split_points, splits.sigma, data)
    return np.ascontiguousarray(c[:, 1:])


def subtet_bform(split: WFSplit, coeffs: MacroCoefficients, alpha: int) -> CubicBForm:
    return CubicBForm(split.subtets[alpha - 1], coeffs.subtet(alpha))


# ---------------------------------------------------------------------------
# evaluation


def evaluate_wf(mesh: TetMesh, bvh: Bvh, splits: SplitSet, coeffs, p) -> tuple[float, np.ndarray]:
    """Value and gradient of the spline at one point (reference path)."""
    p = np.asarray(p, dtype=float)
    e = locate_point(mesh, bvh, p)
    split = splits.element(mesh, e)
    alpha, lam = locate_subtet(split, p)
    b = subtet_bform(split, MacroCoefficients(np.asarray(coeffs)[e]), alpha)
    return decasteljau_eval(b, lam), decasteljau_gradient(b, lam)


def _cubic_tables():
    mi3 = np.array(CUBIC_INDICES, dtype=np.int64)
    from math import factorial

    mult3 = np.array([6.0 / np.prod([factorial(v) for v in m]) for m in CUBIC_INDICES])
    q = multi_indices(2)
    mi2 = np.array(q, dtype=np.int64)
    mult2 = np.array([2.0 / np.prod([factorial(v) for v in m]) for m in q])
    up = np.empty((len(q), 4), dtype=np.int64)
    for i, m in enumerate(q):
        for k in range(4):
            mm = list(m)
            mm[k] += 1
            up[i, k] = CUBIC_INDICES.index(tuple(mm))
    return mi3, mult3, mi2, mult2, up


_MI3, _MULT3, _MI2, _MULT2, _UP = _cubic_tables()


@njit(cache=True, nogil=True)
def _bary_in(origin, inv, p, lam):
    d0 = p[0] - origin[0]
    d1 = p[1] - origin[1]
    d2 = p[2] - origin[2]
    lam[1] = inv[0, 0] * d0 + inv[0, 1] * d1 + inv[0, 2] * d2
    lam[2] = inv[1, 0] * d0 + inv[1, 1] * d1 + inv[1, 2] * d2
    lam[3] = inv[2, 0] * d0 + inv[2, 1] * d1 + inv[2, 2] * d2
    lam[0] = 1.0 - lam[1] - lam[2] - lam[3]
    return min(lam[0], lam[1], lam[2], lam[3])


@njit(cache=True, nogil=True)
def _eval_kernel(pts, elems, alf_o, alf_inv, sub_o, sub_inv, coef, cmap, tol, mi3, mult3, mi2, mult2, up, want_grad, vals, grads, alphas):
    lam = np.empty(4)
    pw = np.empty((4, 4))
    cl = np.empty(20)
    dl = np.empty(4)
    for n in range(pts.shape[0]):
        e = elems[n]
        p = pts[n]
        # stage 1: Alfeld cell, stage 2: one of its three subtets
        alpha = -1
        t = tol
        for sweep in range(3):
            for r in range(4):
                if _bary_in(alf_o[e, r], alf_inv[e, r], p, lam) < -t:
                    continue
                for a in range(3 * r, 3 * r + 3):
                    if _bary_in(sub_o[e, a], sub_inv[e, a], p, lam) >= -t:
                        alpha = a
                        break
                if alpha >= 0:
                    break
            if alpha >= 0:
                break
            t *= 100.0
        if alpha < 0:
            # best effort: the subtet with the largest minimum barycentric
            best = -np.inf
            for a in range(12):
                m = _bary_in(sub_o[e, a], sub_inv[e, a], p, lam)
                if m > best:
                    best = m
                    alpha = a
        _bary_in(sub_o[e, alpha], sub_inv[e, alpha], p, lam)
        alphas[n] = alpha + 1
        for k in range(4):
            pw[k, 0] = 1.0
            pw[k, 1] = lam[k]
            pw[k, 2] = lam[k] * lam[k]
            pw[k, 3] = pw[k, 2] * lam[k]
        for b in range(20):
            cl[b] = coef[e, cmap[alpha, b] - 1]
        v = 0.0
        for b in range(20):
            v += cl[b] * mult3[b] * pw[0, mi3[b, 0]] * pw[1, mi3[b, 1]] * pw[2, mi3[b, 2]] * pw[3, mi3[b, 3]]
        vals[n] = v
        if want_grad:
            for k in range(4):
                dl[k] = 0.0
            for q in range(10):
                bq = mult2[q] * pw[0, mi2[q, 0]] * pw[1, mi2[q, 1]] * pw[2, mi2[q, 2]] * pw[3, mi2[q, 3]]
                for k in range(4):
                    dl[k] += 3.0 * cl[up[q, k]] * bq
            inv = sub_inv[e, alpha]
            for d in range(3):
                grads[n, d] = (dl[1] - dl[0]) * inv[0, d] + (dl[2] - dl[0]) * inv[1, d] + (dl[3] - dl[0]) * inv[2, d]


class WFSpline:
    """A piecewise Worsey-Farin spline on a mesh: 91 coefficients per element."""

    def __init__(self, mesh: TetMesh, coeffs, splits: SplitSet | None = None, bvh: Bvh | None = None):
        self.mesh = mesh
        self.splits = build_splits(mesh) if splits is None else splits
        self.bvh = build_bvh(mesh) if bvh is None else bvh
        self.coeffs = np.ascontiguousarray(np.asarray(coeffs, dtype=float).reshape(mesh.n_elements, 91))
        self._sub_o, self._sub_inv = self.splits.inverse_maps()
        self._alf_o, self._alf_inv = self.splits.alfeld_inverse_maps(mesh.points)

    @classmethod
    def from_hermite(cls, mesh: TetMesh, data: HermiteData, splits: SplitSet | None = None, bvh: Bvh | None = None) -> "WFSpline":
        splits = build_splits(mesh) if splits is None else splits
        return cls(mesh, compute_all_coefficients(mesh, splits, data), splits, bvh)

    def evaluate(self, pts, elems=None, gradient: bool = True, return_alpha: bool = False):
        """Values (n,) and gradients (n, 3) at points (n, 3).

        ``elems`` may supply the containing macro elements when already known.
        """
        pts = np.ascontiguousarray(np.asarray(pts, dtype=float).reshape(-1, 3))
        if elems is None:
            elems = locate_points(self.mesh, self.bvh, pts)
        elems = np.ascontiguousarray(elems, dtype=np.int64)
        n = len(pts)
        vals = np.empty(n)
        grads = np.empty((n, 3)) if gradient else np.empty((1, 3))
        alphas = np.empty(n, dtype=np.int64)
        _eval_kernel(
            pts, elems, self._alf_o, self._alf_inv, self._sub_o, self._sub_inv, self.coeffs, COEFF_MAP,
            INSIDE_TOL, _MI3, _MULT3, _MI2, _MULT2, _UP, gradient, vals, grads, alphas,
        )
        out = (vals, grads) if gradient else (vals,)
        if return_alpha:
            out = out + (alphas,)
        return out if len(out) > 1 else out[0]

    def __call__(self, pts) -> np.ndarray:
        return self.evaluate(pts, gradient=False)

    def subtet_volumes(self) -> np.ndarray:
        return self.splits.volumes()

    def integral(self) -> float:
        """Exact integral: each cubic B-form integrates to volume * mean coefficient."""
        vol = self.splits.volumes()  # (ne, 12)
        means = self.coeffs[:, COEFF_MAP - 1].mean(axis=2)  # (ne, 12)
        return float((vol * means).sum())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per (element, subtet) coefficient minimum and maximum."""
        sub = self.coeffs[:, COEFF_MAP - 1]
        return sub.min(axis=2), sub.max(axis=2)
