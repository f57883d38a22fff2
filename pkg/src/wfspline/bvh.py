"""Bounding-volume hierarchy and point location on tetrahedral meshes.

The tree is a binary AABB hierarchy built by median splits of element
centroids along the longest box axis.  Queries return the *lowest* element
id among all elements whose barycentric coordinates are >= -tol, so results
do not depend on tree layout or traversal order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .mesh import INSIDE_TOL, TetMesh

__all__ = [
    "Bvh",
    "PointNotFoundError",
    "TOLERANCE_SWEEP",
    "build_bvh",
    "locate_point",
    "locate_points",
    "locate_exhaustive",
]

#: tolerances tried in turn before a point is declared outside the mesh
TOLERANCE_SWEEP = (INSIDE_TOL, 1e-8, 1e-6)


class PointNotFoundError(LookupError):
    """No element contains the query point (after the tolerance sweep)."""


@dataclass(frozen=True, eq=False)
class Bvh:
    lo: np.ndarray  # (nn, 3) node box minimum
    hi: np.ndarray  # (nn, 3) node box maximum
    left: np.ndarray  # (nn,) child index or -1 for leaves
    right: np.ndarray
    start: np.ndarray  # (nn,) leaf slice into ``order``
    count: np.ndarray
    order: np.ndarray  # element ids grouped by leaf
    pad: float  # box inflation used by queries

    @property
    def n_nodes(self) -> int:
        return len(self.lo)

    def leaves(self) -> list[np.ndarray]:
        return [self.order[s : s + c] for s, c, l in zip(self.start, self.count, self.left) if l < 0]


def build_bvh(mesh: TetMesh, leaf_size: int = 8) -> Bvh:
    P = mesh.points
    elo = P.min(axis=1)
    ehi = P.max(axis=1)
    cen = P.mean(axis=1)
    order = np.arange(mesh.n_elements)
    lo, hi, left, right, start, count = [], [], [], [], [], []

    def new_node(s, e):
        ids = order[s:e]
        lo.append(elo[ids].min(axis=0))
        hi.append(ehi[ids].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        return len(lo) - 1

    root = new_node(0, len(order))
    stack = [(root, 0, len(order))]
    while stack:
        node, s, e = stack.pop()
        if e - s <= leaf_size:
            continue
        ids = order[s:e]
        axis = int(np.argmax(hi[node] - lo[node]))
        # stable sort keeps the construction deterministic
        srt = np.argsort(cen[ids, axis], kind="stable")
        order[s:e] = ids[srt]
        mid = s + (e - s) // 2
        l = new_node(s, mid)
        r = new_node(mid, e)
        left[node], right[node] = l, r
        stack.append((r, mid, e))
        stack.append((l, s, mid))

    diag = float(np.linalg.norm(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)))
    pad = 1e-6 * max(diag, 1e-300)
    return Bvh(
        np.array(lo),
        np.array(hi),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(start, dtype=np.int64),
        np.array(count, dtype=np.int64),
        order,
        pad,
    )


@njit(cache=True, nogil=True)
def _min_lambda(origin, inv, p):
    d0 = p[0] - origin[0]
    d1 = p[1] - origin[1]
    d2 = p[2] - origin[2]
    l1 = inv[0, 0] * d0 + inv[0, 1] * d1 + inv[0, 2] * d2
    l2 = inv[1, 0] * d0 + inv[1, 1] * d1 + inv[1, 2] * d2
    l3 = inv[2, 0] * d0 + inv[2, 1] * d1 + inv[2, 2] * d2
    m = 1.0 - l1 - l2 - l3
    if l1 < m:
        m = l1
    if l2 < m:
        m = l2
    if l3 < m:
        m = l3
    return m


@njit(cache=True, nogil=True)
def _locate_kernel(pts, lo, hi, left, right, start, count, order, origins, invs, pad, tol, out, best_elem, best_val):
    """For each point: lowest containing element id (or -1) and the
    element of largest min-barycentric among visited candidates."""
    stack = np.empty(256, dtype=np.int64)
    for n in range(pts.shape[0]):
        p = pts[n]
        found = -1
        bv = -np.inf
        be = -1
        top = 0
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if (
                p[0] < lo[node, 0] - pad
                or p[1] < lo[node, 1] - pad
                or p[2] < lo[node, 2] - pad
                or p[0] > hi[node, 0] + pad
                or p[1] > hi[node, 1] + pad
                or p[2] > hi[node, 2] + pad
            ):
                continue
            if left[node] < 0:
                for k in range(start[node], start[node] + count[node]):
                    e = order[k]
                    m = _min_lambda(origins[e], invs[e], p)
                    if m >= -tol and (found < 0 or e < found):
                        found = e
                    if m > bv or (m == bv and e < be):
                        bv = m
                        be = e
            else:
                stack[top] = left[node]
                stack[top + 1] = right[node]
                top += 2
        out[n] = found
        best_elem[n] = be
        best_val[n] = bv


def _mesh_arrays(mesh: TetMesh):
    return np.ascontiguousarray(mesh.points[:, 0]), np.ascontiguousarray(mesh.inverse_maps)


def locate_points(mesh: TetMesh, bvh: Bvh, pts, tol: float | None = None, raise_on_missing: bool = True) -> np.ndarray:
    """Element id for every point of an (n, 3) array.

    With ``tol=None`` the tolerance sweep :data:`TOLERANCE_SWEEP` is used:
    points not found at the first tolerance are retried at the looser ones.
    Missing points raise :class:`PointNotFoundError` (or get -1 when
    ``raise_on_missing`` is false).
    """
    pts = np.ascontiguousarray(np.asarray(pts, dtype=float).reshape(-1, 3))
    origins, invs = _mesh_arrays(mesh)
    n = len(pts)
    out = np.empty(n, dtype=np.int64)
    be = np.empty(n, dtype=np.int64)
    bv = np.empty(n)
    sweep = TOLERANCE_SWEEP if tol is None else (tol,)
    _locate_kernel(pts, bvh.lo, bvh.hi, bvh.left, bvh.right, bvh.start, bvh.count, bvh.order, origins, invs, bvh.pad, sweep[0], out, be, bv)
    for t in sweep[1:]:
        miss = out < 0
        if not miss.any():
            break
        # the lowest-id containment rule at the looser tolerance
        sub = np.ascontiguousarray(pts[miss])
        o2 = np.empty(len(sub), dtype=np.int64)
        b2 = np.empty(len(sub), dtype=np.int64)
        v2 = np.empty(len(sub))
        _locate_kernel(sub, bvh.lo, bvh.hi, bvh.left, bvh.right, bvh.start, bvh.count, bvh.order, origins, invs, bvh.pad, t, o2, b2, v2)
        out[miss] = o2
        be[miss] = b2
        bv[miss] = v2
    miss = np.flatnonzero(out < 0)
    if miss.size and raise_on_missing:
        i = miss[0]
        if be[i] >= 0:
            diag = f"nearest element {be[i]} (min barycentric {bv[i]:.3e})"
        else:
            cen = mesh.points.mean(axis=1)
            j = int(np.argmin(np.linalg.norm(cen - pts[i], axis=1)))
            diag = f"nearest element by centroid {j}"
        raise PointNotFoundError(f"{miss.size} point(s) outside the mesh, first {pts[i].tolist()}: {diag}")
    return out


def locate_point(mesh: TetMesh, bvh: Bvh, p, tol: float | None = None) -> int:
    """Element containing ``p``; lowest id wins on shared faces/edges/vertices."""
    return int(locate_points(mesh, bvh, np.asarray(p, dtype=float)[None, :], tol)[0])


def locate_exhaustive(mesh: TetMesh, pts, tol: float = INSIDE_TOL, chunk: int = 2048) -> np.ndarray:
    """Brute-force scan over all elements (reference implementation)."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    origins, invs = _mesh_arrays(mesh)
    out = np.full(len(pts), -1, dtype=np.int64)
    for s in range(0, len(pts), chunk):
        d = pts[s : s + chunk, None, :] - origins[None, :, :]
        l = np.einsum("eij,nej->nei", invs, d)
        m = np.minimum(l.min(axis=2), 1.0 - l.sum(axis=2))
        inside = m >= -tol
        has = inside.any(axis=1)
        first = np.argmax(inside, axis=1)
        out[s : s + chunk] = np.where(has, first, -1)
    return out
