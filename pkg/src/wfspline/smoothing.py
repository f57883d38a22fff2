"""Discontinuous piecewise polynomial fields and the synchronisation operator.

Synchronisation turns a (possibly discontinuous) piecewise polynomial field
into single-valued Hermite data: vertex values and gradients are averaged
over all elements sharing the vertex, and the two edge-perpendicular
derivatives at each edge midpoint over all elements sharing the edge.
Contributions are accumulated in ascending element order so the result is
bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .bernstein import basis_size, bernstein_basis, bernstein_basis_dlambda, multi_indices, reference_mass_matrix
from .bvh import Bvh, build_bvh, locate_points
from .coefficients import HermiteData
from .mesh import LOCAL_EDGES, TetMesh

__all__ = [
    "REFERENCE_VECTOR",
    "EdgeFrames",
    "PiecewiseField",
    "edge_frame",
    "build_edge_frames",
    "synchronize",
    "vertex_average",
]

#: fixed direction projected onto each edge's normal plane to orient frames
REFERENCE_VECTOR = np.array([1.0, 2.0, 3.0]) / np.sqrt(14.0)
_FALLBACK_AXES = (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
MAX_SYNC_DEGREE = 3


def edge_frame(d) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal right-handed frame (t, e1, e2) for edge direction ``d``."""
    d = np.asarray(d, dtype=float)
    t = d / np.linalg.norm(d)
    r = REFERENCE_VECTOR
    if np.linalg.norm(np.cross(t, r)) < 1e-8:
        r = _FALLBACK_AXES[0] if abs(t[0]) < 0.9 else _FALLBACK_AXES[1]
    e1 = r - (r @ t) * t
    e1 /= np.linalg.norm(e1)
    return t, e1, np.cross(t, e1)


@dataclass(frozen=True, eq=False)
class EdgeFrames:
    """Per mesh edge: tangent (low -> high vertex id), perpendiculars and midpoint."""

    tangent: np.ndarray  # (nE, 3)
    e1: np.ndarray
    e2: np.ndarray
    midpoint: np.ndarray

    def element_frames(self, mesh: TetMesh) -> np.ndarray:
        """(ne, 6, 2, 3) perpendicular vectors for the local edges of each element."""
        return np.stack([self.e1[mesh.tet_edges], self.e2[mesh.tet_edges]], axis=2)


def build_edge_frames(mesh: TetMesh) -> EdgeFrames:
    V = mesh.vertices
    a = V[mesh.edges[:, 0]]
    b = V[mesh.edges[:, 1]]
    d = b - a
    t = d / np.linalg.norm(d, axis=1, keepdims=True)
    r = np.broadcast_to(REFERENCE_VECTOR, t.shape).copy()
    par = np.linalg.norm(np.cross(t, r), axis=1) < 1e-8
    if par.any():
        r[par] = np.where(np.abs(t[par, :1]) < 0.9, _FALLBACK_AXES[0], _FALLBACK_AXES[1])
    e1 = r - np.einsum("ij,ij->i", r, t)[:, None] * t
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(t, e1)
    return EdgeFrames(t, e1, e2, (a + b) / 2)


@dataclass(eq=False)
class PiecewiseField:
    """Element-wise polynomial of degree ``degree`` in Bernstein form.

    ``coeffs`` has shape (ne, C(degree+3, 3)) in canonical multi-index order.
    """

    mesh: TetMesh
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        nb = basis_size(self.degree)
        if self.coeffs.shape != (self.mesh.n_elements, nb):
            raise ValueError(f"expected coefficients of shape {(self.mesh.n_elements, nb)}, got {self.coeffs.shape}")

    @cached_property
    def bvh(self) -> Bvh:
        return build_bvh(self.mesh)

    def values_at(self, elems, lam) -> np.ndarray:
        """Values at barycentric points ``lam`` (n, 4) of elements ``elems`` (n,)."""
        B = bernstein_basis(self.degree, lam)
        return np.einsum("nb,nb->n", B, self.coeffs[elems])

    def gradients_at(self, elems, lam) -> np.ndarray:
        dB = bernstein_basis_dlambda(self.degree, lam)  # (n, nb, 4)
        dl = np.einsum("nbk,nb->nk", dB, self.coeffs[elems])
        return np.einsum("nk,nkd->nd", dl, self.mesh.barycentric_gradients[elems])

    def evaluate(self, pts, elems=None, gradient: bool = False, chunk: int = 200_000):
        """Evaluate at points, locating them first unless ``elems`` is given.

        On faces shared by several elements the lowest element id is used.
        """
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        if elems is None:
            elems = locate_points(self.mesh, self.bvh, pts)
        vals = np.empty(len(pts))
        grads = np.empty((len(pts), 3)) if gradient else None
        for s in range(0, len(pts), chunk):
            sl = slice(s, s + chunk)
            lam = self.mesh.barycentric_coords(elems[sl], pts[sl])
            vals[sl] = self.values_at(elems[sl], lam)
            if gradient:
                grads[sl] = self.gradients_at(elems[sl], lam)
        return (vals, grads) if gradient else vals

    __call__ = evaluate

    def element_integrals(self) -> np.ndarray:
        return self.mesh.volumes * self.coeffs.mean(axis=1)

    def integral(self) -> float:
        """Exact integral (each Bernstein polynomial integrates to |T| / C(k+3, 3))."""
        return float(self.element_integrals().sum())

    def l2_norm_sq(self) -> float:
        M = reference_mass_matrix(self.degree)
        return float(np.einsum("e,eb,bc,ec->", self.mesh.volumes, self.coeffs, M, self.coeffs))

    def vertex_values(self) -> np.ndarray:
        """Per element values at the 4 vertices, shape (ne, 4)."""
        idx = [multi_indices(self.degree).index(tuple(self.degree * (np.arange(4) == k))) for k in range(4)]
        return self.coeffs[:, idx]

    @classmethod
    def constant(cls, mesh: TetMesh, value: float, degree: int = 1) -> "PiecewiseField":
        return cls(mesh, degree, np.full((mesh.n_elements, basis_size(degree)), float(value)))

    @classmethod
    def interpolate(cls, mesh: TetMesh, f, degree: int) -> "PiecewiseField":
        """Interpolate ``f`` at the domain points (exact for polynomials of the degree)."""
        from .bernstein import lagrange_to_bernstein

        lam = np.array(multi_indices(degree), dtype=float) / max(degree, 1)
        pts = np.einsum("bk,ekd->ebd", lam, mesh.points)
        vals = np.asarray(f(pts.reshape(-1, 3)), dtype=float).reshape(mesh.n_elements, -1)
        return cls(mesh, degree, vals @ lagrange_to_bernstein(degree).T)


def vertex_average(mesh: TetMesh, per_element: np.ndarray) -> np.ndarray:
    """Average (ne, 4, ...) per-element vertex data over vertex stars -> (nv, ...)."""
    data = np.asarray(per_element, dtype=float)
    tail = data.shape[2:]
    acc = np.zeros((mesh.n_vertices,) + tail)
    # element-major ravel order: ascending element id per vertex
    np.add.at(acc, mesh.tets.reshape(-1), data.reshape((-1,) + tail))
    cnt = np.bincount(mesh.tets.reshape(-1), minlength=mesh.n_vertices).astype(float)
    return acc / cnt.reshape((-1,) + (1,) * len(tail))


def synchronize(field: PiecewiseField, frames: EdgeFrames | None = None, return_global: bool = False):
    """Averaged Hermite data for every element of ``field.mesh``.

    Returns a :class:`HermiteData` with one row per element; with
    ``return_global`` also the per-vertex values/gradients and per-edge
    perpendicular derivatives.
    """
    if field.degree > MAX_SYNC_DEGREE:
        raise ValueError(
            f"synchronisation is limited to degree <= {MAX_SYNC_DEGREE}: degree-4 bubble functions "
            "vanish at all vertices and edge midpoints, so their information would be lost"
        )
    mesh = field.mesh
    frames = build_edge_frames(mesh) if frames is None else frames
    ne = mesh.n_elements
    eye = np.eye(4)

    vals = field.vertex_values()
    grads = np.empty((ne, 4, 3))
    for k in range(4):
        lam = np.broadcast_to(eye[k], (ne, 4))
        grads[:, k] = field.gradients_at(np.arange(ne), lam)
    vval = vertex_average(mesh, vals)
    vgrad = vertex_average(mesh, grads)

    nE = len(mesh.edges)
    acc = np.zeros((nE, 2))
    cnt = np.bincount(mesh.tet_edges.reshape(-1), minlength=nE).astype(float)
    eperp = np.empty((ne, 6, 2))
    for j, (a, b) in enumerate(LOCAL_EDGES):
        lam = np.zeros((ne, 4))
        lam[:, a] = lam[:, b] = 0.5
        gm = field.gradients_at(np.arange(ne), lam)
        eid = mesh.tet_edges[:, j]
        eperp[:, j, 0] = np.einsum("nd,nd->n", gm, frames.e1[eid])
        eperp[:, j, 1] = np.einsum("nd,nd->n", gm, frames.e2[eid])
    # element-major order keeps the accumulation ascending in element id
    np.add.at(acc, mesh.tet_edges.reshape(-1), eperp.reshape(-1, 2))
    edge_d = acc / cnt[:, None]

    data = HermiteData(
        vval[mesh.tets],
        vgrad[mesh.tets],
        edge_d[mesh.tet_edges],
        frames.element_frames(mesh),
    )
    if return_global:
        return data, vval, vgrad, edge_d
    return data
