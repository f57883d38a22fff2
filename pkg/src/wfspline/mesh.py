"""Tetrahedral meshes: connectivity, adjacency and geometric predicates.

Orientation convention used throughout the package: a tetrahedron
(p1, p2, p3, p4) is positively oriented when det[p2-p1, p3-p1, p4-p1] > 0.
Local face ``i`` of a tetrahedron is the face opposite local vertex ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "BOUNDARY",
    "INSIDE_TOL",
    "LOCAL_EDGES",
    "LOCAL_FACES",
    "MeshError",
    "DegenerateTetError",
    "GeometryError",
    "TetMesh",
    "as_tet",
    "signed_volume",
    "barycentric",
    "incenter",
    "segment_face_intersection",
]

BOUNDARY = -1
#: absolute tolerance on normalised barycentric coordinates for "inside"
INSIDE_TOL = 1e-10
#: relative volume threshold below which a tetrahedron is degenerate
DEGENERATE_RTOL = 1e-12

LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


class MeshError(ValueError):
    """Invalid mesh input."""


class DegenerateTetError(MeshError):
    """A tetrahedron with (numerically) zero volume."""


class GeometryError(RuntimeError):
    """An internal geometric construction failed."""


def as_tet(tet) -> np.ndarray:
    P = np.asarray(tet, dtype=float)
    if P.shape != (4, 3):
        raise ValueError(f"tetrahedron geometry must have shape (4, 3), got {P.shape}")
    return P


def signed_volume(P) -> np.ndarray:
    """Signed volume of tetrahedra given as (..., 4, 3) arrays."""
    P = np.asarray(P, dtype=float)
    a = P[..., 1, :] - P[..., 0, :]
    b = P[..., 2, :] - P[..., 0, :]
    c = P[..., 3, :] - P[..., 0, :]
    return np.einsum("...i,...i->...", a, np.cross(b, c)) / 6.0


def _edge_scale(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    ls = [np.linalg.norm(P[..., j, :] - P[..., i, :], axis=-1) for i, j in LOCAL_EDGES]
    return np.max(np.stack(ls, axis=-1), axis=-1)


def is_degenerate(P) -> np.ndarray:
    return np.abs(signed_volume(P)) <= DEGENERATE_RTOL * _edge_scale(P) ** 3


def barycentric(tet, p) -> np.ndarray:
    """Barycentric coordinates of ``p`` with respect to ``tet``."""
    P = as_tet(tet)
    if is_degenerate(P):
        raise DegenerateTetError("degenerate tetrahedron")
    E = (P[1:] - P[0]).T
    l = np.linalg.solve(E, np.asarray(p, dtype=float) - P[0])
    return np.array([1.0 - l.sum(), l[0], l[1], l[2]])


def _face_areas(P) -> np.ndarray:
    """Areas of the four faces (face i opposite vertex i), shape (..., 4)."""
    out = []
    for f in LOCAL_FACES:
        a = P[..., f[1], :] - P[..., f[0], :]
        b = P[..., f[2], :] - P[..., f[0], :]
        out.append(0.5 * np.linalg.norm(np.cross(a, b), axis=-1))
    return np.stack(out, axis=-1)


def incenter(tet) -> tuple[np.ndarray, np.ndarray]:
    """Incenter and its barycentric weights (in vertex order p1..p4).

    The weight of vertex i is the area of the face opposite vertex i divided
    by the total surface area.
    """
    P = as_tet(tet)
    if is_degenerate(P):
        raise DegenerateTetError("degenerate tetrahedron has no incenter")
    A = _face_areas(P)
    kappa = A / A.sum()
    return kappa @ P, kappa


def incenters(P) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`incenter` for (n, 4, 3) arrays."""
    A = _face_areas(P)
    kappa = A / A.sum(axis=1, keepdims=True)
    return np.einsum("ni,nij->nj", kappa, P), kappa


def segment_face_intersection(a, b, face) -> tuple[np.ndarray, np.ndarray]:
    """Intersection of the segment [a, b] with a triangle.

    Returns the point and its barycentric coordinates with respect to the
    triangle vertices in the order given.  Raises :class:`GeometryError`
    when the segment does not cross the plane transversally or hits the
    plane outside the open triangle.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    F = np.asarray(face, dtype=float)
    n = np.cross(F[1] - F[0], F[2] - F[0])
    da = float(n @ (a - F[0]))
    db = float(n @ (b - F[0]))
    scale = np.linalg.norm(n) * max(np.linalg.norm(b - a), 1e-300)
    if abs(da - db) <= 1e-12 * scale:
        raise GeometryError(f"segment {a} -> {b} is parallel to the face plane")
    if da * db > 0:
        raise GeometryError(f"segment {a} -> {b} does not cross the face plane")
    t = da / (da - db)
    x = a + t * (b - a)
    # barycentrics in the plane via sub-triangle areas
    nn = n @ n
    s1 = np.cross(F[2] - F[1], x - F[1]) @ n / nn
    s2 = np.cross(F[0] - F[2], x - F[2]) @ n / nn
    sigma = np.array([s1, s2, 1.0 - s1 - s2])
    if np.any(sigma <= 0.0):
        raise GeometryError(f"intersection {x} lies outside the triangle (sigma={sigma})")
    return sigma @ F, sigma


@dataclass(frozen=True, eq=False)
class TetMesh:
    """Immutable tetrahedral mesh with adjacency.

    Attributes
    ----------
    vertices : (nv, 3) float
    tets : (ne, 4) int, positively oriented
    face_neighbors : (ne, 4) int, neighbour across local face i or ``BOUNDARY``
    boundary_faces : (ne, 4) bool
    faces : (nf, 3) int, unique faces with sorted vertex ids
    tet_faces : (ne, 4) int, face id of each local face
    edges : (nE, 2) int, unique edges (low id, high id); the edge id doubles
        as the id of the edge midpoint
    tet_edges : (ne, 6) int, edge id of each local edge in ``LOCAL_EDGES`` order
    """

    vertices: np.ndarray
    tets: np.ndarray
    face_neighbors: np.ndarray
    boundary_faces: np.ndarray
    faces: np.ndarray
    tet_faces: np.ndarray
    edges: np.ndarray
    tet_edges: np.ndarray

    @classmethod
    def from_arrays(cls, vertices, tets, repair: bool = True) -> "TetMesh":
        V = np.ascontiguousarray(vertices, dtype=float)
        T = np.array(tets, dtype=np.int64, copy=True)
        if V.ndim != 2 or V.shape[1] != 3:
            raise MeshError("vertices must have shape (nv, 3)")
        if T.ndim != 2 or T.shape[1] != 4:
            raise MeshError("tets must have shape (ne, 4)")
        if not np.all(np.isfinite(V)):
            raise MeshError("non-finite vertex coordinates")
        if T.size and (T.min() < 0 or T.max() >= len(V)):
            raise MeshError("tet references a missing vertex")
        P = V[T]
        bad = np.flatnonzero(is_degenerate(P))
        if bad.size:
            raise DegenerateTetError(f"element {bad[0] + 1} has zero volume")
        neg = signed_volume(P) < 0
        if neg.any():
            if not repair:
                raise MeshError(f"element {np.flatnonzero(neg)[0] + 1} is negatively oriented")
            T[neg] = T[neg][:, [0, 1, 3, 2]]

        ne = len(T)
        # faces
        lf = np.array(LOCAL_FACES)
        fv = np.sort(T[:, lf], axis=2).reshape(-1, 3)
        faces, finv, fcount = np.unique(fv, axis=0, return_inverse=True, return_counts=True)
        finv = finv.reshape(-1)
        if fcount.max(initial=0) > 2:
            raise MeshError("a face is shared by more than two elements")
        tet_faces = finv.reshape(ne, 4)
        owner = np.full((len(faces), 2), BOUNDARY, dtype=np.int64)
        slot = np.zeros(len(faces), dtype=np.int64)
        for flat, f in enumerate(finv):
            owner[f, slot[f]] = flat // 4
            slot[f] += 1
        face_neighbors = np.where(
            owner[tet_faces, 0] == np.arange(ne)[:, None], owner[tet_faces, 1], owner[tet_faces, 0]
        )
        boundary = face_neighbors == BOUNDARY
        # edges
        le = np.array(LOCAL_EDGES)
        ev = np.sort(T[:, le], axis=2).reshape(-1, 2)
        edges, einv = np.unique(ev, axis=0, return_inverse=True)
        tet_edges = einv.reshape(ne, 6)
        for arr in (V, T, face_neighbors, boundary, faces, tet_faces, edges, tet_edges):
            arr.setflags(write=False)
        return cls(V, T, face_neighbors, boundary, faces, tet_faces, edges, tet_edges)

    # -- sizes -------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.tets)

    def __len__(self) -> int:
        return self.n_elements

    @property
    def n_interior_faces(self) -> int:
        return int((~self.boundary_faces).sum() // 2)

    # -- geometry ------------------------------------------------------------
    @cached_property
    def points(self) -> np.ndarray:
        """Element vertex coordinates, shape (ne, 4, 3)."""
        out = self.vertices[self.tets]
        out.setflags(write=False)
        return out

    def tet_points(self, elem: int) -> np.ndarray:
        return self.points[elem]

    @cached_property
    def volumes(self) -> np.ndarray:
        return signed_volume(self.points)

    @cached_property
    def inverse_maps(self) -> np.ndarray:
        """Per element 3x3 matrices mapping p - p1 to (lam2, lam3, lam4)."""
        E = np.transpose(self.points[:, 1:] - self.points[:, :1], (0, 2, 1))
        return np.linalg.inv(E)

    def barycentric_coords(self, elems, pts) -> np.ndarray:
        """Barycentric coordinates of points ``pts`` in elements ``elems``."""
        elems = np.asarray(elems)
        d = np.asarray(pts, dtype=float) - self.points[elems, 0]
        l = np.einsum("nij,nj->ni", self.inverse_maps[elems], d)
        return np.concatenate([1.0 - l.sum(axis=1, keepdims=True), l], axis=1)

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """Gradients of the four barycentric functions, shape (ne, 4, 3)."""
        G = self.inverse_maps
        return np.concatenate([-G.sum(axis=1, keepdims=True), G], axis=1)

    @cached_property
    def incenters(self) -> tuple[np.ndarray, np.ndarray]:
        return incenters(self.points)

    @cached_property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]], axis=1)

    @property
    def h(self) -> float:
        """Characteristic size (|Omega| / N)^(1/3)."""
        return float((self.volumes.sum() / self.n_elements) ** (1.0 / 3.0))
