"""Worsey-Farin split of tetrahedra into 12 subtetrahedra.

Node numbering follows the 91-point coefficient numbering used by
:mod:`wfspline.coefficients`: the macro vertices are nodes 1..4, the four
face split points are nodes 5, 12, 19 and 26 and the incenter is node 91.

==========  =============  ==============  ===================
split node  face vertices  opposite vertex  subtets (alpha)
==========  =============  ==============  ===================
5           p1 p2 p3       p4              1, 2, 3
12          p2 p4 p3       p1              4, 5, 6
19          p4 p1 p3       p2              7, 8, 9
26          p2 p1 p4       p3              10, 11, 12
==========  =============  ==============  ===================

The face barycentrics ``sigma`` of each split point are given with respect
to the face vertex order in the table, and the incenter weights ``kappa``
in the order (p1, p2, p4, p3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BOUNDARY, INSIDE_TOL, GeometryError, TetMesh, signed_volume

__all__ = [
    "SPLIT_NODES",
    "SPLIT_FACES",
    "KAPPA_ORDER",
    "SUBTET_NODES",
    "FaceSplitTable",
    "WFSplit",
    "SplitSet",
    "build_face_split_table",
    "face_split_point",
    "build_wf_split",
    "build_splits",
    "locate_subtet",
    "locate_subtet_exhaustive",
]

SPLIT_NODES = (5, 12, 19, 26)
#: local (0-based) vertex order of the face carrying each split node
SPLIT_FACES = ((0, 1, 2), (1, 3, 2), (3, 0, 2), (1, 0, 3))
#: local vertex opposite each split face (= the local face index)
SPLIT_OPPOSITE = (3, 0, 1, 2)
#: local vertex order of the incenter weights
KAPPA_ORDER = (0, 1, 3, 2)
#: node numbers of the 4 vertices of each subtet (rows alpha = 1..12)
SUBTET_NODES = (
    (1, 2, 5, 91),
    (2, 3, 5, 91),
    (3, 1, 5, 91),
    (2, 4, 12, 91),
    (4, 3, 12, 91),
    (3, 2, 12, 91),
    (4, 1, 19, 91),
    (1, 3, 19, 91),
    (3, 4, 19, 91),
    (2, 1, 26, 91),
    (1, 4, 26, 91),
    (4, 2, 26, 91),
)


@dataclass(frozen=True, eq=False)
class FaceSplitTable:
    """Split point per unique mesh face (faces indexed as ``mesh.faces``).

    ``sigma`` is relative to the sorted vertex ids of the face, so both
    elements sharing a face read bitwise identical data.
    """

    points: np.ndarray  # (nf, 3)
    sigma: np.ndarray  # (nf, 3)
    boundary: np.ndarray  # (nf,) bool


def build_face_split_table(mesh: TetMesh) -> FaceSplitTable:
    """Compute every face split point once.

    Interior faces: intersection of the segment joining the incenters of
    the two adjacent elements with the face.  Boundary faces: the face
    barycenter.
    """
    nf = len(mesh.faces)
    F = mesh.vertices[mesh.faces]  # (nf, 3, 3), sorted vertex ids
    owners = np.full((nf, 2), BOUNDARY, dtype=np.int64)
    # element ids ascending, so column 0 ends up with the lower id
    for e in range(mesh.n_elements - 1, -1, -1):
        for f in mesh.tet_faces[e]:
            owners[f, 1] = owners[f, 0]
            owners[f, 0] = e
    boundary = owners[:, 1] == BOUNDARY
    points = F.mean(axis=1)
    sigma = np.full((nf, 3), 1.0 / 3.0)

    inter = np.flatnonzero(~boundary)
    if inter.size:
        inc = mesh.incenters[0]
        a = inc[owners[inter, 0]]
        b = inc[owners[inter, 1]]
        Fi = F[inter]
        n = np.cross(Fi[:, 1] - Fi[:, 0], Fi[:, 2] - Fi[:, 0])
        da = np.einsum("ij,ij->i", n, a - Fi[:, 0])
        db = np.einsum("ij,ij->i", n, b - Fi[:, 0])
        denom = da - db
        scale = np.linalg.norm(n, axis=1) * np.linalg.norm(b - a, axis=1)
        bad = (np.abs(denom) <= 1e-12 * scale) | (da * db > 0)
        t = da / np.where(bad, 1.0, denom)
        x = a + t[:, None] * (b - a)
        nn = np.einsum("ij,ij->i", n, n)
        s1 = np.einsum("ij,ij->i", np.cross(Fi[:, 2] - Fi[:, 1], x - Fi[:, 1]), n) / nn
        s2 = np.einsum("ij,ij->i", np.cross(Fi[:, 0] - Fi[:, 2], x - Fi[:, 2]), n) / nn
        sg = np.stack([s1, s2, 1.0 - s1 - s2], axis=1)
        bad |= np.any(sg <= 0.0, axis=1)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            f = inter[k]
            raise GeometryError(
                f"face {mesh.faces[f].tolist()}: incenter segment {a[k].tolist()} -> {b[k].tolist()} "
                f"does not cross the face interior (elements {owners[f, 0] + 1}, {owners[f, 1] + 1})"
            )
        # the point is rebuilt from sigma so that point and sigma agree exactly
        points[inter] = np.einsum("ni,nij->nj", sg, Fi)
        sigma[inter] = sg
    for arr in (points, sigma, boundary):
        arr.setflags(write=False)
    return FaceSplitTable(points, sigma, boundary)


def _element_face_sigma(mesh: TetMesh, table: FaceSplitTable, elems) -> tuple[np.ndarray, np.ndarray]:
    """Split points (n, 4, 3) and sigmas (n, 4, 3) in split-node order."""
    elems = np.atleast_1d(np.asarray(elems))
    T = mesh.tets[elems]
    pts = np.empty((len(elems), 4, 3))
    sig = np.empty((len(elems), 4, 3))
    for r, (fverts, opp) in enumerate(zip(SPLIT_FACES, SPLIT_OPPOSITE)):
        fid = mesh.tet_faces[elems, opp]
        gv = T[:, fverts]  # global ids in the split-face order
        srt = np.sort(gv, axis=1)
        pos = np.argmax(gv[:, :, None] == srt[:, None, :], axis=2)
        sig[:, r] = np.take_along_axis(table.sigma[fid], pos, axis=1)
        pts[:, r] = table.points[fid]
    return pts, sig


def face_split_point(mesh: TetMesh, elem: int, face: int, table: FaceSplitTable | None = None):
    """Split point and sigma of local face ``face`` (face opposite local vertex ``face``).

    ``sigma`` is returned with respect to the split-face vertex order of the
    module table.
    """
    table = build_face_split_table(mesh) if table is None else table
    r = SPLIT_OPPOSITE.index(face)
    pts, sig = _element_face_sigma(mesh, table, [elem])
    return pts[0, r], sig[0, r]


@dataclass(frozen=True, eq=False)
class WFSplit:
    """The Worsey-Farin split of one macro element."""

    elem: int
    vertices: np.ndarray  # (4, 3)
    incenter: np.ndarray  # (3,)
    kappa: np.ndarray  # (4,) order p1, p2, p4, p3
    split_points: np.ndarray  # (4, 3) nodes 5, 12, 19, 26
    sigma: np.ndarray  # (4, 3)
    subtets: np.ndarray  # (12, 4, 3)

    def node(self, k: int) -> np.ndarray:
        """Coordinates of node 1..4, 5, 12, 19, 26 or 91."""
        if 1 <= k <= 4:
            return self.vertices[k - 1]
        if k in SPLIT_NODES:
            return self.split_points[SPLIT_NODES.index(k)]
        if k == 91:
            return self.incenter
        raise KeyError(k)

    @property
    def volumes(self) -> np.ndarray:
        return signed_volume(self.subtets)

    def alfeld_tet(self, region: int) -> np.ndarray:
        f = SPLIT_FACES[region]
        return np.vstack([self.vertices[list(f)], self.incenter[None, :]])


def _assemble_subtets(V, inc, split_pts) -> np.ndarray:
    n = len(V)
    nodes = {1: V[:, 0], 2: V[:, 1], 3: V[:, 2], 4: V[:, 3], 91: inc}
    for r, k in enumerate(SPLIT_NODES):
        nodes[k] = split_pts[:, r]
    out = np.empty((n, 12, 4, 3))
    for a, row in enumerate(SUBTET_NODES):
        for j, k in enumerate(row):
            out[:, a, j] = nodes[k]
    return out


def build_wf_split(mesh: TetMesh, elem: int, table: FaceSplitTable | None = None) -> WFSplit:
    table = build_face_split_table(mesh) if table is None else table
    V = mesh.points[elem]
    inc = mesh.incenters[0][elem]
    kappa = mesh.incenters[1][elem][list(KAPPA_ORDER)]
    pts, sig = _element_face_sigma(mesh, table, [elem])
    subtets = _assemble_subtets(V[None], inc[None], pts)[0]
    vol = signed_volume(subtets)
    if np.any(vol <= 0):
        raise GeometryError(f"element {elem}: subtet {int(np.argmin(vol)) + 1} has non-positive volume")
    return WFSplit(elem, V.copy(), inc.copy(), kappa, pts[0], sig[0], subtets)


@dataclass(frozen=True, eq=False)
class SplitSet:
    """Splits of all elements of a mesh stored as arrays."""

    incenter: np.ndarray  # (ne, 3)
    kappa: np.ndarray  # (ne, 4) order p1, p2, p4, p3
    split_points: np.ndarray  # (ne, 4, 3)
    sigma: np.ndarray  # (ne, 4, 3)
    subtets: np.ndarray  # (ne, 12, 4, 3)
    table: FaceSplitTable

    def __len__(self) -> int:
        return len(self.incenter)

    def volumes(self) -> np.ndarray:
        return signed_volume(self.subtets)

    def inverse_maps(self) -> tuple[np.ndarray, np.ndarray]:
        """Origins (ne, 12, 3) and 3x3 inverse edge matrices (ne, 12, 3, 3) of all subtets."""
        S = self.subtets
        E = np.transpose(S[:, :, 1:] - S[:, :, :1], (0, 1, 3, 2))
        return np.ascontiguousarray(S[:, :, 0]), np.linalg.inv(E)

    def alfeld_inverse_maps(self, vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Origins and inverse edge matrices of the 4 Alfeld cells per element."""
        n = len(self.incenter)
        A = np.empty((n, 4, 4, 3))
        for r, f in enumerate(SPLIT_FACES):
            A[:, r, :3] = vertices[:, list(f)]
            A[:, r, 3] = self.incenter
        E = np.transpose(A[:, :, 1:] - A[:, :, :1], (0, 1, 3, 2))
        return np.ascontiguousarray(A[:, :, 0]), np.linalg.inv(E)

    def element(self, mesh: TetMesh, e: int) -> WFSplit:
        return WFSplit(e, mesh.points[e].copy(), self.incenter[e], self.kappa[e], self.split_points[e], self.sigma[e], self.subtets[e])


def build_splits(mesh: TetMesh) -> SplitSet:
    """Worsey-Farin splits of every element (vectorised)."""
    table = build_face_split_table(mesh)
    inc, kap = mesh.incenters
    kappa = kap[:, list(KAPPA_ORDER)]
    pts, sig = _element_face_sigma(mesh, table, np.arange(mesh.n_elements))
    subtets = _assemble_subtets(mesh.points, inc, pts)
    vol = signed_volume(subtets)
    if np.any(vol <= 0):
        e, a = np.argwhere(vol <= 0)[0]
        raise GeometryError(f"element {e + 1}: subtet {a + 1} has non-positive volume")
    for arr in (inc, kappa, pts, sig, subtets):
        arr.setflags(write=False)
    return SplitSet(inc, kappa, pts, sig, subtets, table)


def _bary(tet, p) -> np.ndarray:
    E = (tet[1:] - tet[0]).T
    l = np.linalg.solve(E, p - tet[0])
    return np.array([1.0 - l.sum(), l[0], l[1], l[2]])


def locate_subtet(split: WFSplit, p, tol: float = INSIDE_TOL) -> tuple[int, np.ndarray]:
    """Subtet index alpha (1..12) containing ``p`` and the barycentrics there.

    The search visits the four Alfeld cells first and then the three
    subtets of the first cell that contains the point; ties go to the lowest
    index at both stages.
    """
    p = np.asarray(p, dtype=float)
    for t in (tol, 1e-8, 1e-6):
        for r in range(4):
            if _bary(split.alfeld_tet(r), p).min() < -t:
                continue
            for a in range(3 * r, 3 * r + 3):
                lam = _bary(split.subtets[a], p)
                if lam.min() >= -t:
                    return a + 1, lam
    raise GeometryError(f"point {p.tolist()} not found in any subtet of element {split.elem}")


def locate_subtet_exhaustive(split: WFSplit, p, tol: float = INSIDE_TOL) -> tuple[int, np.ndarray]:
    """Reference 12-way scan: lowest alpha whose barycentrics are all >= -tol."""
    p = np.asarray(p, dtype=float)
    for a in range(12):
        lam = _bary(split.subtets[a], p)
        if lam.min() >= -tol:
            return a + 1, lam
    raise GeometryError(f"point {p.tolist()} not found in any subtet of element {split.elem}")
