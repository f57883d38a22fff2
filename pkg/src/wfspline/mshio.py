"""Gmsh MSH 4.1 ASCII reading and writing (linear tetrahedra only)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import DegenerateTetError, MeshError, TetMesh, is_degenerate

__all__ = ["MshParseError", "read_msh", "load_mesh", "write_msh", "save_mesh"]

TET4 = 4
_VOLUME_TYPES = {4, 5, 6, 7, 11, 12, 13, 14, 17, 18, 19, 29, 30, 31, 92, 93}


class MshParseError(MeshError):
    """Malformed or unsupported MSH content."""


def _sections(lines):
    """Yield (name, body lines) for every $Section ... $EndSection block."""
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i].strip()
        if line.startswith("$") and not line.startswith("$End"):
            name = line[1:]
            j = i + 1
            while j < n and lines[j].strip() != f"$End{name}":
                j += 1
            if j == n:
                raise MshParseError(f"section ${name} is not terminated")
            yield name, lines[i + 1 : j]
            i = j + 1
        else:
            i += 1


def _parse_nodes(body):
    it = iter(body)
    try:
        nblocks, nnodes, _, _ = (int(v) for v in next(it).split())
        tags = np.empty(nnodes, dtype=np.int64)
        xyz = np.empty((nnodes, 3))
        k = 0
        for _ in range(nblocks):
            _dim, _tag, parametric, count = (int(v) for v in next(it).split())
            if parametric:
                raise MshParseError("parametric node coordinates are not supported")
            for m in range(count):
                tags[k + m] = int(next(it))
            for m in range(count):
                xyz[k + m] = [float(v) for v in next(it).split()[:3]]
            k += count
    except (StopIteration, ValueError) as exc:
        raise MshParseError(f"malformed $Nodes section: {exc}") from exc
    if k != nnodes:
        raise MshParseError(f"$Nodes announces {nnodes} nodes but lists {k}")
    return tags, xyz


def _parse_elements(body):
    it = iter(body)
    tets, tags = [], []
    try:
        nblocks, _, _, _ = (int(v) for v in next(it).split())
        for _ in range(nblocks):
            dim, _etag, etype, count = (int(v) for v in next(it).split())
            rows = [next(it).split() for _ in range(count)]
            if dim < 3 and etype not in _VOLUME_TYPES:
                continue  # boundary/physical facets carry no volume information
            if etype != TET4:
                first = rows[0][0] if rows else "?"
                raise MshParseError(f"element {first}: unsupported cell type {etype} (only 4-node tetrahedra)")
            for r in rows:
                if len(r) != 5:
                    raise MshParseError(f"element {r[0]}: expected 4 nodes, got {len(r) - 1}")
                tags.append(int(r[0]))
                tets.append([int(v) for v in r[1:]])
    except (StopIteration, ValueError) as exc:
        raise MshParseError(f"malformed $Elements section: {exc}") from exc
    return np.array(tags, dtype=np.int64), np.array(tets, dtype=np.int64).reshape(-1, 4)


def read_msh(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (vertices, tets as 0-based vertex indices, element tags)."""
    text = Path(path).read_text()
    lines = text.splitlines()
    sec = dict()
    for name, body in _sections(lines):
        sec.setdefault(name, body)
    if "MeshFormat" not in sec:
        raise MshParseError("missing $MeshFormat section")
    fmt = sec["MeshFormat"][0].split()
    if len(fmt) < 2 or not fmt[0].startswith("4.1"):
        raise MshParseError(f"unsupported MSH version {fmt[0] if fmt else '?'} (need 4.1)")
    if fmt[1] != "0":
        raise MshParseError("binary MSH files are not supported")
    if "Nodes" not in sec or "Elements" not in sec:
        raise MshParseError("missing $Nodes or $Elements section")
    ntags, xyz = _parse_nodes(sec["Nodes"])
    etags, enodes = _parse_elements(sec["Elements"])
    if len(enodes) == 0:
        raise MshParseError("no tetrahedra in file")
    lookup = {int(t): i for i, t in enumerate(ntags)}
    try:
        tets = np.vectorize(lookup.__getitem__, otypes=[np.int64])(enodes)
    except KeyError as exc:
        raise MshParseError(f"element references unknown node {exc.args[0]}") from None
    return xyz, tets, etags


def load_mesh(path) -> TetMesh:
    """Read an MSH 4.1 ASCII file into a :class:`TetMesh` (orientation repaired)."""
    V, T, tags = read_msh(path)
    bad = np.flatnonzero(is_degenerate(V[T]))
    if bad.size:
        raise DegenerateTetError(f"element {tags[bad[0]]} has zero volume")
    return TetMesh.from_arrays(V, T)


def write_msh(path, vertices, tets) -> None:
    """Write linear tetrahedra as MSH 4.1 ASCII (one node block, one element block)."""
    V = np.asarray(vertices, dtype=float)
    T = np.asarray(tets, dtype=np.int64)
    nv, ne = len(V), len(T)
    out = ["$MeshFormat", "4.1 0 8", "$EndMeshFormat", "$Nodes", f"1 {nv} 1 {nv}", f"3 1 0 {nv}"]
    out.extend(str(i + 1) for i in range(nv))
    out.extend(f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in V)
    out += ["$EndNodes", "$Elements", f"1 {ne} 1 {ne}", f"3 1 {TET4} {ne}"]
    out.extend(f"{e + 1} {a + 1} {b + 1} {c + 1} {d + 1}" for e, (a, b, c, d) in enumerate(T))
    out.append("$EndElements")
    Path(path).write_text("\n".join(out) + "\n")


def save_mesh(path, mesh: TetMesh) -> None:
    write_msh(path, mesh.vertices, mesh.tets)
