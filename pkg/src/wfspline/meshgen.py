"""Unit-cube test meshes.

Both families start from a randomly perturbed Kuhn split (6 tets per
cell) of a 4 x 4 x 2 (source) or 4 x 2 x 4 (target) cell grid, i.e. 192
elements, and are refined uniformly by edge midpoints, so level L has
192 * 8**(L-1) elements and half the mesh size of level L-1.  Different
cell layouts and perturbation seeds keep the two families from sharing
faces.
"""

from __future__ import annotations

from itertools import permutations
from pathlib import Path

import numpy as np

from .mesh import TetMesh, signed_volume

__all__ = [
    "kuhn_box",
    "perturb",
    "refine_uniform",
    "source_mesh",
    "target_mesh",
    "generate_sequence",
    "SOURCE_NAME",
    "TARGET_NAME",
]

SOURCE_NAME = "source_{level}.msh"
TARGET_NAME = "target_{level}.msh"
DEFAULT_JITTER = 0.15
SOURCE_CELLS = (4, 4, 2)
TARGET_CELLS = (4, 2, 4)


def _grid(nx, ny, nz):
    x = np.linspace(0.0, 1.0, nx + 1)
    y = np.linspace(0.0, 1.0, ny + 1)
    z = np.linspace(0.0, 1.0, nz + 1)
    X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


def kuhn_box(nx: int, ny: int, nz: int) -> tuple[np.ndarray, np.ndarray]:
    """Kuhn (6 tets per cell, all sharing the main diagonal) split of the unit cube."""
    V = _grid(nx, ny, nz)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    tets = []
    for perm in permutations(range(3)):
        steps = np.eye(3, dtype=int)[list(perm)]
        path = [np.zeros(3, dtype=int)]
        for s in steps:
            path.append(path[-1] + s)
        tets.append(np.stack([vid(I + p[0], J + p[1], K + p[2]) for p in path], axis=1))
    T = np.stack(tets, axis=1).reshape(-1, 4)
    return V, _orient(V, T)


def _orient(V, T):
    neg = signed_volume(V[T]) < 0
    T = T.copy()
    T[neg] = T[neg][:, [0, 1, 3, 2]]
    return T


def perturb(V, T, amplitude: float, spacing: float, seed: int, min_quality: float = 0.2) -> np.ndarray:
    """Random vertex displacement that keeps every vertex on its boundary planes.

    The amplitude is halved until every element keeps at least
    ``min_quality`` of its unperturbed volume.
    """
    rng = np.random.default_rng(seed)
    disp = rng.uniform(-1.0, 1.0, size=V.shape) * spacing
    on_bnd = (np.abs(V) < 1e-12) | (np.abs(V - 1.0) < 1e-12)
    disp[on_bnd] = 0.0
    vol0 = signed_volume(V[T])
    amp = amplitude
    while amp > 1e-6:
        W = V + amp * disp
        if np.all(signed_volume(W[T]) >= min_quality * vol0):
            return W
        amp /= 2
    return V.copy()


def refine_uniform(mesh: TetMesh) -> TetMesh:
    """Split every element into 8 by edge midpoints (shared midpoints merged)."""
    from .quadrature import subdivide_many

    C = subdivide_many(mesh.points).reshape(-1, 3)
    V, inv = np.unique(C, axis=0, return_inverse=True)
    return TetMesh.from_arrays(V, inv.reshape(-1, 4))


def _refined_kuhn(cells, level: int, seed: int, jitter: float) -> TetMesh:
    if level < 1:
        raise ValueError("grid level must be >= 1")
    V, T = kuhn_box(*cells)
    V = perturb(V, T, jitter, 0.5 / max(cells), seed)
    mesh = TetMesh.from_arrays(V, T)
    for _ in range(level - 1):
        mesh = refine_uniform(mesh)
    return mesh


def source_mesh(level: int, seed: int = 0, jitter: float = DEFAULT_JITTER) -> TetMesh:
    return _refined_kuhn(SOURCE_CELLS, level, seed, jitter)


def target_mesh(level: int, seed: int = 1, jitter: float = DEFAULT_JITTER) -> TetMesh:
    return _refined_kuhn(TARGET_CELLS, level, seed, jitter)


def generate_sequence(out_dir, levels, seed: int = 0, jitter: float = DEFAULT_JITTER) -> list[tuple[int, Path, Path]]:
    """Write ``source_L.msh`` / ``target_L.msh`` for every level; returns the paths.

    All levels of one family share the base perturbation (seed ``seed`` for
    the source, ``seed + 1`` for the target), so the sequence is nested.
    """
    from .mshio import save_mesh

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for level in levels:
        src = source_mesh(level, seed=seed, jitter=jitter)
        tgt = target_mesh(level, seed=seed + 1, jitter=jitter)
        ps = out / SOURCE_NAME.format(level=level)
        pt = out / TARGET_NAME.format(level=level)
        save_mesh(ps, src)
        save_mesh(pt, tgt)
        written.append((level, ps, pt))
    return written
