"""Tetrahedral quadrature: a fixed symmetric degree-9 rule, edge-midpoint
subdivision and uniform-refinement adaptive integration.

Quadrature points are stored as barycentric coordinates; weights are
normalised to sum to one, so a physical integral is ``|T| * sum(w f(x))``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.special import roots_jacobi

from .mesh import DegenerateTetError, as_tet, is_degenerate, signed_volume

__all__ = [
    "QuadRule",
    "AdaptiveConfig",
    "AdaptiveResult",
    "RULE56_TEXT",
    "rule_56",
    "rule_checksum",
    "conical_product_rule",
    "gauss_legendre_cube",
    "subdivide_tet_8",
    "subdivide_many",
    "refine_uniform",
    "integrate_fixed",
    "integrate_adaptive",
    "adaptive_integrals",
]


@dataclass(frozen=True, eq=False)
class QuadRule:
    points: np.ndarray  # (n, 4) barycentric
    weights: np.ndarray  # (n,), sum 1

    def __len__(self) -> int:
        return len(self.weights)

    def physical(self, tet) -> tuple[np.ndarray, np.ndarray]:
        """Points (n, 3) and weights (n,) scaled by the volume of ``tet``."""
        P = as_tet(tet)
        return self.points @ P, self.weights * signed_volume(P)

    def integrate(self, f, tet) -> float:
        x, w = self.physical(tet)
        return float(w @ np.asarray(f(x), dtype=float))


# Orbit table of the fixed degree-9 rule (59 points, all weights positive,
# all points interior; Witherden-Vincent).  Each line: orbit type, the free
# barycentric parameters, and the weight of every point of the orbit.
#   S4          -> the centroid                               (1 point)
#   S31  a      -> permutations of (a, a, a, 1-3a)           (4 points)
#   S22  a      -> permutations of (a, a, 1/2-a, 1/2-a)      (6 points)
#   S211 a b    -> permutations of (a, a, b, 1-2a-b)         (12 points)
RULE56_TEXT = """\
S4 5.80105489124802573356e-2
S31 6.19816994454650842354e-10 6.43192817592563895644e-5
S31 4.51089183454135829610e-2 8.06397997961618276575e-3
S31 1.60774535395261594152e-1 2.31733384624254579829e-2
S31 3.22276521821420974204e-1 2.95629123354292856427e-2
S22 1.12296546004376045328e-1 3.81340801037024655517e-2
S211 3.37758706853385779055e-2 7.18350326442074509057e-1 1.02345593527453279504e-2
S211 1.83641369809927889789e-1 3.44159105781752700892e-2 2.05249159679881380398e-2
S211 4.58871448752459273272e-1 2.55457923304133096764e-3 8.38442219829855219569e-3
"""


def _expand(kind: str, params: list[float]) -> np.ndarray:
    if kind == "S4":
        () = params
        base = (0.25, 0.25, 0.25, 0.25)
    elif kind == "S31":
        (a,) = params
        base = (a, a, a, 1.0 - 3.0 * a)
    elif kind == "S22":
        (a,) = params
        base = (a, a, 0.5 - a, 0.5 - a)
    elif kind == "S211":
        a, b = params
        base = (a, a, b, 1.0 - 2.0 * a - b)
    else:
        raise ValueError(f"unknown orbit type {kind}")
    return np.array(sorted(set(permutations(base)), reverse=True))


def parse_orbits(text: str) -> QuadRule:
    pts, wts = [], []
    for line in text.strip().splitlines():
        tok = line.split()
        kind, nums = tok[0], [float(v) for v in tok[1:]]
        orbit = _expand(kind, nums[:-1])
        pts.append(orbit)
        wts.append(np.full(len(orbit), nums[-1]))
    P = np.vstack(pts)
    W = np.concatenate(wts)
    P.setflags(write=False)
    W.setflags(write=False)
    return QuadRule(P, W)


@lru_cache(maxsize=None)
def rule_56() -> QuadRule:
    """The fixed fully symmetric degree-9 rule (59 points)."""
    return parse_orbits(RULE56_TEXT)


def rule_checksum() -> str:
    return hashlib.sha256(RULE56_TEXT.encode()).hexdigest()


@lru_cache(maxsize=None)
def conical_product_rule(n: int) -> QuadRule:
    """Collapsed Gauss-Jacobi product rule with n**3 points (exact to degree 2n-1)."""
    x1, w1 = roots_jacobi(n, 2.0, 0.0)
    x2, w2 = roots_jacobi(n, 1.0, 0.0)
    x3, w3 = roots_jacobi(n, 0.0, 0.0)
    a, b, c = (x1 + 1) / 2, (x2 + 1) / 2, (x3 + 1) / 2
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = np.einsum("i,j,k->ijk", w1, w2, w3).ravel()
    l2 = A.ravel()
    l3 = ((1 - A) * B).ravel()
    l4 = ((1 - A) * (1 - B) * C).ravel()
    P = np.stack([1 - l2 - l3 - l4, l2, l3, l4], axis=1)
    W = W / W.sum()
    P.setflags(write=False)
    W.setflags(write=False)
    return QuadRule(P, W)


def gauss_legendre_cube(n: int, lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> tuple[np.ndarray, np.ndarray, tuple]:
    """Tensor-product Gauss-Legendre points (n**3, 3) and weights over a box.

    Also returns the three 1-D abscissa arrays (x fastest varying last).
    """
    x, w = np.polynomial.legendre.leggauss(n)
    axes, wax = [], []
    for d in range(3):
        h = hi[d] - lo[d]
        axes.append(lo[d] + (x + 1.0) * h / 2.0)
        wax.append(w * h / 2.0)
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    W = np.einsum("i,j,k->ijk", *wax).ravel()
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1), W, tuple(axes)


# ---------------------------------------------------------------------------
# subdivision

_MID = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
# interior diagonals as pairs of midpoint slots, ordered by vertex-id pairs
_DIAGS = ((0, 5), (1, 4), (2, 3))
# for each diagonal: the other four midpoints in cyclic order around it
_RINGS = ((1, 2, 4, 3), (0, 2, 5, 3), (0, 1, 5, 4))
# slots: 0-3 vertices, 4-9 midpoints of the edges in _MID order
_CORNERS = ((0, 4, 5, 6), (4, 1, 7, 8), (5, 7, 2, 9), (6, 8, 9, 3))


def subdivide_many(T: np.ndarray) -> np.ndarray:
    """Split tetrahedra (m, 4, 3) into (8m, 4, 3) children.

    Children of tet i occupy rows 8i..8i+7: four corner tets similar to the
    parent, then four tets around the shortest interior diagonal of the
    central octahedron (ties go to the diagonal listed first in vertex-pair
    order).  All children keep positive orientation.
    """
    T = np.asarray(T, dtype=float)
    m = len(T)
    N = np.empty((m, 10, 3))
    N[:, :4] = T
    for k, (a, b) in enumerate(_MID):
        N[:, 4 + k] = 0.5 * (T[:, a] + T[:, b])
    out = np.empty((m, 8, 4, 3))
    for c, idx in enumerate(_CORNERS):
        out[:, c] = N[:, list(idx)]
    lens = np.stack([np.linalg.norm(N[:, 4 + d0] - N[:, 4 + d1], axis=1) for d0, d1 in _DIAGS], axis=1)
    choice = np.argmin(lens, axis=1)
    for d, ((d0, d1), ring) in enumerate(zip(_DIAGS, _RINGS)):
        sel = choice == d
        if not sel.any():
            continue
        for j in range(4):
            r0, r1 = ring[j], ring[(j + 1) % 4]
            out[sel, 4 + j] = N[sel][:, [4 + d0, 4 + d1, 4 + r0, 4 + r1]]
    out = out.reshape(-1, 4, 3)
    neg = signed_volume(out) < 0
    if neg.any():
        out[neg] = out[neg][:, [0, 1, 3, 2]]
    return out


def subdivide_tet_8(tet) -> np.ndarray:
    """Eight children (8, 4, 3) of one tetrahedron by edge-midpoint subdivision."""
    P = as_tet(tet)
    if is_degenerate(P):
        raise DegenerateTetError("cannot subdivide a degenerate tetrahedron")
    return subdivide_many(P[None])


def refine_uniform(tet, levels: int) -> np.ndarray:
    T = as_tet(tet)[None]
    for _ in range(levels):
        T = subdivide_many(T)
    return T


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class AdaptiveConfig:
    tol: float = 1e-12
    max_levels: int = 4
    relative: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_levels < 0:
            raise ValueError("max_levels must be >= 0")


@dataclass(frozen=True)
class AdaptiveResult:
    value: float | np.ndarray
    levels: int
    converged: bool


def _apply(f, T, rule: QuadRule):
    """Sum of rule applications over cells T (m, 4, 3) for a vectorised f."""
    x = np.einsum("qk,mkd->mqd", rule.points, T).reshape(-1, 3)
    vals = np.asarray(f(x), dtype=float)
    w = (signed_volume(T)[:, None] * rule.weights[None, :]).reshape(-1)
    return np.tensordot(w, vals, axes=(0, 0))


def integrate_fixed(f, tet, rule: QuadRule | None = None):
    rule = rule_56() if rule is None else rule
    return _apply(f, as_tet(tet)[None], rule)


def _close(a, b, cfg: AdaptiveConfig) -> bool:
    diff = np.max(np.abs(np.asarray(a) - np.asarray(b)))
    if cfg.relative:
        return bool(diff <= cfg.tol * max(np.max(np.abs(b)), 1e-300))
    return bool(diff <= cfg.tol)


def integrate_adaptive(f, tet, cfg: AdaptiveConfig = AdaptiveConfig(), rule: QuadRule | None = None) -> AdaptiveResult:
    """Integrate ``f`` over ``tet`` with successively refined uniform subdivisions.

    Level L applies the rule on the 8**L cells of L-fold edge-midpoint
    subdivision.  Refinement stops once two consecutive levels differ by at
    most ``cfg.tol`` (absolute unless ``cfg.relative``) or ``cfg.max_levels``
    is reached; the value of the deepest level is returned.  ``f`` maps an
    (n, 3) array to (n,) or (n, m) values.
    """
    rule = rule_56() if rule is None else rule
    T = as_tet(tet)[None]
    prev = _apply(f, T, rule)
    for level in range(1, cfg.max_levels + 1):
        T = subdivide_many(T)
        cur = _apply(f, T, rule)
        if _close(cur, prev, cfg):
            return AdaptiveResult(cur, level, True)
        prev = cur
    return AdaptiveResult(prev, cfg.max_levels, False)


def adaptive_integrals(f, tets, cfg: AdaptiveConfig = AdaptiveConfig(), rule: QuadRule | None = None, max_points: int = 2_000_000):
    """:func:`integrate_adaptive` for many tetrahedra (n, 4, 3) at once.

    ``f(x, owner)`` receives points (m, 3) and the index of the tetrahedron
    each point belongs to, and returns (m,) or (m, k) values.  Returns the
    integrals (n,) or (n, k), the level used per tetrahedron and the
    converged flags.
    """
    rule = rule_56() if rule is None else rule
    tets = np.asarray(tets, dtype=float)
    n = len(tets)
    nq = len(rule)
    per_cell_level = [8**L * nq for L in range(cfg.max_levels + 1)]

    def level_integrals(ids, level):
        # cells of each tet at this level, in batches bounded by max_points
        out = []
        batch = max(1, max_points // per_cell_level[level])
        for s in range(0, len(ids), batch):
            sub = ids[s : s + batch]
            T = tets[sub]
            for _ in range(level):
                T = subdivide_many(T)
            ncell = 8**level
            x = np.einsum("qk,mkd->mqd", rule.points, T).reshape(-1, 3)
            owner = np.repeat(sub, ncell * nq)
            vals = np.asarray(f(x, owner), dtype=float)
            w = (signed_volume(T)[:, None] * rule.weights[None, :]).reshape(-1)
            wv = (w.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals).reshape((len(sub), ncell * nq) + vals.shape[1:])
            out.append(wv.sum(axis=1))
        return np.concatenate(out, axis=0)

    prev = level_integrals(np.arange(n), 0)
    result = prev.copy()
    levels = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for level in range(1, cfg.max_levels + 1):
        if active.size == 0:
            break
        cur = level_integrals(active, level)
        diff = np.abs(cur - prev[active])
        if diff.ndim > 1:
            diff = diff.reshape(len(active), -1).max(axis=1)
        if cfg.relative:
            ref = np.abs(cur).reshape(len(active), -1).max(axis=1)
            done = diff <= cfg.tol * np.maximum(ref, 1e-300)
        else:
            done = diff <= cfg.tol
        result[active] = cur
        levels[active] = level
        converged[active[done]] = True
        prev[active] = cur
        active = active[~done]
    return result, levels, converged
