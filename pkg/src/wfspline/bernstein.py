"""Bernstein-Bezier polynomials on tetrahedra.

Multi-indices are ordered lexicographically descending, e.g. for degree 3::

    3000, 2100, 2010, 2001, 1200, 1110, 1101, 1020, 1011, 1002,
    0300, 0210, 0201, 0120, 0111, 0102, 0030, 0021, 0012, 0003

The degree-3 helpers (:class:`CubicBForm`, :func:`decasteljau_eval`,
:func:`decasteljau_gradient`) are the reference implementation; the batched
degree-``k`` helpers at the bottom of the module are what the transfer
pipeline uses for piecewise polynomial fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .mesh import DegenerateTetError, as_tet

__all__ = [
    "multi_indices",
    "CUBIC_INDICES",
    "index_of",
    "bernstein_value",
    "domain_points",
    "CubicBForm",
    "decasteljau_eval",
    "decasteljau_gradient",
    "coeff_bounds",
    "bernstein_basis",
    "bernstein_basis_dlambda",
    "reference_mass_matrix",
    "lagrange_to_bernstein",
]


@lru_cache(maxsize=None)
def multi_indices(degree: int = 3) -> tuple[tuple[int, int, int, int], ...]:
    """All (i, j, l, m) with i + j + l + m = degree, lexicographically descending."""
    out = []
    for i in range(degree, -1, -1):
        for j in range(degree - i, -1, -1):
            for l in range(degree - i - j, -1, -1):
                out.append((i, j, l, degree - i - j - l))
    return tuple(out)


CUBIC_INDICES = multi_indices(3)


@lru_cache(maxsize=None)
def _index_table(degree: int) -> dict:
    return {mi: n for n, mi in enumerate(multi_indices(degree))}


def index_of(mi, degree: int | None = None) -> int:
    """Position of a multi-index in the canonical enumeration."""
    mi = tuple(int(v) for v in mi)
    if len(mi) != 4 or min(mi) < 0:
        raise ValueError(f"invalid multi-index {mi}")
    deg = sum(mi) if degree is None else degree
    try:
        return _index_table(deg)[mi]
    except KeyError:
        raise ValueError(f"invalid multi-index {mi} for degree {deg}") from None


def _multinomial(mi) -> int:
    n = sum(mi)
    out = factorial(n)
    for v in mi:
        out //= factorial(v)
    return out


def bernstein_value(mi, lam) -> float:
    """B_mi(lam) = n!/(i! j! l! m!) * prod(lam_k ** mi_k)."""
    lam = np.asarray(lam, dtype=float)
    val = float(_multinomial(mi))
    for v, l in zip(mi, lam):
        val *= l**v
    return val


def domain_points(tet, degree: int = 3) -> list[tuple[tuple[int, int, int, int], np.ndarray]]:
    """Domain points xi = (i p1 + j p2 + l p3 + m p4) / degree in canonical order."""
    P = as_tet(tet)
    return [(mi, np.asarray(mi, dtype=float) @ P / degree) for mi in multi_indices(degree)]


@dataclass
class CubicBForm:
    """A cubic polynomial over one tetrahedron stored by its 20 B-coefficients."""

    tet: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.tet = as_tet(self.tet)
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if self.coeffs.shape != (20,):
            raise ValueError(f"a cubic B-form needs 20 coefficients, got {self.coeffs.size}")

    def coefficient(self, mi) -> float:
        return float(self.coeffs[index_of(mi, 3)])

    def barycentric(self, p) -> np.ndarray:
        from .mesh import barycentric

        return barycentric(self.tet, p)

    def __call__(self, p) -> float:
        return decasteljau_eval(self, self.barycentric(p))


def _decasteljau_reduce(table: dict, lam) -> dict:
    """One de Casteljau step: degree-n coefficient dict -> degree-(n-1)."""
    n = sum(next(iter(table)))
    out = {}
    for mi in multi_indices(n - 1):
        acc = 0.0
        for k in range(4):
            up = list(mi)
            up[k] += 1
            acc += lam[k] * table[tuple(up)]
        out[mi] = acc
    return out


_SPLIT = 134217729.0  # 2**27 + 1 (Veltkamp)


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    z = s - a
    return s, (a - (s - z)) + (b - z)


def _two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


def decasteljau_eval(b: CubicBForm, lam) -> float:
    """Evaluate a cubic B-form at barycentric ``lam`` with the de Casteljau algorithm.

    ``lam`` must sum to one; negative components are allowed and give the
    polynomial extrapolation outside the tetrahedron.  The recursion is
    compensated: the rounding error of every product and sum is captured
    exactly and propagated alongside, so the result stays accurate to a few
    ulps even when the value is much smaller than the coefficients.
    """
    lam = [float(v) for v in np.asarray(lam, dtype=float)]
    val = {mi: float(c) for mi, c in zip(CUBIC_INDICES, b.coeffs)}
    err = dict.fromkeys(val, 0.0)
    for n in (2, 1, 0):
        nval, nerr = {}, {}
        for mi in multi_indices(n):
            s = e = 0.0
            for k in range(4):
                up = list(mi)
                up[k] += 1
                up = tuple(up)
                p, ep = _two_prod(lam[k], val[up])
                s, es = _two_sum(s, p)
                e += ep + es + lam[k] * err[up]
            nval[mi], nerr[mi] = s, e
        val, err = nval, nerr
    key = (0, 0, 0, 0)
    return val[key] + err[key]


def decasteljau_gradient(b: CubicBForm, lam) -> np.ndarray:
    """Cartesian gradient of a cubic B-form.

    Directional derivatives along the edges p1->p2, p1->p3, p1->p4 are
    computed by running de Casteljau on the difference coefficients, and
    then solved against the edge matrix.
    """
    lam = np.asarray(lam, dtype=float)
    P = b.tet
    E = (P[1:] - P[0]).T  # columns are the edge vectors
    if abs(np.linalg.det(E)) <= 1e-14 * np.abs(E).max() ** 3:
        raise DegenerateTetError("degenerate tetrahedron in gradient evaluation")
    table = dict(zip(CUBIC_INDICES, b.coeffs))
    # degree-2 de Casteljau on each coefficient difference c_{b+e_k} - c_{b+e_1}
    deriv = np.empty(3)
    for k in range(1, 4):
        diff = {}
        for mi in multi_indices(2):
            up_k = list(mi)
            up_k[k] += 1
            up_0 = list(mi)
            up_0[0] += 1
            diff[mi] = table[tuple(up_k)] - table[tuple(up_0)]
        for _ in range(2):
            diff = _decasteljau_reduce(diff, lam)
        deriv[k - 1] = 3.0 * diff[(0, 0, 0, 0)]
    return np.linalg.solve(E.T, deriv)


def coeff_bounds(b: CubicBForm) -> tuple[float, float]:
    """Bounds (min, max) that every value over the tetrahedron must respect."""
    return float(b.coeffs.min()), float(b.coeffs.max())


# ---------------------------------------------------------------------------
# batched degree-k helpers


@lru_cache(maxsize=None)
def _mi_array(degree: int) -> np.ndarray:
    return np.array(multi_indices(degree), dtype=np.int64)


@lru_cache(maxsize=None)
def _multinomials(degree: int) -> np.ndarray:
    return np.array([_multinomial(mi) for mi in multi_indices(degree)], dtype=float)


def _powers(lam: np.ndarray, degree: int) -> np.ndarray:
    """lam ** p for p = 0..degree, shape (n, 4, degree+1)."""
    pw = np.ones(lam.shape + (degree + 1,))
    for p in range(1, degree + 1):
        pw[..., p] = pw[..., p - 1] * lam
    return pw


def bernstein_basis(degree: int, lam) -> np.ndarray:
    """All degree-``degree`` Bernstein polynomials at barycentrics ``lam`` (n, 4) -> (n, nb)."""
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    if degree == 0:
        return np.ones((lam.shape[0], 1))
    mi = _mi_array(degree)
    pw = _powers(lam, degree)
    out = np.ones((lam.shape[0], len(mi)))
    for k in range(4):
        out *= pw[:, k, mi[:, k]]
    return out * _multinomials(degree)


def bernstein_basis_dlambda(degree: int, lam) -> np.ndarray:
    """Partial derivatives dB/dlam_k treating the four barycentrics as independent.

    Returns shape (n, nb, 4).  Combine with the gradients of the barycentric
    coordinates to get Cartesian gradients.
    """
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    mi = _mi_array(degree)
    n = lam.shape[0]
    out = np.zeros((n, len(mi), 4))
    if degree == 0:
        return out
    lower = bernstein_basis(degree - 1, lam)
    table = _index_table(degree - 1)
    for b, m in enumerate(multi_indices(degree)):
        for k in range(4):
            if m[k] == 0:
                continue
            down = list(m)
            down[k] -= 1
            out[:, b, k] = degree * lower[:, table[tuple(down)]]
    return out


@lru_cache(maxsize=None)
def reference_mass_matrix(degree: int) -> np.ndarray:
    """Mass matrix of the Bernstein basis on a tetrahedron of unit volume.

    int_T B_a B_b = |T| (n!)^2 / (a! b!) * 3! (a+b)! / (2n+3)!
    """
    mis = multi_indices(degree)
    nb = len(mis)
    M = np.empty((nb, nb))
    denom = factorial(2 * degree + 3)
    for r, a in enumerate(mis):
        for c, b in enumerate(mis):
            num = factorial(degree) ** 2 * 6
            for x, y in zip(a, b):
                num *= factorial(x + y)
                num /= factorial(x) * factorial(y)
            M[r, c] = num / denom
    M.setflags(write=False)
    return M


def basis_size(degree: int) -> int:
    return comb(degree + 3, 3)


@lru_cache(maxsize=None)
def lagrange_to_bernstein(degree: int) -> np.ndarray:
    """Matrix mapping values at the domain points to B-coefficients."""
    lam = _mi_array(degree).astype(float) / max(degree, 1)
    V = bernstein_basis(degree, lam)
    out = np.linalg.inv(V)
    out.setflags(write=False)
    return out
