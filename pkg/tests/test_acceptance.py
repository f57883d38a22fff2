"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
written straight to the terminal (outside pytest's capture).
"""

import itertools
import math
import time

import numpy as np
import pytest

from wfspline.bernstein import CUBIC_INDICES, CubicBForm, bernstein_basis, decasteljau_eval
from wfspline.bvh import build_bvh, locate_exhaustive, locate_points
from wfspline.coefficients import HermiteData, MacroCoefficients, WFSpline, subtet_bform
from wfspline.bernstein import decasteljau_gradient
from wfspline.fields import u1
from wfspline.mesh import barycentric, signed_volume
from wfspline.meshgen import source_mesh, target_mesh
from wfspline.quadrature import integrate_adaptive, refine_uniform, rule_56
from wfspline.smoothing import build_edge_frames
from wfspline.split import build_splits
from wfspline.study import ORDER_BANDS, fitted_order, run_conservation, run_convergence, run_sample

from .conftest import REF_TET, cubic, exact_bform_value

pytestmark = pytest.mark.acceptance

_property_seconds = []


@pytest.fixture
def verdict(capsys):
    def report(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  {name}: {detail}", flush=True)
        assert ok, f"{name}: {detail}"

    return report


@pytest.fixture(scope="module")
def meshes():
    return {L: (source_mesh(L), target_mesh(L)) for L in (1, 2, 3)}


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    _property_seconds.append(time.perf_counter() - t0)
    return out


def _spline(mesh, f):
    frames = build_edge_frames(mesh).element_frames(mesh)
    return WFSpline.from_hermite(mesh, HermiteData.from_function(mesh.points, f, f.grad, frames))


# ---------------------------------------------------------------------------
# 1. property suite


def test_1a_bernstein_properties(verdict):
    def run():
        rng = np.random.default_rng(1)
        pou = corner = dc = 0.0
        for _ in range(100):
            while True:
                P = REF_TET + 0.25 * rng.normal(size=(4, 3))
                if np.linalg.det(P[1:] - P[0]) > 0.5:
                    break
            b = CubicBForm(P, rng.normal(size=20))
            lam = rng.dirichlet(np.ones(4))
            pou = max(pou, abs(bernstein_basis(3, lam[None]).sum() - 1.0))
            for k in range(4):
                mi = tuple(3 * int(j == k) for j in range(4))
                corner = max(corner, abs(decasteljau_eval(b, np.eye(4)[k]) - b.coeffs[CUBIC_INDICES.index(mi)]))
            # direct summation carried out in exact arithmetic
            direct = exact_bform_value(b.coeffs, lam, CUBIC_INDICES)
            dc = max(dc, abs(decasteljau_eval(b, lam) - direct) / abs(direct))
        return pou, corner, dc

    pou, corner, dc = _timed(run)
    ok = pou <= 1e-13 and corner == 0.0 and dc <= 1e-14
    verdict("1a Bernstein partition of unity / corner / de Casteljau", ok,
            f"max |sum B - 1| = {pou:.1e} (<= 1e-13), corner mismatch = {corner:.1e} (exact), "
            f"de Casteljau vs direct rel = {dc:.1e} (<= 1e-14)")


def test_1b_split_partition(verdict, meshes):
    def run():
        worst, vmin = 0.0, np.inf
        for L in (1, 2, 3):
            for m in meshes[L]:
                vol = build_splits(m).volumes()
                worst = max(worst, np.max(np.abs(vol.sum(axis=1) - m.volumes) / m.volumes))
                vmin = min(vmin, vol.min())
        return worst, vmin

    worst, vmin = _timed(run)
    verdict("1b WF split volume partition and orientation (grids 1-3)", worst <= 1e-12 and vmin > 0,
            f"max rel volume defect = {worst:.1e} (<= 1e-12), min subtet volume = {vmin:.2e} (> 0)")


def test_1c_cubic_reproduction(verdict, meshes):
    def run():
        rng = np.random.default_rng(2)
        m = meshes[1][0]
        pts = (rng.dirichlet(np.ones(4), (m.n_elements, 1000)) @ m.points).reshape(-1, 3)
        elems = np.repeat(np.arange(m.n_elements), 1000)
        worst = 0.0
        for _ in range(5):
            f = cubic(rng.normal(size=20))
            ex = f(pts)
            v = _spline(m, f).evaluate(pts, elems, gradient=False)
            worst = max(worst, np.abs(v - ex).max() / np.abs(ex).max())
        return worst

    worst = _timed(run)
    verdict("1c cubic reproduction (5 random P3, 10^3 points/element, grid 1)", worst <= 1e-10,
            f"max rel error = {worst:.1e} (<= 1e-10)")


def test_1d_continuity(verdict, meshes):
    def run():
        rng = np.random.default_rng(3)
        m = meshes[1][0]
        s = _spline(m, u1)
        dv = dg = 0.0
        # macro-element faces
        inner = [(e, i) for e in range(m.n_elements) for i in range(4) if m.face_neighbors[e, i] > e]
        for k in rng.choice(len(inner), 200, replace=False):
            e, i = inner[k]
            n = m.face_neighbors[e, i]
            p = rng.dirichlet(np.ones(3), 20) @ m.points[e][[j for j in range(4) if j != i]]
            va, ga = s.evaluate(p, np.full(20, e))
            vb, gb = s.evaluate(p, np.full(20, n))
            dv, dg = max(dv, np.abs(va - vb).max()), max(dg, np.abs(ga - gb).max())
        # internal subtet faces
        faces = []
        for e in range(m.n_elements):
            sub = s.splits.subtets[e]
            for a, b in itertools.combinations(range(12), 2):
                A = {tuple(np.round(v, 14)) for v in sub[a]}
                B = {tuple(np.round(v, 14)) for v in sub[b]}
                if len(A & B) == 3:
                    faces.append((e, a, b, np.array(sorted(A & B))))
        for k in rng.choice(len(faces), 200, replace=False):
            e, a, b, F = faces[k]
            split = s.splits.element(m, e)
            c = MacroCoefficients(s.coeffs[e])
            for p in rng.dirichlet(np.ones(3), 20) @ F:
                out = []
                for alpha in (a, b):
                    bf = subtet_bform(split, c, alpha + 1)
                    lam = barycentric(split.subtets[alpha], p)
                    out.append((decasteljau_eval(bf, lam), decasteljau_gradient(bf, lam)))
                dv = max(dv, abs(out[0][0] - out[1][0]))
                dg = max(dg, np.abs(out[0][1] - out[1][1]).max())
        return dv, dg

    dv, dg = _timed(run)
    verdict("1d C0/C1 across 200 macro faces and 200 internal subtet faces", dv <= 1e-11 and dg <= 1e-8,
            f"max value jump = {dv:.1e} (<= 1e-11), max gradient jump = {dg:.1e} (<= 1e-8)")


def test_1e_maximum_principle(verdict, meshes):
    def run():
        rng = np.random.default_rng(4)
        m = meshes[1][0]
        s = _spline(m, u1)
        lo, hi = s.bounds()
        elems = rng.integers(0, m.n_elements, 10_000)
        alpha = rng.integers(0, 12, 10_000)
        lam = rng.dirichlet(np.ones(4), 10_000)
        pts = np.einsum("nk,nkd->nd", lam, s.splits.subtets[elems, alpha])
        v, a = s.evaluate(pts, elems, gradient=False, return_alpha=True)
        below = np.max(lo[elems, a - 1] - v)
        above = np.max(v - hi[elems, a - 1])
        return max(below, above, 0.0)

    viol = _timed(run)
    verdict("1e maximum principle (10^4 evaluations)", viol <= 1e-14, f"max bound violation = {viol:.1e}")


def test_1f_quadrature_exactness(verdict):
    def run():
        r = rule_56()
        x, w = r.physical(REF_TET)
        worst = 0.0
        mons = [(a, b, c) for a in range(10) for b in range(10 - a) for c in range(10 - a - b)]
        for a, b, c in mons:
            exact = math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 3)
            worst = max(worst, abs(w @ (x[:, 0] ** a * x[:, 1] ** b * x[:, 2] ** c) - exact) / exact)
        return len(mons), worst, len(r)

    n, worst, npts = _timed(run)
    verdict("1f quadrature degree-9 exactness (all 220 monomials)", n == 220 and worst <= 1e-12,
            f"{npts}-point rule, max rel error = {worst:.1e} (<= 1e-12)")


def test_1g_property_suite_runtime(verdict):
    total = sum(_property_seconds)
    verdict("1g property suite runtime", len(_property_seconds) == 6 and total < 60.0,
            f"{total:.1f} s over {len(_property_seconds)} checks (< 60 s)")


# ---------------------------------------------------------------------------
# 2. convergence


@pytest.fixture(scope="module")
def convergence(meshes):
    out = {}
    for k in (1, 2):
        for method in ("wf", "linear"):
            out[k, method] = run_convergence(u1, (1, 2, 3), k, method, meshes=meshes)
    return out


def _orders_detail(rep):
    pair = ", ".join(f"{o:.2f}" for o in rep.column("order_l2")[1:])
    return pair


@pytest.mark.parametrize("k", [1, 2])
def test_2a_solution_order(verdict, convergence, k):
    rep = convergence[k, "wf"]
    lo, hi = ORDER_BANDS[k][0]
    o = fitted_order(rep.column("h"), rep.column("err_l2"))
    errs = ", ".join(f"{e:.3e}" for e in rep.column("err_l2"))
    verdict(f"2a WF u1 L2 order, k={k}", lo <= o <= hi,
            f"slope over grids 1-3 = {o:.3f} (band [{lo}, {hi}]); errors {errs}; pairwise {_orders_detail(rep)}")


@pytest.mark.parametrize("k", [1, 2])
def test_2b_gradient_order(verdict, convergence, k):
    rep = convergence[k, "wf"]
    lo, hi = ORDER_BANDS[k][1]
    o = fitted_order(rep.column("h"), rep.column("err_grad"))
    errs = ", ".join(f"{e:.3e}" for e in rep.column("err_grad"))
    verdict(f"2b WF u1 gradient-magnitude order, k={k}", lo <= o <= hi,
            f"slope over grids 1-3 = {o:.3f} (band [{lo}, {hi}]); errors {errs}")


@pytest.mark.parametrize("k", [1, 2])
def test_2c_wf_below_linear(verdict, convergence, k):
    wf = convergence[k, "wf"].column("err_l2")
    lin = convergence[k, "linear"].column("err_l2")
    ok = all(a < b for a, b in zip(wf, lin))
    detail = "; ".join(f"grid {L}: WF {a:.4e} vs linear {b:.4e}" for L, a, b in zip((1, 2, 3), wf, lin))
    verdict(f"2c WF error strictly below linear interpolation, k={k}", ok, detail)


# ---------------------------------------------------------------------------
# 3. conservation


@pytest.fixture(scope="module")
def conservation(meshes):
    s, t = meshes[1]
    rep = run_conservation(u1, s, t, k=1)
    return {name: dict(zip(rep.column("step"), rep.column(name))) for name in rep.columns[1:]}


def test_3a_geometric_c1_total(verdict, conservation):
    tot = conservation["geometric_c1"]["Total"]
    verdict("3a geometric-C1 WF total mass error (grid 1, u1)", 1e-3 <= tot <= 1e-2, f"{tot:.3e} (order 1e-3 .. 1e-2)")


def test_3b_global_c0_adaptive_total(verdict, conservation):
    tot = conservation["global_c0_adaptive"]["Total"]
    verdict("3b global-C0 + adaptive total mass error", tot <= 1e-7, f"{tot:.3e} (<= 1e-7)")


def test_3c_sync_delta(verdict, conservation):
    worst = max(abs(v["Sync"]) for v in conservation.values())
    verdict("3c synchronisation-step mass delta", worst <= 1e-14, f"max |Sync| = {worst:.1e} (<= 1e-14)")


def test_3d_adaptive_projection_step(verdict, conservation):
    # same geometric C1 spline, fixed rule vs adaptive projection
    fixed = abs(conservation["geometric_c1"]["L2-proj"])
    adaptive = abs(conservation["geometric_c1_adaptive"]["L2-proj"])
    c0 = abs(conservation["global_c0_adaptive"]["L2-proj"])
    verdict("3d adaptive quadrature projection-step mass error", adaptive < 1e-9,
            f"{adaptive:.3e} (< 1e-9; fixed rule: {fixed:.3e}; global C0 + adaptive: {c0:.3e})")


# ---------------------------------------------------------------------------
# 4. sampling


@pytest.mark.parametrize("n, expected", [(33, 35_937), (97, 912_673)])
def test_4_sampling_counts(verdict, tmp_path, n, expected):
    run_sample(lambda x: (u1(x), u1.grad(x)), n, tmp_path, "u1")
    with open(tmp_path / "u1.csv") as fh:
        csv_records = sum(1 for _ in fh) - 1
    with open(tmp_path / "u1.vtk") as fh:
        header = [next(fh) for _ in range(10)]
    point_data = int(next(h for h in header if h.startswith("POINT_DATA")).split()[1])
    ok = csv_records == expected and point_data == expected
    verdict(f"4 sampling {n}^3 record count", ok, f"CSV {csv_records}, VTK {point_data} (expected {expected})")


# ---------------------------------------------------------------------------
# 5. oracles


def test_5a_bvh_equals_exhaustive(verdict, meshes):
    rng = np.random.default_rng(5)
    m = meshes[2][0]
    pts = rng.uniform(0, 1, size=(10_000, 3))
    a = locate_points(m, build_bvh(m), pts)
    b = locate_exhaustive(m, pts)
    verdict("5a BVH point location equals exhaustive scan (10^4 points)", np.array_equal(a, b),
            f"{int(np.sum(a != b))} mismatches")


def test_5b_adaptive_vs_uniform(verdict, meshes):
    m = meshes[1][0]
    centre = int(locate_exhaustive(m, np.array([[0.5, 0.5, 0.5]]))[0])
    rng = np.random.default_rng(6)
    elems = [centre] + [int(e) for e in rng.choice(m.n_elements, 2, replace=False)]
    r = rule_56()
    worst = 0.0
    for e in elems:
        cells = refine_uniform(m.points[e], 6)
        x = np.einsum("qk,mkd->mqd", r.points, cells).reshape(-1, 3)
        oracle = (signed_volume(cells)[:, None] * r.weights[None]).reshape(-1) @ u1(x)
        worst = max(worst, abs(integrate_adaptive(u1, m.points[e]).value - oracle))
    verdict("5b adaptive u1 integral vs level-6 uniform refinement (grid-1 elements)", worst <= 1e-12,
            f"max abs difference = {worst:.1e} over elements {[e + 1 for e in elems]} (<= 1e-12)")
