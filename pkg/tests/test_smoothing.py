import numpy as np
import pytest

from wfspline.bernstein import basis_size
from wfspline.coefficients import WFSpline
from wfspline.mesh import TetMesh
from wfspline.smoothing import (
    REFERENCE_VECTOR,
    PiecewiseField,
    build_edge_frames,
    edge_frame,
    synchronize,
)

from .conftest import REF_TET, cubic

TWO = TetMesh.from_arrays(
    np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0.2, 0.3, 1.0], [0.3, 0.1, -0.8]]),
    [[0, 1, 2, 3], [0, 2, 1, 4]],
)


def _orthonormal(t, e1, e2):
    F = np.stack([t, e1, e2])
    np.testing.assert_allclose(F @ F.T, np.eye(3), atol=1e-14)
    assert np.linalg.det(F) == pytest.approx(1.0, abs=1e-14)


def test_edge_frame_along_x():
    t, e1, e2 = edge_frame([2.0, 0, 0])
    np.testing.assert_array_equal(t, [1, 0, 0])
    _orthonormal(t, e1, e2)
    np.testing.assert_allclose(e2, np.cross(t, e1), atol=0)


def test_edge_frame_fallback():
    t, e1, e2 = edge_frame(3.0 * REFERENCE_VECTOR)
    _orthonormal(t, e1, e2)
    assert np.all(np.isfinite(e1))


def test_frames_shared_between_elements():
    frames = build_edge_frames(TWO)
    per_elem = frames.element_frames(TWO)  # (ne, 6, 2, 3)
    for e in range(2):
        for j, eid in enumerate(TWO.tet_edges[e]):
            np.testing.assert_array_equal(per_elem[e, j, 0], frames.e1[eid])
            np.testing.assert_array_equal(per_elem[e, j, 1], frames.e2[eid])
            a, b = TWO.edges[eid]
            assert a < b
            d = TWO.vertices[b] - TWO.vertices[a]
            np.testing.assert_allclose(frames.tangent[eid], d / np.linalg.norm(d), atol=1e-15)
            _orthonormal(frames.tangent[eid], frames.e1[eid], frames.e2[eid])


def test_single_element_identity(rng):
    m = TetMesh.from_arrays(REF_TET, [[0, 1, 2, 3]])
    fld = PiecewiseField(m, 2, rng.normal(size=(1, 10)))
    data = synchronize(fld)
    np.testing.assert_allclose(data.values[0], fld.vertex_values()[0], atol=0)
    for k in range(4):
        lam = np.eye(4)[k][None]
        np.testing.assert_allclose(data.gradients[0, k], fld.gradients_at([0], lam)[0], atol=1e-15)


def test_continuous_field_unchanged():
    f = cubic(np.linspace(-1, 1, 20))
    fld = PiecewiseField.interpolate(TWO, f, 3)
    data = synchronize(fld)
    np.testing.assert_allclose(data.values.ravel(), f(TWO.points.reshape(-1, 3)), atol=1e-13)
    np.testing.assert_allclose(data.gradients.reshape(-1, 3), f.grad(TWO.points.reshape(-1, 3)), atol=1e-12)


def test_jump_average_half():
    fld = PiecewiseField(TWO, 1, np.array([[0.0] * 4, [1.0] * 4]))
    _, vval, vgrad, _ = synchronize(fld, return_global=True)
    # vertices 0, 1, 2 are shared by both elements
    np.testing.assert_array_equal(vval, [0.5, 0.5, 0.5, 0.0, 1.0])
    np.testing.assert_array_equal(vgrad, 0.0)


def test_global_consistency(grids, rng):
    m = grids[1][0]
    fld = PiecewiseField(m, 2, rng.normal(size=(m.n_elements, basis_size(2))))
    data, vval, vgrad, edge_d = synchronize(fld, return_global=True)
    np.testing.assert_array_equal(data.values, vval[m.tets])
    np.testing.assert_array_equal(data.gradients, vgrad[m.tets])
    np.testing.assert_array_equal(data.edge_derivs, edge_d[m.tet_edges])


def test_idempotent_on_continuous_data(grids):
    m = grids[1][0]
    f = cubic(np.linspace(0.5, -0.5, 20))
    data = synchronize(PiecewiseField.interpolate(m, f, 3))
    s = WFSpline.from_hermite(m, data)
    again = synchronize(PiecewiseField.interpolate(m, s, 3))
    np.testing.assert_allclose(again.values, data.values, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_exactness_chain(grids, rng, k):
    m = grids[1][1]
    C = np.zeros(20)
    C[: basis_size(k)] = rng.normal(size=basis_size(k))
    exps = [(a, b, c) for a in range(4) for b in range(4 - a) for c in range(4 - a - b)]
    C[[i for i, e in enumerate(exps) if sum(e) > k]] = 0.0
    f = cubic(C)
    s = WFSpline.from_hermite(m, synchronize(PiecewiseField.interpolate(m, f, k)))
    pts = rng.uniform(0, 1, size=(2000, 3))
    np.testing.assert_allclose(s(pts), f(pts), atol=1e-10 * max(1.0, np.abs(f(pts)).max()))


def test_degree_four_rejected():
    fld = PiecewiseField(TWO, 4, np.zeros((2, basis_size(4))))
    with pytest.raises(ValueError, match="bubble"):
        synchronize(fld)


def test_piecewise_field_basics(grids):
    m = grids[1][0]
    c = PiecewiseField.constant(m, 2.0, degree=2)
    assert c.integral() == pytest.approx(2.0, rel=1e-13)
    assert c.l2_norm_sq() == pytest.approx(4.0, rel=1e-13)
    with pytest.raises(ValueError):
        PiecewiseField(m, 1, np.zeros((3, 4)))
