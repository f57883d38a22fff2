import numpy as np
import pytest

from wfspline.meshgen import generate_sequence, kuhn_box, refine_uniform, source_mesh, target_mesh
from wfspline.mesh import TetMesh
from wfspline.mshio import load_mesh


def test_kuhn_box_partitions_cube():
    V, T = kuhn_box(2, 3, 1)
    m = TetMesh.from_arrays(V, T, repair=False)
    assert m.volumes.min() > 0
    assert m.volumes.sum() == pytest.approx(1.0, abs=1e-14)
    assert m.boundary_faces.sum() == 2 * 2 * (2 * 3 + 2 * 1 + 3 * 1)


def test_refine_uniform_counts():
    m = TetMesh.from_arrays(*kuhn_box(1, 1, 1))
    r = refine_uniform(m)
    assert r.n_elements == 48
    assert r.n_vertices == 27
    assert r.boundary_faces.sum() == 4 * m.boundary_faces.sum()
    assert r.volumes.sum() == pytest.approx(1.0, abs=1e-14)
    assert r.volumes.min() > 0
    assert r.h == pytest.approx(m.h / 2, rel=1e-14)


def test_level_counts_and_h(grids):
    s1, t1 = grids[1]
    s2, t2 = grids[2]
    assert s1.n_elements == t1.n_elements == 192
    assert s2.n_elements == t2.n_elements == 1536
    assert s2.h == pytest.approx(s1.h / 2, rel=1e-12)
    assert s2.h == pytest.approx(0.08667, abs=1e-5)
    for m in (s1, t1, s2, t2):
        assert m.volumes.sum() == pytest.approx(1.0, abs=1e-13)
        assert m.volumes.min() > 0
        lo, hi = m.bounding_box
        np.testing.assert_allclose(lo, 0, atol=1e-15)
        np.testing.assert_allclose(hi, 1, atol=1e-15)


def test_source_and_target_differ(grids):
    for L in (1, 2):
        s, t = grids[L]
        assert s.n_vertices != t.n_vertices or not np.array_equal(s.tets, t.tets)


def test_perturbation_is_deterministic():
    a, b = source_mesh(1, seed=5), source_mesh(1, seed=5)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    assert not np.array_equal(a.vertices, source_mesh(1, seed=6).vertices)
    assert not np.array_equal(target_mesh(1, seed=1).vertices, target_mesh(1, seed=2).vertices)


def test_generate_sequence(tmp_path):
    out = generate_sequence(tmp_path, [1], seed=0)
    (level, ps, pt), = out
    assert level == 1 and ps.exists() and pt.exists()
    np.testing.assert_allclose(load_mesh(ps).vertices, source_mesh(1, seed=0).vertices, rtol=0, atol=0)
