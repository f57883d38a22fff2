import argparse
import re
import subprocess
import sys

import numpy as np
import pytest

from wfspline import cli
from wfspline.cli import EXIT_ERROR, EXIT_OK, EXIT_VALIDATION, build_parser, main, parse_grids
from wfspline.mshio import load_mesh
from wfspline.study import StudyReport, sample_points
from wfspline.transfer import THREADS_ENV


@pytest.fixture(scope="module")
def mesh_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("meshes")
    assert main(["gen-meshes", "--out", str(d), "--grids", "1..2"]) == EXIT_OK
    return d


def test_parse_grids():
    assert parse_grids("1..3") == [1, 2, 3]
    assert parse_grids("2") == [2]
    assert parse_grids("1,3") == [1, 3]
    for bad in ("3..1", "a..b", "", "1..x"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_grids(bad)


def test_gen_meshes(mesh_dir, capsys):
    names = sorted(p.name for p in mesh_dir.iterdir())
    assert names == ["source_1.msh", "source_2.msh", "target_1.msh", "target_2.msh"]
    s1, s2 = load_mesh(mesh_dir / "source_1.msh"), load_mesh(mesh_dir / "source_2.msh")
    assert (s1.n_elements, s2.n_elements) == (192, 1536)
    assert s2.h == pytest.approx(s1.h / 2, rel=1e-12)


def test_gen_meshes_is_deterministic(mesh_dir, tmp_path):
    assert main(["gen-meshes", "--out", str(tmp_path), "--grids", "1"]) == EXIT_OK
    assert (tmp_path / "source_1.msh").read_bytes() == (mesh_dir / "source_1.msh").read_bytes()
    assert main(["gen-meshes", "--out", str(tmp_path), "--grids", "1", "--seed", "5"]) == EXIT_OK
    assert (tmp_path / "source_1.msh").read_bytes() != (mesh_dir / "source_1.msh").read_bytes()


def test_split_inspect(mesh_dir, capsys):
    assert main(["split-inspect", "--meshes", str(mesh_dir), "--elem", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("element 3:")
    assert len(re.findall(r"^  subtet +\d+: volume", out, re.M)) == 12 and out.count("split point ") == 4
    last = out.strip().splitlines()[-1].split()
    assert float(last[4]) == pytest.approx(float(last[7]), rel=1e-13)


def test_split_inspect_from_msh_file(mesh_dir, capsys):
    assert main(["split-inspect", "--mesh", str(mesh_dir / "target_1.msh")]) == EXIT_OK
    assert "element 1:" in capsys.readouterr().out


def test_element_out_of_range(mesh_dir, capsys):
    assert main(["split-inspect", "--meshes", str(mesh_dir), "--elem", "193"]) == EXIT_ERROR
    assert "out of range" in capsys.readouterr().err


def test_missing_meshes_is_an_error(tmp_path, capsys):
    assert main(["conserve", "--meshes", str(tmp_path / "nowhere"), "--method", "linear"]) == EXIT_ERROR
    assert capsys.readouterr().err.startswith("error: missing mesh file")


def test_coeffs(mesh_dir, tmp_path, capsys):
    assert main(["coeffs", "--meshes", str(mesh_dir), "--out", str(tmp_path), "--elem", "2", "--k", "3"]) == EXIT_OK
    lines = (tmp_path / "coeffs_u1_elem2.csv").read_text().splitlines()
    assert lines[0] == "index,x,y,z,value" and len(lines) == 92
    idx = [int(line.split(",")[0]) for line in lines[1:]]
    assert idx == list(range(1, 92))
    mantissa = lines[1].split(",")[4].split("e")[0].lstrip("-").replace(".", "")
    assert len(mantissa) == 15


@pytest.mark.parametrize("vtk", ["structured_points", "rectilinear"])
def test_sample_analytic(tmp_path, capsys, vtk):
    assert main(["sample", "--n", "5", "--out", str(tmp_path), "--vtk", vtk]) == EXIT_OK
    assert capsys.readouterr().out.startswith("125 samples")
    csv = (tmp_path / "u1_analytic_n5.csv").read_text().splitlines()
    assert len(csv) == 126
    vtk_text = (tmp_path / "u1_analytic_n5.vtk").read_text()
    assert "POINT_DATA 125" in vtk_text and ("RECTILINEAR_GRID" in vtk_text) == (vtk == "rectilinear")


def test_sample_transferred(mesh_dir, tmp_path):
    argv = ["sample", "--n", "6", "--meshes", str(mesh_dir), "--out", str(tmp_path), "--source", "transferred",
            "--field", "u2", "--k", "2"]
    assert main(argv) == EXIT_OK
    data = np.loadtxt(tmp_path / "u2_transferred_grid1_k2_n6.csv", delimiter=",", skiprows=1)
    assert data.shape == (216, 5)
    np.testing.assert_allclose(data[:, :3], sample_points(6)[0], rtol=1e-14)
    assert np.all(np.isfinite(data)) and np.all(data[:, 4] >= 0)


def test_conserve_linear(mesh_dir, tmp_path, capsys):
    argv = ["conserve", "--meshes", str(mesh_dir), "--out", str(tmp_path), "--method", "linear"]
    assert main(argv) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("source mass ")
    rows = (tmp_path / "conservation_u1_grid1_k1.csv").read_text().splitlines()
    assert rows[0] == "step,linear_fixed"
    assert [r.split(",")[0] for r in rows[1:]] == ["Sync", "Spline-Rep", "L2-proj", "Total"]


def test_convergence_linear_writes_table(mesh_dir, tmp_path):
    argv = ["convergence", "--meshes", str(mesh_dir), "--out", str(tmp_path), "--grids", "1..2", "--method", "linear"]
    assert main(argv) == EXIT_OK
    lines = (tmp_path / "convergence_u1_linear_k1.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("level,n_source,n_target,h,err_l2")


def _fake_convergence(order):
    def run(u, levels, k, method, **kw):
        rep = StudyReport("convergence", ["level", "n_source", "n_target", "h", "err_l2", "order_l2",
                                          "err_grad", "order_grad"])
        for i, level in enumerate(levels):
            h = 0.2 / 2**i
            rep.rows.append([level, 1, 1, h, h**order, None, h ** (order - 1), None])
        return rep
    return run


@pytest.mark.parametrize("order, code", [(2.0, EXIT_OK), (1.0, EXIT_VALIDATION)])
def test_convergence_exit_code_from_order_bands(monkeypatch, tmp_path, capsys, order, code):
    monkeypatch.setattr(cli, "run_convergence", _fake_convergence(order))
    assert main(["convergence", "--out", str(tmp_path), "--grids", "1..3"]) == code
    err = capsys.readouterr().err
    assert ("ORDER CHECK FAILED" in err) == (code == EXIT_VALIDATION)


def test_threads_flag_overrides_environment(monkeypatch):
    ap = build_parser()
    monkeypatch.setenv(THREADS_ENV, "4")
    assert cli._threads(ap.parse_args(["conserve"])) == 4
    assert cli._threads(ap.parse_args(["conserve", "--threads", "2"])) == 2
    monkeypatch.setenv(THREADS_ENV, "lots")
    assert cli._threads(ap.parse_args(["conserve"])) == 1
    assert cli._config(ap.parse_args(["conserve", "--threads", "3", "--k", "2"])).n_threads == 3


def test_parser_rejects_bad_choices():
    ap = build_parser()
    for argv in (["convergence", "--k", "3"], ["convergence", "--method", "nearest"], ["sample", "--vtk", "xml"],
                 ["convergence", "--grids", "2..1"], []):
        with pytest.raises(SystemExit) as exc:
            ap.parse_args(argv)
        assert exc.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "wfspline", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("wfspline ")
