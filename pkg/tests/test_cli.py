import subprocess
import sys

import numpy as np
import pytest

from conftest import sphere_surface_points, unit_sphere_cloud
from kernelsurf.cli import main
from kernelsurf.core import make_rng
from kernelsurf.extraction import TriangleMesh
from kernelsurf.io import load_mesh, save_cloud, save_mesh
from kernelsurf.metrics import chamfer, sample_mesh
from kernelsurf.solver import Count, Radius


@pytest.fixture(scope="module")
def sphere_xyz(tmp_path_factory):
    path = tmp_path_factory.mktemp("cloud") / "sphere.xyz"
    save_cloud(unit_sphere_cloud(500, seed=0), path)
    return path


@pytest.fixture(scope="module")
def reconstructed(sphere_xyz, tmp_path_factory):
    out = tmp_path_factory.mktemp("mesh") / "sphere.obj"
    code = main(["reconstruct", "--input", str(sphere_xyz), "--output", str(out), "--grid-res", "64"])
    return code, out


def test_reconstruct_sphere(reconstructed, capsys):
    code, out = reconstructed
    assert code == 0
    mesh = load_mesh(out)
    assert mesh.is_closed()
    d = chamfer(sample_mesh(mesh, 100_000, make_rng(1)), sphere_surface_points(100_000))
    assert d <= 0.02


def test_reconstruct_prints_report(sphere_xyz, tmp_path, capsys):
    assert main(["reconstruct", "--input", str(sphere_xyz), "--output", str(tmp_path / "m.obj"),
                 "--grid-res", "16", "--nystrom", "100", "--lambda", "1e-6"]) == 0
    out = capsys.readouterr().out
    for key in ("samples", "centers", "lambda", "value_residual", "normal_residual", "rkhs_norm", "wall_time_s"):
        assert key in out
    assert "centers         100" in out


def test_reconstruct_is_deterministic(reconstructed, sphere_xyz, tmp_path):
    _, first = reconstructed
    second = tmp_path / "again.obj"
    assert main(["reconstruct", "--input", str(sphere_xyz), "--output", str(second), "--grid-res", "64"]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_thread_cap_does_not_change_output(sphere_xyz, tmp_path, monkeypatch):
    args = ["reconstruct", "--input", str(sphere_xyz), "--grid-res", "24", "--nystrom", "count:200"]
    assert main(args + ["--output", str(tmp_path / "a.obj")]) == 0
    monkeypatch.setenv("NS_THREADS", "1")
    assert main(args + ["--output", str(tmp_path / "b.obj")]) == 0
    assert (tmp_path / "a.obj").read_bytes() == (tmp_path / "b.obj").read_bytes()
    monkeypatch.setenv("NS_THREADS", "zero")
    assert main(args + ["--output", str(tmp_path / "c.obj")]) == 1


def test_missing_input(tmp_path, capsys):
    code = main(["reconstruct", "--input", str(tmp_path / "nope.xyz"), "--output", str(tmp_path / "o.obj")])
    assert code == 1
    assert "nope.xyz" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [["--grid-res", "8"], ["--grid-res", "1024"], ["--lambda", "-1"],
                                   ["--kernel", "laplace"], ["--nystrom", "radius:-2"], ["--support-k", "0"]])
def test_usage_errors(sphere_xyz, tmp_path, extra):
    assert main(["reconstruct", "--input", str(sphere_xyz), "--output", str(tmp_path / "o.obj")] + extra) == 1


def test_malformed_cloud_is_a_usage_error(tmp_path):
    bad = tmp_path / "bad.xyz"
    bad.write_text("0 0 0 0 0 1\n1 2 3\n")
    assert main(["reconstruct", "--input", str(bad), "--output", str(tmp_path / "o.obj")]) == 1


def test_kernel_domain_error_is_numerical(tmp_path):
    path = tmp_path / "big.xyz"
    save_cloud(unit_sphere_cloud(50, radius=3.0), path)
    code = main(["reconstruct", "--input", str(path), "--output", str(tmp_path / "o.obj"), "--kernel", "uniform",
                 "--no-normalize", "--grid-res", "16"])
    assert code == 2


def test_other_kernels_run(sphere_xyz, tmp_path):
    for kernel in ("uniform", "poisson-radial"):
        out = tmp_path / f"{kernel}.obj"
        assert main(["reconstruct", "--input", str(sphere_xyz), "--output", str(out), "--kernel", kernel,
                     "--grid-res", "16", "--nystrom", "60"]) == 0
        assert not load_mesh(out).is_empty


def test_nystrom_arg_parsing():
    from kernelsurf.cli import _nystrom_arg
    assert _nystrom_arg("250") == Count(250)
    assert _nystrom_arg("count:12") == Count(12)
    assert _nystrom_arg("radius:0.05") == Radius(0.05)
    assert _nystrom_arg("all") is None


def _square(z):
    v = np.array([[0, 0, z], [1, 0, z], [1, 1, z], [0, 1, z]], dtype=float)
    return TriangleMesh(v, [[0, 1, 2], [0, 2, 3]])


def _metric_rows(text):
    rows = {}
    for line in text.strip().splitlines()[1:]:
        name, *vals = line.split()
        rows[name] = [float(v) for v in vals]
    return rows


def test_metrics_identical(tmp_path, capsys):
    save_mesh(_square(0), tmp_path / "a.obj")
    assert main(["metrics", str(tmp_path / "a.obj"), str(tmp_path / "a.obj"), "--samples", "2000"]) == 0
    rows = _metric_rows(capsys.readouterr().out)
    assert rows["chamfer"] == [0, 0, 0] and rows["hausdorff"] == [0, 0, 0]


def test_metrics_translated_copy(tmp_path, capsys):
    save_mesh(_square(0), tmp_path / "a.obj")
    save_mesh(_square(0.1), tmp_path / "b.obj")
    assert main(["metrics", str(tmp_path / "a.obj"), str(tmp_path / "b.obj"), "--no-normalize"]) == 0
    rows = _metric_rows(capsys.readouterr().out)
    assert all(abs(v - 0.1) <= 0.002 for v in rows["chamfer"])


def test_metrics_normalizes_by_first_mesh(tmp_path, capsys):
    big = TriangleMesh(_square(0).vertices * 10, _square(0).triangles)
    moved = TriangleMesh(_square(1.0).vertices * [10, 10, 1], _square(0).triangles)
    save_mesh(big, tmp_path / "a.obj")
    save_mesh(moved, tmp_path / "b.obj")
    assert main(["metrics", str(tmp_path / "a.obj"), str(tmp_path / "b.obj")]) == 0
    rows = _metric_rows(capsys.readouterr().out)
    assert rows["chamfer"][2] == pytest.approx(0.1, rel=0.02)


def test_metrics_missing_file(tmp_path):
    save_mesh(_square(0), tmp_path / "a.obj")
    assert main(["metrics", str(tmp_path / "a.obj"), str(tmp_path / "missing.obj")]) == 1


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert len(lines) >= 10
    assert all(ln.startswith("PASS") for ln in lines)
    assert len({ln.split()[1] for ln in lines}) == len(lines)


def test_selftest_detects_injected_fault(capsys):
    assert main(["selftest", "--inject-fault"]) != 0
    assert "FAIL" in capsys.readouterr().out


def test_hidden_flag_and_module_entry():
    run = subprocess.run([sys.executable, "-m", "kernelsurf", "selftest", "--help"], capture_output=True, text=True)
    assert run.returncode == 0 and "inject" not in run.stdout
    run = subprocess.run([sys.executable, "-m", "kernelsurf", "frobnicate"], capture_output=True, text=True)
    assert run.returncode == 1
