import math

import numpy as np
import pytest

from aggdiff import density, diagnostics, io_csv, kernels


def test_density_roundtrip_is_exact(tmp_path):
    rho = density.build_initial(density.Parabola(9 / 8, 9 / 4), (-2.0, 2.0), 0.01)
    path = tmp_path / "rho.csv"
    io_csv.write_density_csv(path, rho)
    back = io_csv.read_density_csv(path)
    # 17 significant digits round-trip doubles exactly
    np.testing.assert_array_equal(back.cell_avg, rho.cell_avg)
    assert back.dx == pytest.approx(rho.dx, rel=1e-12)
    assert back.x_left == pytest.approx(rho.x_left, abs=1e-12)


def test_density_header_and_format(tmp_path):
    rho = density.GridDensity(0.0, 0.5, np.array([1 / 3, 2 / 3]))
    path = tmp_path / "rho.csv"
    io_csv.write_density_csv(path, rho)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,rho"
    assert lines[1].split(",")[1] == "0.33333333333333331"


def test_read_density_rejects_nonuniform(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,rho\n0.0,1.0\n0.1,1.0\n0.3,1.0\n")
    with pytest.raises(ValueError):
        io_csv.read_density_csv(path)


def test_read_density_rejects_single_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,rho\n0.0,1.0\n")
    with pytest.raises(ValueError):
        io_csv.read_density_csv(path)


def test_diagnostics_roundtrip_with_missing_reference(tmp_path):
    rows = [
        diagnostics.DiagnosticsRow(0.0, 1.0, 2.5, 3.0, 0.1, -0.5, 0.2, None),
        diagnostics.DiagnosticsRow(1.0, 1.0, 2.0, 2.5, 0.2, -0.6, 0.1, 1e-3),
    ]
    path = tmp_path / "diag.csv"
    io_csv.write_diagnostics_csv(path, rows)
    back = io_csv.read_diagnostics_csv(path)
    assert back == rows
    header = path.read_text().splitlines()[0]
    assert header == "t,mass,linf,l2sq,m2,energy,dissipation,w2_to_ref"


def test_quantile_csv(tmp_path):
    rho = density.build_initial(density.UniformBox(1.0), (-2.0, 2.0), 0.01)
    qf = density.pseudo_inverse(rho, 4)
    path = tmp_path / "q.csv"
    io_csv.write_quantile_csv(path, qf)
    lines = path.read_text().splitlines()
    assert lines[0] == "z,u"
    assert len(lines) == 6  # header + M+1 nodes


def test_trajectory_csv(tmp_path):
    path = tmp_path / "traj.csv"
    io_csv.write_trajectory_csv(
        path,
        [0.0, 0.5],
        [np.array([-1.0, 0.0, 1.0]), np.array([-0.9, 0.0, 0.9])],
    )
    lines = path.read_text().splitlines()
    assert lines[0] == "t,X_1,X_2,X_3"
    assert lines[2].startswith("0.5,")
    assert len(lines) == 3


def test_steady_meta_csv(tmp_path, ):
    g = kernels.gaussian()
    ss = diagnostics.compute_steady_state(g, 2.0, domain=(-2.0, 2.0), dx=0.01)
    path = tmp_path / "meta.csv"
    io_csv.write_steady_meta_csv(path, 2.0, ss)
    lines = path.read_text().splitlines()
    assert lines[0] == "epsilon,C,residual,support_left,support_right"
    assert lines[1].split(",")[0] == "2"


def test_summary_csv_mixes_strings_and_numbers(tmp_path):
    path = tmp_path / "summary.csv"
    io_csv.write_summary_csv(path, {"solver": "fv", "final_linf": 0.25, "note": None})
    lines = path.read_text().splitlines()
    assert lines[0] == "solver,final_linf,note"
    assert lines[1] == "fv,0.25,"


def test_series_csv(tmp_path):
    path = tmp_path / "series.csv"
    io_csv.write_series_csv(path, ["t", "w2"], [(0.0, 0.5), (1.0, 0.25)])
    lines = path.read_text().splitlines()
    assert lines == ["t,w2", "0,0.5", "1,0.25"]


def test_snapshot_filename_format():
    assert io_csv.snapshot_filename(0.1) == "snap_t0.1.csv"
    assert io_csv.snapshot_filename(50.0) == "snap_t50.csv"
    assert io_csv.snapshot_filename(2.5) == "snap_t2.5.csv"
