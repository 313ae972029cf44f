import math

import numpy as np
import pytest

from ptcrystal.cli import run
from ptcrystal.io import read_csv

FAST_PACKET = ["--set", "packet.length=512", "--set", "packet.points=2048", "--set", "packet.w=40",
               "--set", "packet.dt=0.004", "--t-end", "4"]


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bands(tmp_path, capsys):
    code, out, _ = _run(capsys, "--out-dir", str(tmp_path), "bands", "--lambda", "0.5",
                        "--n-q", "5", "--n-trunc", "8")
    assert code == 0 and out.startswith("bands:")
    header, rows = read_csv(tmp_path / "bands.csv")
    assert header == ["q", "band_index", "re_E", "im_E", "kappa"]
    assert len(rows) == 5 * 17
    assert float(rows[0][0]) == pytest.approx(-math.pi)


def test_flags_after_subcommand(tmp_path, capsys):
    code, _, _ = _run(capsys, "bands", "--out-dir", str(tmp_path), "--n-q", "3", "--n-trunc", "4")
    assert code == 0 and (tmp_path / "bands.csv").exists()


def test_show_config(capsys):
    code, out, _ = _run(capsys, "--show-config", "--set", "packet.w=150")
    assert code == 0
    assert "packet.w = 150.0" in out
    assert "bloch.n_trunc = 24" in out


def test_unknown_key(capsys):
    code, _, err = _run(capsys, "--set", "packet.width=3", "bands")
    assert code == 2 and err.startswith("error [config]")


def test_bad_value(tmp_path, capsys):
    code, _, err = _run(capsys, "--out-dir", str(tmp_path), "packet", "--w", "-5")
    assert code == 2 and "error" in err


def test_missing_command(capsys):
    code, _, _ = _run(capsys)
    assert code == 2


def test_lambda_scan_without_transition(tmp_path, capsys):
    code, _, err = _run(capsys, "--out-dir", str(tmp_path), "lambda-scan", "--lo", "0.1",
                        "--hi", "0.5", "--n-trunc", "8")
    assert code == 3 and err.startswith("error [singularity]")


def test_lambda_scan(tmp_path, capsys):
    code, out, _ = _run(capsys, "--out-dir", str(tmp_path), "lambda-scan", "--n-trunc", "8",
                        "--tol", "0.01")
    assert code == 0
    lam_c = float(out.split("lambda_c = ")[1].split()[0])
    assert abs(lam_c - 1.0) < 0.02
    _, rows = read_csv(tmp_path / "lambda_scan.csv")
    assert len(rows) == 11


def test_singularities(tmp_path, capsys):
    code, out, _ = _run(capsys, "--out-dir", str(tmp_path), "singularities", "--n-trunc", "12")
    assert code == 0
    header, rows = read_csv(tmp_path / "defects.csv")
    assert header[0] == "lambda" and rows
    energies = sorted({round(float(r[2]) / math.pi**2, 6) for r in rows if r[5] == "defective"})
    assert energies[:4] == [1.0, 4.0, 9.0, 16.0]


def test_resolvent_probe(tmp_path, capsys):
    code, out, _ = _run(capsys, "--out-dir", str(tmp_path), "resolvent-probe",
                        "--eta", "0.01", "--eta", "0.0025")
    assert code == 0
    _, rows = read_csv(tmp_path / "resolvent.csv")
    g = [float(r[3]) for r in rows]
    assert g[1] / g[0] == pytest.approx(4.0, rel=0.01)


def test_resolvent_bad_eta(tmp_path, capsys):
    code, _, _ = _run(capsys, "--out-dir", str(tmp_path), "resolvent-probe", "--eta", "0")
    assert code == 2


def test_evolve_orders(tmp_path, capsys):
    code, out, _ = _run(capsys, "--out-dir", str(tmp_path), "evolve-orders", "--t-end", "10",
                        "--n-records", "64")
    assert code == 0 and "secular=yes" in out
    with open(tmp_path / "trace.csv") as fh:
        assert fh.readline().startswith("# k=")


def test_packet(tmp_path, capsys):
    code, out, _ = _run(capsys, "--out-dir", str(tmp_path), "packet", *FAST_PACKET)
    assert code == 0 and out.startswith("packet:")
    _, field = read_csv(tmp_path / "field.csv")
    assert len(field) == 2048
    _, peaks = read_csv(tmp_path / "peaks.csv")
    assert float(peaks[0][1]) == pytest.approx(1.0)


def test_packet_numerical_failure(tmp_path, capsys):
    code, _, err = _run(capsys, "--out-dir", str(tmp_path), "packet", "--set", "packet.length=128",
                        "--set", "packet.points=1024", "--set", "packet.w=16",
                        "--set", "packet.dt=0.004", "--t-end", "60", "--lambda", "0")
    assert code == 3 and err.startswith("error [packet]")


def test_reruns_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert _run(capsys, "--out-dir", str(tmp_path / name), "packet", *FAST_PACKET)[0] == 0
        assert _run(capsys, "--out-dir", str(tmp_path / name), "bands", "--n-q", "7",
                    "--n-trunc", "6", "--threads", "2")[0] == 0
    for f in ("peaks.csv", "orders.csv", "field.csv", "bands.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bloch.n_q = 3\nbloch.n_trunc = 4\n")
    code, _, _ = _run(capsys, "--config", str(cfg), "--out-dir", str(tmp_path), "bands")
    assert code == 0
    _, rows = read_csv(tmp_path / "bands.csv")
    assert len(rows) == 3 * 9


def test_figure_fig1b(tmp_path, capsys):
    code, out, _ = _run(capsys, "--out-dir", str(tmp_path), "--set", "bloch.n_q=9",
                        "--set", "bloch.n_trunc=12", "figure", "fig1b")
    assert code == 0 and out.startswith("fig1b:")
    assert (tmp_path / "fig1b_plot.py").exists()
    _, marks = read_csv(tmp_path / "singular_points.csv")
    e = sorted(float(r[1]) / math.pi**2 for r in marks)
    np.testing.assert_allclose(e[:3], [1.0, 4.0, 9.0], rtol=1e-9)


@pytest.mark.parametrize("fig", ["fig4", "fig5"])
def test_figure_threshold_maps(tmp_path, capsys, fig):
    code, out, _ = _run(capsys, "--out-dir", str(tmp_path), *FAST_PACKET[:-2],
                        "--set", "packet.t_end=3", "figure", fig)
    assert code == 0 and out.startswith(fig)
    header, rows = read_csv(tmp_path / f"{fig}_map.csv")
    assert header == ["t", "x", "abs_psi"]
    compile((tmp_path / f"{fig}_plot.py").read_text(), "plot", "exec")
