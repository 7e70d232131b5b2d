"""End-to-end tests of the command-line front end, run in-process."""

import csv
import json
import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from horizonlab import _util, service
from horizonlab.cli import main

MINKOWSKI_TOML = """
[metric]
kind = "custom"
n = 2

[components]
g00 = "1"
g01 = "0"
g02 = "0"
g11 = "-1"
g12 = "0"
g22 = "-1"
"""

MIXED_TOML = """
[metric]
kind = "custom"
n = 2

[components]
g00 = "1"
g01 = "(A*x1 - (B*x1/sqrt(x1^2+x2^2))*x2)/(x1^2+x2^2)"
g02 = "(A*x2 + (B*x1/sqrt(x1^2+x2^2))*x1)/(x1^2+x2^2)"
g11 = "-1 + ((A*x1 - (B*x1/sqrt(x1^2+x2^2))*x2)/(x1^2+x2^2))^2"
g12 = "((A*x1 - (B*x1/sqrt(x1^2+x2^2))*x2)/(x1^2+x2^2)) * ((A*x2 + (B*x1/sqrt(x1^2+x2^2))*x1)/(x1^2+x2^2))"
g22 = "-1 + ((A*x2 + (B*x1/sqrt(x1^2+x2^2))*x1)/(x1^2+x2^2))^2"

[params]
A = -1.0
B = 0.01
"""


@pytest.fixture()
def flat_config(tmp_path):
    p = tmp_path / "minkowski.toml"
    p.write_text(MINKOWSKI_TOML, encoding="utf-8")
    return str(p)


@pytest.fixture()
def mixed_config(tmp_path):
    p = tmp_path / "mixed.toml"
    p.write_text(MIXED_TOML, encoding="utf-8")
    return str(p)


def read_csv(path):
    text = path.read_bytes().decode("utf-8")
    rows = list(csv.reader(text.splitlines()))
    return rows[0], rows[1:]


class TestErgosphereCommand:
    def test_acoustic_files_and_exit(self, tmp_path, capsys):
        rc = main(["ergosphere", "--builtin", "acoustic",
                   "--A", "-1", "--B", "1", "--out", str(tmp_path), "--svg"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "non_characteristic" in out
        header, rows = read_csv(tmp_path / "ergosphere.csv")
        assert header == ["theta", "x1", "x2", "normalized_char_form"]
        assert len(rows) == 257
        assert rows[0][1:3] == rows[-1][1:3] != rows[1][1:3]
        summary = json.loads((tmp_path / "summary.json").read_text("utf-8"))
        assert summary["classification"] == "non_characteristic"
        assert summary["orientation"] == "black_hole"
        assert abs(summary["mean_radius"] - math.sqrt(2.0)) < 1e-5
        assert abs(summary["max_normalized_form"] - 0.5) < 1e-9
        assert (tmp_path / "ergosphere.svg").exists()

    def test_csv_is_crlf_terminated(self, tmp_path):
        assert main(["ergosphere", "--builtin", "acoustic", "--A", "-1",
                     "--B", "1", "--rays", "32", "--out", str(tmp_path)]) == 0
        raw = (tmp_path / "ergosphere.csv").read_bytes()
        assert raw.endswith(b"\r\n")
        assert raw.count(b"\n") == raw.count(b"\r\n") == 34  # header + 33 rows

    def test_param_flag_overrides(self, tmp_path):
        rc = main(["ergosphere", "--builtin", "acoustic",
                   "-p", "A=-2", "-p", "B=1", "--rays", "64",
                   "--out", str(tmp_path)])
        assert rc == 0
        summary = json.loads((tmp_path / "summary.json").read_text("utf-8"))
        assert abs(summary["mean_radius"] - math.sqrt(5.0)) < 1e-5

    def test_missing_parameter_exits_1(self, tmp_path, capsys):
        rc = main(["ergosphere", "--builtin", "acoustic", "--A", "-1",
                   "--out", str(tmp_path)])
        assert rc == 1
        assert "missing parameter" in capsys.readouterr().err

    def test_requires_exactly_one_metric_source(self, tmp_path, flat_config):
        assert main(["ergosphere", "--out", str(tmp_path)]) == 1
        assert main(["ergosphere", "--builtin", "acoustic",
                     "--config", flat_config, "--out", str(tmp_path)]) == 1

    def test_config_refuses_inline_params(self, tmp_path, flat_config, capsys):
        rc = main(["ergosphere", "--config", flat_config, "--A", "-1",
                   "--out", str(tmp_path)])
        assert rc == 1
        assert "config file" in capsys.readouterr().err

    def test_bad_seed_format_exits_1(self, tmp_path, capsys):
        rc = main(["ergosphere", "--builtin", "acoustic", "--A", "-1",
                   "--B", "1", "--seed", "0.1:0.0", "--out", str(tmp_path)])
        assert rc == 1
        assert "--seed" in capsys.readouterr().err

    def test_bad_param_syntax_exits_1(self, tmp_path):
        assert main(["ergosphere", "--builtin", "acoustic", "-p", "A",
                     "--out", str(tmp_path)]) == 1
        assert main(["ergosphere", "--builtin", "acoustic", "-p", "A=x",
                     "--out", str(tmp_path)]) == 1


class TestClassifyCommand:
    def test_mixed_boundary_exits_2(self, tmp_path, mixed_config, capsys):
        rc = main(["classify", "--config", mixed_config,
                   "--out", str(tmp_path)])
        assert rc == 2
        assert "classification: mixed" in capsys.readouterr().out
        body = json.loads(
            (tmp_path / "classification.json").read_text("utf-8"))
        assert body["classification"] == "mixed"
        assert abs(body["max_normalized_form"] - 1e-4) < 1e-6

    def test_uniform_boundary_exits_0(self, tmp_path):
        rc = main(["classify", "--builtin", "schwarzschild", "--m", "1",
                   "--out", str(tmp_path)])
        assert rc == 0
        body = json.loads(
            (tmp_path / "classification.json").read_text("utf-8"))
        assert body["classification"] == "characteristic"
        assert body["orientation"] == "black_hole"


class TestGeodesicCommand:
    def test_flat_space_straight_line(self, tmp_path, flat_config):
        rc = main(["geodesic", "--config", flat_config,
                   "--x0", "0.3,0.2", "--xi", "0.6,-0.8",
                   "--t-max", "5", "--out", str(tmp_path), "--svg"])
        assert rc == 0
        header, rows = read_csv(tmp_path / "geodesic.csv")
        assert header == ["t", "x1", "x2", "xi1", "xi2", "xi0"]
        pts = np.array([[float(r[1]), float(r[2])] for r in rows])
        d = pts[-1] - pts[0]
        d /= np.hypot(*d)
        rel = pts - pts[0]
        perp = np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0])
        assert perp.max() < 1e-9
        report = json.loads((tmp_path / "report.json").read_text("utf-8"))
        assert report["termination"] == "max_time"
        assert report["max_H_drift"] < 1e-12
        assert (tmp_path / "geodesic.svg").exists()

    def test_dimension_mismatch_exits_1(self, tmp_path, flat_config, capsys):
        rc = main(["geodesic", "--config", flat_config,
                   "--x0", "0.3,0.2,0.1", "--xi", "0.6,-0.8,0.0",
                   "--out", str(tmp_path)])
        assert rc == 1
        assert "spatial dimensions" in capsys.readouterr().err

    def test_non_numeric_vector_exits_1(self, tmp_path, flat_config):
        assert main(["geodesic", "--config", flat_config,
                     "--x0", "a,b", "--xi", "0.6,-0.8",
                     "--out", str(tmp_path)]) == 1


class TestHorizonCommand:
    def test_limit_cycle(self, tmp_path, capsys):
        rc = main(["horizon", "--builtin", "acoustic", "--A", "-1",
                   "--B", "1", "--bracket", "0.7:1.3",
                   "--out", str(tmp_path), "--svg"])
        assert rc == 0
        assert "rho* = " in capsys.readouterr().out
        report = json.loads((tmp_path / "report.json").read_text("utf-8"))
        assert report["status"] == "ok"
        assert abs(report["rho_star"] - 1.0) < 1e-5
        assert report["residual"] < 1e-6
        header, rows = read_csv(tmp_path / "horizon.csv")
        assert header == ["theta", "rho", "x1", "x2"]
        assert len(rows) == 257
        radii = np.array([float(r[1]) for r in rows])
        assert np.max(np.abs(radii - 1.0)) < 1e-3
        assert (tmp_path / "horizon.svg").exists()

    def test_characteristic_boundary_exits_2(self, tmp_path, capsys):
        rc = main(["horizon", "--builtin", "acoustic", "--A", "-1",
                   "--B", "0", "--out", str(tmp_path)])
        assert rc == 2
        assert ("Schwarzschild-type: horizon = ergosphere"
                in capsys.readouterr().out)
        assert not (tmp_path / "horizon.csv").exists()
        report = json.loads((tmp_path / "report.json").read_text("utf-8"))
        assert report["status"] == "characteristic_boundary"
        assert report["rho_star"] is None

    def test_missing_bracket_exits_1(self, tmp_path, capsys):
        rc = main(["horizon", "--builtin", "acoustic", "--A", "-1",
                   "--B", "1", "--out", str(tmp_path)])
        assert rc == 1
        assert "bracket" in capsys.readouterr().err

    def test_bad_bracket_separator_exits_1(self, tmp_path, capsys):
        rc = main(["horizon", "--builtin", "acoustic", "--A", "-1",
                   "--B", "1", "--bracket", "0.7,1.3",
                   "--out", str(tmp_path)])
        assert rc == 1
        assert "--bracket" in capsys.readouterr().err


class TestCharcoordsCommand:
    def test_reduced_grid_run(self, tmp_path, capsys):
        rc = main(["charcoords", "--builtin", "acoustic", "--A", "-1",
                   "--B", "1", "--rays", "128", "--n-rho", "32",
                   "--n-theta", "96", "--field-rho", "48",
                   "--field-theta", "96", "--bracket", "0.7:1.3",
                   "--out", str(tmp_path), "--svg"])
        assert rc == 0
        assert "fold check: pass" in capsys.readouterr().out
        report = json.loads((tmp_path / "report.json").read_text("utf-8"))
        assert report["status"] == "ok"
        assert report["c1"] > 0.0
        assert report["c1_r_squared"] > 0.98
        assert report["fold_check"] == "pass"
        assert report["fold"]["n_fold_cells"] == 0
        assert abs(report["horizon_rho_star"] - 1.0) < 1e-5
        header, rows = read_csv(tmp_path / "charfield.csv")
        assert header == ["rho", "theta", "S_plus", "S_minus", "delta_tilde"]
        assert len(rows) == 48 * 96
        header, rows = read_csv(tmp_path / "halfplane.csv")
        assert header == ["rho", "theta", "y1", "y2"]
        assert len(rows) == 48 * 96
        assert (tmp_path / "halfplane.svg").exists()

    def test_mixed_boundary_exits_2(self, tmp_path, mixed_config):
        rc = main(["charcoords", "--config", mixed_config,
                   "--out", str(tmp_path)])
        assert rc == 2
        report = json.loads((tmp_path / "report.json").read_text("utf-8"))
        assert report["status"] == "mixed_boundary"
        assert not (tmp_path / "charfield.csv").exists()


class TestKerrCommand:
    def test_surfaces(self, tmp_path, capsys):
        rc = main(["kerr", "--m", "1", "--a", "0.5",
                   "--out", str(tmp_path), "--svg"])
        assert rc == 0
        assert "r+ = " in capsys.readouterr().out
        report = json.loads((tmp_path / "report.json").read_text("utf-8"))
        assert abs(report["r_plus"] - (1.0 + math.sqrt(0.75))) < 1e-12
        assert abs(report["r_minus"] - (1.0 - math.sqrt(0.75))) < 1e-12
        for key in ("outer", "inner"):
            assert report[key]["classification"] == "characteristic"
            assert report[key]["ellipse_deviation"] < 1e-4
        header, rows = read_csv(tmp_path / "kerr.csv")
        assert header == ["surface", "angle", "rho", "z"]
        assert len(rows) == 2 * 257
        assert {r[0] for r in rows} == {"outer", "inner"}
        assert (tmp_path / "kerr.svg").exists()

    def test_naked_spin_exits_1(self, tmp_path, capsys):
        rc = main(["kerr", "--a", "1.5", "--out", str(tmp_path)])
        assert rc == 1
        assert "exceeds m" in capsys.readouterr().err


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path, monkeypatch):
        args = ["ergosphere", "--builtin", "acoustic", "--A", "-1",
                "--B", "1", "--rays", "64"]
        d1, d2 = tmp_path / "one", tmp_path / "two"
        assert main(args + ["--out", str(d1)]) == 0
        # second run single-threaded: the ray scan must not reorder results
        monkeypatch.setenv("HORIZON_LAB_THREADS", "1")
        assert main(args + ["--out", str(d2)]) == 0
        for name in ("ergosphere.csv", "summary.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("HORIZON_LAB_THREADS", "3")
        assert _util.worker_count() == 3
        monkeypatch.setenv("HORIZON_LAB_THREADS", "not-a-number")
        assert _util.worker_count() == 1
        monkeypatch.delenv("HORIZON_LAB_THREADS")
        assert 1 <= _util.worker_count() <= 4


class TestServerMode:
    @pytest.fixture()
    def fake_server(self, monkeypatch):
        import httpx

        tc = TestClient(service.app)

        def fake_post(url, json=None, timeout=None):
            assert url.startswith("http://fake")
            return tc.post(url[len("http://fake"):], json=json)

        monkeypatch.setattr(httpx, "post", fake_post)

    def test_round_trip(self, tmp_path, fake_server):
        d1, d2 = tmp_path / "local", tmp_path / "remote"
        base = ["ergosphere", "--builtin", "acoustic", "--A", "-1",
                "--B", "1", "--rays", "64"]
        assert main(base + ["--out", str(d1)]) == 0
        assert main(base + ["--out", str(d2),
                            "--server", "http://fake"]) == 0
        assert ((d1 / "summary.json").read_bytes()
                == (d2 / "summary.json").read_bytes())
        assert ((d1 / "ergosphere.csv").read_bytes()
                == (d2 / "ergosphere.csv").read_bytes())

    def test_server_error_surfaces(self, tmp_path, fake_server, capsys):
        rc = main(["ergosphere", "--builtin", "acoustic", "--A", "-1",
                   "--out", str(tmp_path), "--server", "http://fake"])
        assert rc == 1
        err = capsys.readouterr().err
        assert "server error (400)" in err
        assert "missing parameter" in err


class TestTopLevel:
    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == 0
        assert "ergosphere" in capsys.readouterr().out

    def test_version_exits_0(self, capsys):
        assert main(["--version"]) == 0
        assert "horizon-lab" in capsys.readouterr().out

    def test_unknown_command_exits_1(self):
        assert main(["no-such-command"]) == 1
