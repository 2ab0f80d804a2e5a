"""CLI: subcommands, exit codes, manifest headers, output determinism."""

import json

import numpy as np
import pytest

from slhnet.cli import main


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse errors
        return exc.code


@pytest.fixture
def ccd_path(ccd_netlist_path):
    return str(ccd_netlist_path)


class TestCompose:
    def test_golden_ccd_serialization(self, ccd_path, tmp_path):
        out = tmp_path / "triple.txt"
        assert run(["compose", ccd_path, "--out", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("# slhnet")
        assert "ports 5" in text
        assert "L[2] = " in text
        assert "H = " in text

    def test_bad_netlist_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.slh"
        bad.write_text("mode a\ncomp m = mirror(a,\nnetwork = m\n")
        assert run(["compose", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "2:" in err  # line number of the broken statement

    def test_eta_zero_override_kills_coupling(self, ccd_path, tmp_path, capsys):
        out = tmp_path / "t.txt"
        assert run(["compose", ccd_path, "--set", "eta=0", "--set", "phi=0",
                    "--out", str(out)]) == 0
        text = out.read_text()
        h_line = [l for l in text.splitlines() if l.startswith("H = ")][0]
        assert "ad*b" not in h_line  # coupling coefficient vanished

    def test_missing_file_exit_2(self):
        assert run(["compose", "/nonexistent.slh"]) == 2

    def test_eta_zero_coupling_coefficient_value(self, ccd_path, tmp_path):
        # with eta=0 the cross coupling is (kappa/2i)(1 - e^{-i phi});
        # for kappa=2e11, phi=0.5 the real part is 4.79425538604e10
        out = tmp_path / "t.txt"
        assert run(["compose", ccd_path, "--set", "eta=0",
                    "--out", str(out)]) == 0
        h_line = [l for l in out.read_text().splitlines()
                  if l.startswith("H = ")][0]
        assert "a*bd" in h_line
        assert "47942553860" in h_line


class TestSpectrum:
    def test_csv_and_figure_written(self, ccd_path, tmp_path):
        out = tmp_path / "spec.csv"
        assert run(["spectrum", ccd_path, "--grid", "1549:1551.5:101",
                    "--out", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("# slhnet")
        assert "wavelength_nm,power_db" in text
        png = tmp_path / "spec.png"
        assert png.exists()
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_no_plot_flag(self, ccd_path, tmp_path):
        out = tmp_path / "spec.csv"
        assert run(["spectrum", ccd_path, "--grid", "1549:1551.5:21",
                    "--out", str(out), "--no-plot"]) == 0
        assert not (tmp_path / "spec.png").exists()

    def test_byte_identical_reruns(self, ccd_path, tmp_path):
        # identical manifests (same command line) give identical bytes
        out = tmp_path / "spec.csv"
        argv = ["spectrum", ccd_path, "--grid", "1549:1551.5:51",
                "--out", str(out)]
        assert run(argv) == 0
        csv1 = out.read_bytes()
        png1 = (tmp_path / "spec.png").read_bytes()
        assert run(argv) == 0
        assert out.read_bytes() == csv1
        assert (tmp_path / "spec.png").read_bytes() == png1

    def test_zero_drive_clamped_floor(self, ccd_path, tmp_path):
        out = tmp_path / "z.csv"
        assert run(["spectrum", ccd_path, "--set", "alpha=0",
                    "--grid", "1549:1551:11", "--out", str(out),
                    "--no-plot"]) == 0
        rows = [l for l in out.read_text().splitlines()
                if l and not l.startswith("#") and not l.startswith("wavelength")]
        assert all(float(r.split(",")[1]) == -180.0 for r in rows)

    def test_two_dips_with_interior_null_through_port(self, ccd_path, tmp_path):
        # the through port shows two resonance dips, one an interference null
        out = tmp_path / "thru.csv"
        assert run(["spectrum", ccd_path, "--port", "2",
                    "--grid", "1549:1551.5:501", "--out", str(out),
                    "--no-plot"]) == 0
        rows = [l.split(",") for l in out.read_text().splitlines()
                if l and not l.startswith("#") and not l.startswith("wavelength")]
        db = np.array([float(r[1]) for r in rows])
        minima = [i for i in range(1, len(db) - 1)
                  if db[i] < db[i - 1] and db[i] < db[i + 1]]
        assert len(minima) == 2
        assert min(db[minima]) < -20.0  # the deeper dip is a null

    def test_oracle_crosscheck_exit_zero(self, ccd_path, tmp_path):
        out = tmp_path / "o.csv"
        code = run(["spectrum", ccd_path, "--grid", "1549.8:1550.8:11",
                    "--oracle", "--oracle-points", "2",
                    "--out", str(out), "--no-plot"])
        assert code == 0
        header = out.read_text().splitlines()
        assert any("oracle_worst_rel_err" in l for l in header)
        assert any("oracle_power_w" in l for l in header)

    def test_bad_grid_exit_2(self, ccd_path):
        assert run(["spectrum", ccd_path, "--grid", "1551:1549:11"]) == 2


class TestFit:
    def make_data(self, ccd_path, tmp_path):
        data = tmp_path / "data.csv"
        assert run(["spectrum", ccd_path, "--grid", "1549:1551.5:41",
                    "--out", str(data), "--no-plot"]) == 0
        return data

    def test_roundtrip_smoke(self, ccd_path, tmp_path):
        data = self.make_data(ccd_path, tmp_path)
        cfg = {
            "free": {
                "kappa": {"guess": 2.15e11, "min": 5e10, "max": 8e11},
                "phi": {"guess": 0.47, "min": 0.05, "max": 3.0},
            },
            "schedule": {"cooling": 0.7, "steps_per_temp": 16,
                         "t_stop_frac": 1e-4, "restarts": 0,
                         "polish": True, "polish_maxfev": 1500},
        }
        cfg_path = tmp_path / "fit.json"
        cfg_path.write_text(json.dumps(cfg))
        report = tmp_path / "report.txt"
        assert run(["fit", str(data), ccd_path, "--config", str(cfg_path),
                    "--seed", "3", "--out", str(report)]) == 0
        text = report.read_text()
        assert text.startswith("# slhnet")
        assert "kappa=" in text and "objective=" in text
        kappa = float([l for l in text.splitlines()
                       if l.startswith("kappa=")][0].split("=")[1])
        assert abs(kappa - 2e11) / 2e11 < 0.02
        assert (tmp_path / "report_trace.csv").exists()
        assert (tmp_path / "report.png").exists()

    def test_malformed_csv_exit_2(self, ccd_path, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("wavelength_nm,power_db\n1550.0,oops\n")
        cfg_path = tmp_path / "fit.json"
        cfg_path.write_text(json.dumps({
            "free": {"kappa": {"guess": 2e11, "min": 1e10, "max": 1e12}}}))
        assert run(["fit", str(bad), ccd_path, "--config", str(cfg_path)]) == 2
        assert "column 2" in capsys.readouterr().err

    def test_missing_config_key_exit_2(self, ccd_path, tmp_path):
        data = self.make_data(ccd_path, tmp_path)
        cfg_path = tmp_path / "fit.json"
        cfg_path.write_text(json.dumps({"free": {"kappa": {"guess": 1.0}}}))
        assert run(["fit", str(data), ccd_path, "--config", str(cfg_path)]) == 2


class TestCheck:
    def test_published_length_case_significant(self, tmp_path, capsys):
        out = tmp_path / "check.txt"
        assert run(["check", "--gamma-nl", "150", "--power", "1e-6",
                    "--length", "670", "--out", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("# slhnet")
        assert "waveguide_nonlinearity=significant" in text
        lstar = float([l for l in text.splitlines()
                       if l.startswith("length_threshold_m=")][0].split("=")[1])
        assert abs(lstar - 670.0) / 670.0 < 0.01

    def test_q_threshold_within_20_percent(self, tmp_path):
        out = tmp_path / "check.txt"
        assert run(["check", "--out", str(out)]) == 0
        text = out.read_text()
        qstar = float([l for l in text.splitlines()
                       if l.startswith("q_threshold=")][0].split("=")[1])
        assert abs(qstar - 3.5e9) / 3.5e9 < 0.2

    def test_zero_power_negligible(self, tmp_path):
        out = tmp_path / "check.txt"
        assert run(["check", "--power", "0", "--out", str(out)]) == 0
        text = out.read_text()
        assert "waveguide_nonlinearity=negligible" in text
        assert "ring_nonlinearity=negligible" in text

    def test_negative_input_exit_2(self):
        assert run(["check", "--length", "-5"]) == 2


class TestOracle:
    def test_single_wavelength_agreement(self, ccd_path, tmp_path):
        out = tmp_path / "oracle.txt"
        assert run(["oracle", ccd_path, "--at", "1550.3",
                    "--out", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("# slhnet")
        assert "converged=true" in text
        rel = float([l for l in text.splitlines()
                     if l.startswith("rel_err=")][0].split("=")[1])
        assert rel < 1e-4
