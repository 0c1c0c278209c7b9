import json
import math

import numpy as np
import pytest

from occens.cli import main

BOUNDARY_CONFIG = {
    "energies": ["1", "2"],
    "weights": [0.5, 0.5],
    "energy_cap": "7/5",
    "regime": "high_degeneracy",
}


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    data = [ln for ln in lines if not ln.startswith("#")]
    header = data[0].split(",")
    rows = [ln.split(",") for ln in data[1:]]
    return comments, header, rows


class TestSolveCommand:
    def test_boundary_report(self, tmp_path, capsys):
        config = write_config(tmp_path, BOUNDARY_CONFIG)
        assert main(["solve", "--config", config]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["kind"] == "boundary"
        assert report["x_star"] == pytest.approx([0.6, 0.4], abs=1e-10)
        assert report["lam"] == pytest.approx(math.log(1.5), abs=1e-10)

    def test_interior_report(self, tmp_path, capsys):
        config = write_config(tmp_path, {**BOUNDARY_CONFIG, "energy_cap": 2})
        assert main(["solve", "--config", config]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["kind"] == "interior"
        assert report["x_star"] == [0.5, 0.5]

    def test_invalid_config_exit_2(self, tmp_path, capsys):
        config = write_config(tmp_path, {**BOUNDARY_CONFIG, "energy_cap": 0.5})
        assert main(["solve", "--config", config]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "config"
        assert "empty domain" in err["detail"]

    def test_missing_config_exit_2(self, tmp_path, capsys):
        assert main(["solve", "--config", str(tmp_path / "nope.json")]) == 2
        assert json.loads(capsys.readouterr().err)["error"] == "config"

    def test_output_file(self, tmp_path):
        config = write_config(tmp_path, BOUNDARY_CONFIG)
        out = tmp_path / "sol.json"
        assert main(["solve", "--config", config, "--out", str(out)]) == 0
        assert json.loads(out.read_text())["kind"] == "boundary"


class TestLlnSweep:
    def config(self, tmp_path, **extra):
        payload = {
            "energies": ["1", "2"],
            "weights": [0.5, 0.5],
            "energy_cap": "7/5",
            "regime": "proportional",
            "c": 1.0,
            "N_list": [16, 32, 64],
            "xi_list": [[0.0, 0.0], [0.5, 0.0]],
        }
        payload.update(extra)
        return write_config(tmp_path, payload)

    def test_csv_shape_and_schema(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["lln-sweep", "--config", self.config(tmp_path),
                     "--out", str(out)]) == 0
        comments, header, rows = read_csv(out)
        assert out.read_text().startswith("# schema=1\n")
        assert header[:2] == ["N", "mean_abs_err"]
        assert len(rows) == 3
        assert [r[0] for r in rows] == ["16", "32", "64"]

    def test_zero_probe_column_is_zero(self, tmp_path):
        out = tmp_path / "sweep.csv"
        main(["lln-sweep", "--config", self.config(tmp_path), "--out", str(out)])
        _, header, rows = read_csv(out)
        col = header.index("mgf_abs_err_0")
        assert all(float(r[col]) <= 1e-12 for r in rows)

    def test_error_column_positive_decreasing(self, tmp_path):
        out = tmp_path / "sweep.csv"
        main(["lln-sweep", "--config",
              self.config(tmp_path, N_list=[16, 32, 64, 128]),
              "--out", str(out)])
        _, header, rows = read_csv(out)
        errs = [float(r[header.index("mean_abs_err")]) for r in rows]
        assert all(e > 0 for e in errs)
        assert all(b < a for a, b in zip(errs, errs[1:]))
        # measured decay ~N^-0.7 on this instance; assert a clear power law
        ns = [float(r[0]) for r in rows]
        slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert slope < -0.5

    def test_deterministic_apart_from_timestamp_and_walltime(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        config = self.config(tmp_path)
        main(["lln-sweep", "--config", config, "--out", str(out1)])
        main(["lln-sweep", "--config", config, "--out", str(out2)])

        def normalize(path):
            rows = []
            for line in path.read_text().splitlines():
                if line.startswith("# generated="):
                    continue
                if not line.startswith("#") and "," in line:
                    line = ",".join(line.split(",")[:-1])  # drop wall_time_s
                rows.append(line)
            return rows

        assert normalize(out1) == normalize(out2)

    def test_jobs_preserve_row_order(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        config = self.config(tmp_path)
        main(["lln-sweep", "--config", config, "--out", str(out1)])
        main(["lln-sweep", "--config", config, "--out", str(out2), "--jobs", "3"])
        _, _, rows1 = read_csv(out1)
        _, _, rows2 = read_csv(out2)
        assert [r[:-1] for r in rows1] == [r[:-1] for r in rows2]

    def test_budget_exceeded_exit_1(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = main(["lln-sweep", "--config", self.config(tmp_path),
                     "--out", str(out), "--budget", "10"])
        assert code == 1
        assert json.loads(capsys.readouterr().err)["error"] == "numeric"

    def test_non_increasing_n_list_exit_2(self, tmp_path):
        assert main(["lln-sweep", "--config",
                     self.config(tmp_path, N_list=[32, 16])]) == 2

    def test_sampler_fallback_when_budget_exceeded(self, tmp_path):
        out = tmp_path / "sweep.csv"
        config = self.config(tmp_path, N_list=[16, 32],
                             sampler_fallback=True,
                             chain={"steps": 30_000, "seed": 5})
        assert main(["lln-sweep", "--config", config, "--out", str(out),
                     "--budget", "20"]) == 0
        _, header, rows = read_csv(out)
        errs = [float(r[header.index("mean_abs_err")]) for r in rows]
        assert all(0 < e < 0.5 for e in errs)


class TestFluctCheck:
    def test_interior_columns(self, tmp_path):
        config = write_config(tmp_path, {
            **BOUNDARY_CONFIG, "energy_cap": 2, "N_list": [32, 64]})
        out = tmp_path / "fl.csv"
        assert main(["fluct-check", "--config", config, "--out", str(out)]) == 0
        _, header, rows = read_csv(out)
        assert "emp_cov_0_0" in header and "pred_cov_0_0" in header
        pred = [float(r[header.index("pred_cov_0_0")]) for r in rows]
        assert pred == pytest.approx([0.25, 0.25], abs=1e-12)

    def test_boundary_ratio_columns(self, tmp_path):
        config = write_config(tmp_path, {**BOUNDARY_CONFIG,
                                         "N_list": [64, 128, 256]})
        out = tmp_path / "fl.csv"
        assert main(["fluct-check", "--config", config, "--out", str(out)]) == 0
        _, header, rows = read_csv(out)
        assert len(rows) == 3
        pred = [float(r[header.index("pred_ratio")]) for r in rows]
        assert pred == pytest.approx([2 / 3] * 3, abs=1e-10)
        gaps = [abs(float(r[header.index("ratio_1_0")]) - 2 / 3) for r in rows]
        assert gaps[0] > gaps[-1]

    def test_boundary_sampler_fallback(self, tmp_path):
        config = write_config(tmp_path, {
            **BOUNDARY_CONFIG, "N_list": [64], "sampler_fallback": True,
            "chain": {"steps": 50_000, "seed": 9}})
        out = tmp_path / "fl.csv"
        assert main(["fluct-check", "--config", config, "--out", str(out),
                     "--budget", "50"]) == 0
        _, header, rows = read_csv(out)
        r10 = float(rows[0][header.index("ratio_1_0")])
        assert 0.3 < r10 < 1.0  # sampled estimate of the ~2/3 geometric ratio

    def test_boundary_requires_divisible_n(self, tmp_path, capsys):
        config = write_config(tmp_path, {
            "energies": ["1/2", "1"],
            "weights": [0.5, 0.5],
            "energy_cap": "7/10",
            "regime": "high_degeneracy",
            "N_list": [3, 4],
        })
        assert main(["fluct-check", "--config", config]) == 2
        assert "divisible" in json.loads(capsys.readouterr().err)["detail"]


class TestEntropyProbe:
    def test_zero_column_at_reference(self, tmp_path):
        config = write_config(tmp_path, {
            **BOUNDARY_CONFIG, "N_list": [10, 20, 40], "x_probe": [0.5, 0.5]})
        out = tmp_path / "probe.csv"
        assert main(["entropy-probe", "--config", config, "--out", str(out)]) == 0
        _, header, rows = read_csv(out)
        assert all(float(r[header.index("approx_error")]) == 0.0 for r in rows)

    def test_negative_fitted_slope(self, tmp_path):
        config = write_config(tmp_path, {
            **BOUNDARY_CONFIG, "N_list": [50, 100, 200, 400],
            "x_probe": [0.6, 0.4]})
        out = tmp_path / "probe.csv"
        assert main(["entropy-probe", "--config", config, "--out", str(out)]) == 0
        _, header, rows = read_csv(out)
        errs = np.array([float(r[header.index("approx_error")]) for r in rows])
        ns = np.array([float(r[0]) for r in rows])
        slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert slope < 0

    def test_unrepresentable_probe_exit_2(self, tmp_path):
        config = write_config(tmp_path, {
            **BOUNDARY_CONFIG, "N_list": [10], "x_probe": [0.55, 0.45]})
        assert main(["entropy-probe", "--config", config]) == 2


class TestSample:
    def test_exact_rows(self, tmp_path):
        config = write_config(tmp_path, {
            **BOUNDARY_CONFIG, "N": 6, "count": 25, "seed": 4,
            "method": "exact"})
        out = tmp_path / "draws.csv"
        assert main(["sample", "--config", config, "--out", str(out)]) == 0
        _, header, rows = read_csv(out)
        assert header == ["N1", "N2"]
        assert len(rows) == 25
        assert all(int(a) + int(b) == 6 for a, b in rows)

    def test_seed_flag_overrides(self, tmp_path):
        config = write_config(tmp_path, {
            **BOUNDARY_CONFIG, "N": 6, "count": 50, "seed": 4,
            "method": "exact"})
        out1, out2, out3 = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        main(["sample", "--config", config, "--out", str(out1)])
        main(["sample", "--config", config, "--out", str(out2), "--seed", "4"])
        main(["sample", "--config", config, "--out", str(out3), "--seed", "5"])
        same = lambda p: [ln for ln in p.read_text().splitlines()
                          if not ln.startswith("#")]
        assert same(out1) == same(out2)
        assert same(out1) != same(out3)

    def test_metropolis_method(self, tmp_path):
        config = write_config(tmp_path, {
            **BOUNDARY_CONFIG, "N": 6, "method": "metropolis",
            "chain": {"steps": 2000, "seed": 8}})
        out = tmp_path / "chain.csv"
        assert main(["sample", "--config", config, "--out", str(out)]) == 0
        _, _, rows = read_csv(out)
        assert rows and all(int(a) + int(b) == 6 for a, b in rows)

    def test_unknown_method_exit_2(self, tmp_path):
        config = write_config(tmp_path, {
            **BOUNDARY_CONFIG, "N": 6, "method": "bogus"})
        assert main(["sample", "--config", config]) == 2
