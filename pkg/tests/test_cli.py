import json

import numpy as np
import pytest

from ife.cli import main
from ife.dgp import DgpConfig, generate_dgp
from ife.panel import read_panel_csv, write_panel_csv


@pytest.fixture(scope="module")
def quiet_panel_csv(tmp_path_factory):
    """Near-noiseless pure factor panel with planted unit effect."""
    cfg = DgpConfig(model="dgp1", n_control=30, n_pre=20, error_scale=1e-6)
    draw = generate_dgp(cfg, np.random.default_rng(101))
    path = tmp_path_factory.mktemp("data") / "panel.csv"
    write_panel_csv(draw.panel, path)
    return path


@pytest.fixture(scope="module")
def covariate_panel_csv(tmp_path_factory):
    cfg = DgpConfig(model="dgp2", n_control=30, n_pre=20, error_scale=1e-6)
    draw = generate_dgp(cfg, np.random.default_rng(102))
    path = tmp_path_factory.mktemp("data") / "panel_cov.csv"
    write_panel_csv(draw.panel, path)
    return path


def read_effects(path):
    rows = path.read_text().strip().split("\n")
    header = rows[0].split(",")
    return header, [dict(zip(header, line.split(","))) for line in rows[1:]]


class TestEstimateCommand:
    def test_near_noiseless_recovery(self, quiet_panel_csv, tmp_path):
        out = tmp_path / "out"
        code = main([
            "estimate", "--input", str(quiet_panel_csv), "--output", str(out),
            "--r", "3", "--B", "199", "--alpha", "0.1", "--seed", "7",
        ])
        assert code == 0
        header, rows = read_effects(out / "effects.csv")
        assert header == ["unit", "time", "delta_hat", "std_err", "eq_lo", "eq_hi", "sy_lo", "sy_hi"]
        assert len(rows) == 5
        for row in rows:
            assert abs(float(row["delta_hat"]) - 1.0) < 1e-3
            assert float(row["eq_lo"]) <= 1.0 <= float(row["eq_hi"])
            assert float(row["sy_lo"]) <= 1.0 <= float(row["sy_hi"])
        fit = json.loads((out / "fit.json").read_text())
        assert fit["r"] == 3
        assert fit["beta"] is None
        assert (out / "effects.svg").exists()

    def test_auto_rank_selects_three(self, quiet_panel_csv, tmp_path):
        out = tmp_path / "out_auto"
        code = main([
            "estimate", "--input", str(quiet_panel_csv), "--output", str(out),
            "--r", "auto", "--B", "150", "--alpha", "0.1", "--seed", "7",
        ])
        assert code == 0
        fit = json.loads((out / "fit.json").read_text())
        assert fit["r_estimated"] is True
        assert fit["r"] == 3
        assert fit["rank_criterion"]["r_hat"] == 3

    def test_covariate_model(self, covariate_panel_csv, tmp_path):
        out = tmp_path / "out_cov"
        code = main([
            "estimate", "--input", str(covariate_panel_csv), "--output", str(out),
            "--r", "3", "--B", "120", "--alpha", "0.1", "--seed", "3",
            "--covariates", "x1,x2",
        ])
        assert code == 0
        fit = json.loads((out / "fit.json").read_text())
        assert fit["beta"] is not None and len(fit["beta"]) == 2
        assert fit["diagnostics"]["ifee"]["converged"] is True
        _, rows = read_effects(out / "effects.csv")
        for row in rows:
            assert abs(float(row["delta_hat"]) - 1.0) < 1e-3

    def test_multi_alpha_columns(self, quiet_panel_csv, tmp_path):
        out = tmp_path / "out_multi"
        code = main([
            "estimate", "--input", str(quiet_panel_csv), "--output", str(out),
            "--r", "3", "--B", "150", "--alpha", "0.1,0.05", "--seed", "7",
        ])
        assert code == 0
        header, _ = read_effects(out / "effects.csv")
        assert header[4:] == [
            "eq_lo_90", "eq_hi_90", "sy_lo_90", "sy_hi_90",
            "eq_lo_95", "eq_hi_95", "sy_lo_95", "sy_hi_95",
        ]

    def test_byte_identical_reruns(self, quiet_panel_csv, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main([
                "estimate", "--input", str(quiet_panel_csv), "--output", str(out),
                "--r", "3", "--B", "99", "--alpha", "0.1", "--seed", "11",
            ]) == 0
            outs.append((out / "effects.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_missing_treated_column_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("unit,time,y\nA,1,0.0\nA,2,0.0\nB,1,0.0\nB,2,0.0\n")
        code = main(["estimate", "--input", str(bad), "--output", str(tmp_path / "o")])
        assert code == 2
        record = json.loads(capsys.readouterr().err.strip())
        assert record["error"] == "schema"

    def test_order_condition_failure_exits_2(self, tmp_path, capsys):
        cfg = DgpConfig(model="dgp1", n_control=4, n_pre=4)
        draw = generate_dgp(cfg, np.random.default_rng(5))
        path = tmp_path / "small.csv"
        write_panel_csv(draw.panel, path)
        code = main([
            "estimate", "--input", str(path), "--output", str(tmp_path / "o"),
            "--r", "3", "--B", "101",
        ])
        assert code == 2
        record = json.loads(capsys.readouterr().err.strip())
        assert record["error"] == "schema"
        assert "order conditions" in record["message"]

    def test_degenerate_loadings_exit_3(self, tmp_path, capsys):
        # rank-1 outcomes fitted with r=2 leave a singular loading Gram matrix
        t = np.arange(1.0, 13.0)
        i = np.arange(1.0, 11.0)
        rows = ["unit,time,y,treated"]
        for ui, unit in enumerate(i):
            for ti, time in enumerate(t):
                treated = int(ui == 9 and ti >= 8)
                rows.append(f"u{ui},{ti:02d},{unit * time + treated},{treated}")
        path = tmp_path / "rank1.csv"
        path.write_text("\n".join(rows) + "\n")
        code = main([
            "estimate", "--input", str(path), "--output", str(tmp_path / "o"),
            "--r", "2", "--B", "101",
        ])
        assert code == 3
        record = json.loads(capsys.readouterr().err.strip())
        assert record["error"] == "degeneracy"

    def test_config_file_with_flag_override(self, quiet_panel_csv, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({
            "input_path": str(quiet_panel_csv), "r": 3, "B": 120,
            "alpha": [0.1], "seed": 1,
        }))
        out = tmp_path / "out_cfg"
        code = main([
            "estimate", "--config", str(cfg_path), "--output", str(out), "--seed", "2",
        ])
        assert code == 0
        fit = json.loads((out / "fit.json").read_text())
        assert fit["seed"] == 2  # flag beats file
        assert fit["B"] == 120  # file value survives


class TestSimulateCommand:
    def study_config(self, tmp_path, **kw):
        payload = {
            "dgp": "dgp1", "case": 1, "margin": 1, "T0": 10, "N0": 12,
            "reps": 25, "alpha": [0.1], "factor_mode": "known", "seed": 4,
        }
        payload.update(kw)
        path = tmp_path / "study.json"
        path.write_text(json.dumps(payload))
        return path

    def test_coverage_csv_written(self, tmp_path):
        cfg = self.study_config(tmp_path)
        out = tmp_path / "sim"
        assert main(["simulate", "--config", str(cfg), "--output", str(out)]) == 0
        lines = (out / "coverage.csv").read_text().strip().split("\n")
        assert lines[0] == (
            "dgp,case,margin,T0,N0,factor_mode,alpha,family,period_offset,"
            "coverage_pct,reps,failures"
        )
        assert len(lines) == 1 + 2 * 5  # one level, two families, five periods
        first = lines[1].split(",")
        assert first[0] == "dgp1" and first[-2] == "25" and first[-1] == "0"

    def test_single_rep_degenerate_coverage(self, tmp_path):
        cfg = self.study_config(tmp_path, reps=1)
        out = tmp_path / "sim1"
        assert main(["simulate", "--config", str(cfg), "--output", str(out)]) == 0
        for line in (out / "coverage.csv").read_text().strip().split("\n")[1:]:
            assert line.split(",")[9] in ("0.00", "100.00")

    def test_seed_determinism(self, tmp_path):
        cfg = self.study_config(tmp_path)
        blobs = []
        for name in ("s1", "s2"):
            out = tmp_path / name
            assert main(["simulate", "--config", str(cfg), "--output", str(out)]) == 0
            blobs.append((out / "coverage.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_seed_flag_changes_output(self, tmp_path):
        cfg = self.study_config(tmp_path)
        out1, out2 = tmp_path / "x1", tmp_path / "x2"
        assert main(["simulate", "--config", str(cfg), "--output", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg), "--output", str(out2), "--seed", "99"]) == 0
        assert (out1 / "coverage.csv").read_bytes() != (out2 / "coverage.csv").read_bytes()

    def test_missing_config_rejected(self, tmp_path, capsys):
        code = main(["simulate", "--config", str(tmp_path / "none.json"), "--output", str(tmp_path)])
        assert code == 2
        assert json.loads(capsys.readouterr().err.strip())["error"] == "schema"

    def test_failure_rate_exit_4(self, tmp_path, capsys, monkeypatch):
        import ife.cli as cli_mod
        from ife.exceptions import SimulationError

        def exploding(*args, **kwargs):
            raise SimulationError("30 of 100 replications failed")

        monkeypatch.setattr(cli_mod, "run_coverage_study", exploding)
        cfg = self.study_config(tmp_path)
        code = main(["simulate", "--config", str(cfg), "--output", str(tmp_path / "f")])
        assert code == 4
        assert json.loads(capsys.readouterr().err.strip())["error"] == "simulation"
