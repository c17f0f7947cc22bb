import json
from pathlib import Path

import numpy as np
import pytest

from choquard.cli import main


def write_config(path: Path, out_dir: Path, **overrides) -> Path:
    doc = {
        "params": {"N": 3, "alpha": 2.0, "p": 2.0, "q": 3.0, "mu": 1.0, "lambda": 1.0},
        "grid": {"rmax": 30.0, "M": 1024, "scheme": "graded", "gamma": 2.0},
        "solve": {"tol_residual": 1e-6, "max_iter": 500},
        "output_dir": str(out_dir),
        "seed": 11,
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and key in doc:
            doc[key] = {**doc[key], **value}
        else:
            doc[key] = value
    path.write_text(json.dumps(doc))
    return path


class TestConstantsCommand:
    def test_json_output(self, tmp_path, capsys):
        out = tmp_path / "constants.json"
        assert main(["constants", "--N", "3", "--alpha", "2.0", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["A_alpha"] == pytest.approx(0.0795775, rel=1e-5)
        assert doc["S_alpha_consistency"] is True

    def test_invalid_alpha_exit_code(self, capsys):
        assert main(["constants", "--N", "3", "--alpha", "5.0"]) == 3


class TestSolveCommand:
    def test_solve_writes_outputs(self, tmp_path, capsys):
        out_dir = tmp_path / "run"
        cfg = write_config(tmp_path / "cfg.json", out_dir)
        assert main(["solve", "--config", str(cfg)]) == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["status"] == "converged"
        assert (out_dir / "profile.csv").exists()
        header = (out_dir / "profile.csv").read_text().splitlines()[0]
        assert header == "r,u"

    def test_determinism(self, tmp_path, capsys):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cfg1 = write_config(tmp_path / "c1.json", out1)
        cfg2 = write_config(tmp_path / "c2.json", out2)
        assert main(["solve", "--config", str(cfg1)]) == 0
        assert main(["solve", "--config", str(cfg2)]) == 0
        assert (out1 / "profile.csv").read_bytes() == (out2 / "profile.csv").read_bytes()
        r1 = json.loads((out1 / "report.json").read_text())
        r2 = json.loads((out2 / "report.json").read_text())
        assert r1 == r2

    def test_zero_init_invalid(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", tmp_path / "run", solve={"init": "zero"})
        assert main(["solve", "--config", str(cfg)]) == 3

    def test_unknown_keys_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        doc = json.loads(write_config(tmp_path / "t.json", tmp_path).read_text())
        doc["unexpected"] = 1
        cfg.write_text(json.dumps(doc))
        assert main(["solve", "--config", str(cfg)]) == 3

    def test_missing_params_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"params": {"N": 3, "alpha": 2.0}}))
        assert main(["solve", "--config", str(cfg)]) == 3


class TestVerifyCommand:
    def test_verify_solved_report(self, tmp_path, capsys):
        out_dir = tmp_path / "run"
        cfg = write_config(tmp_path / "cfg.json", out_dir)
        assert main(["solve", "--config", str(cfg)]) == 0
        assert main(["verify", "--report", str(out_dir / "report.json")]) == 0
        doc = json.loads((out_dir / "verification.json").read_text())
        assert doc["overall"] is True


class TestContinueCommand:
    def test_zero_steps_single_row(self, tmp_path, capsys):
        out_dir = tmp_path / "cont"
        cfg = write_config(tmp_path / "cfg.json", out_dir)
        code = main(["continue", "--config", str(cfg), "--target", "p-upper", "--steps", "0"])
        assert code == 0
        rows = (out_dir / "levels.csv").read_text().splitlines()
        assert rows[0] == "step,p,q,J,P,linf,status"
        assert len(rows) == 2

    def test_two_step_levels(self, tmp_path, capsys):
        out_dir = tmp_path / "cont2"
        cfg = write_config(
            tmp_path / "cfg.json", out_dir,
            solve={"tol_residual": 1e-6, "max_iter": 500,
                   "continuation": {"target": "q-upper", "steps": 2}},
        )
        code = main(["continue", "--config", str(cfg)])
        assert code == 0
        rows = (out_dir / "levels.csv").read_text().splitlines()
        assert len(rows) == 4
        summary = json.loads((out_dir / "continue_summary.json").read_text())
        assert summary["classification"] == "converged"
        assert len(summary["levels"]) == 3


class TestContinueDichotomyRow:
    def test_final_row_carries_classification(self, tmp_path, capsys, monkeypatch):
        import choquard.cli as cli

        out_dir = tmp_path / "cont"
        cfg = write_config(tmp_path / "cfg.json", out_dir)

        real_reports = {}

        def fake_continue(params, target, steps, opts, grid, init=None):
            from choquard.solver import continue_exponent as real
            reports = real(params, target, 0, opts, grid)
            real_reports["reports"] = reports * 2
            return reports * 2

        monkeypatch.setattr(cli, "continue_exponent", fake_continue)
        monkeypatch.setattr(cli, "detect_dichotomy", lambda reports: "concentrating")
        code = cli.main(["continue", "--config", str(cfg), "--target", "p-upper", "--steps", "1"])
        assert code == 2
        rows = (out_dir / "levels.csv").read_text().splitlines()
        assert rows[-1].endswith("concentrating")
        assert rows[-2].endswith("converged")


class TestThresholdCommand:
    def test_margins_json(self, tmp_path, capsys):
        out_dir = tmp_path / "thresh"
        cfg = write_config(
            tmp_path / "cfg.json", out_dir,
            params={"N": 3, "alpha": 2.0, "p": 5.0, "q": 3.0, "mu": 1.0, "lambda": 1.0},
        )
        code = main([
            "threshold", "--config", str(cfg), "--case", "upper-critical-p",
            "--family", "0.25,0.125", "--nodes", "512",
        ])
        assert code == 0
        doc = json.loads((out_dir / "margins.json").read_text())
        assert "bubble" in doc["families"]
        assert len(doc["families"]["bubble"]) == 2
        # margins at lambda=1, N=3, q=3 are nonpositive
        assert all(row["margin"] < 0 for row in doc["families"]["bubble"])

    def test_wrong_case_exit(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", tmp_path / "x")
        code = main([
            "threshold", "--config", str(cfg), "--case", "upper-critical-p",
            "--family", "0.25",
        ])
        assert code == 3


class TestSweepCommand:
    def _sweep_config(self, tmp_path, out_dir, parallelism=1):
        return write_config(
            tmp_path / f"sweep_{parallelism}.json", out_dir,
            grid={"rmax": 30.0, "M": 512, "scheme": "graded", "gamma": 2.0},
            sweep={"p": [2.0, 2.2], "q": [3.0, 3.2], "parallelism": parallelism},
        )

    def test_grid_of_cells_and_dedupe(self, tmp_path, capsys):
        out_dir = tmp_path / "sweep"
        cfg = self._sweep_config(tmp_path, out_dir)
        main(["sweep", "--config", str(cfg)])
        rows = (out_dir / "summary.csv").read_text().splitlines()
        assert len(rows) == 5  # header + 4 cells
        cell_dirs = list(out_dir.glob("cell_*"))
        assert len(cell_dirs) == 4
        for cell in cell_dirs:
            assert (cell / "report.json").exists()

    def test_parallel_matches_serial(self, tmp_path, capsys):
        out_s = tmp_path / "serial"
        out_p = tmp_path / "parallel"
        main(["sweep", "--config", str(self._sweep_config(tmp_path, out_s, 1))])
        main(["sweep", "--config", str(self._sweep_config(tmp_path, out_p, 2))])
        assert (out_s / "summary.csv").read_bytes() == (out_p / "summary.csv").read_bytes()

    def test_empty_sweep_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", tmp_path / "x")
        assert main(["sweep", "--config", str(cfg)]) == 3

    def test_duplicate_cells_deduplicated(self, tmp_path, capsys):
        out_dir = tmp_path / "dup"
        cfg = write_config(
            tmp_path / "dup.json", out_dir,
            grid={"rmax": 30.0, "M": 512, "scheme": "graded", "gamma": 2.0},
            sweep={"p": [2.0, 2.0], "q": [3.0], "parallelism": 1},
        )
        main(["sweep", "--config", str(cfg)])
        rows = (out_dir / "summary.csv").read_text().splitlines()
        assert len(rows) == 2  # header + single deduplicated cell
        assert len(list(out_dir.glob("cell_*"))) == 1


class TestBubbleAndHls:
    def test_bubble_table(self, tmp_path, capsys):
        out = tmp_path / "table.csv"
        code = main([
            "bubble", "--N", "3", "--alpha", "2.0", "--p", "2.0", "--q", "3.0",
            "--eps", "0.25,0.125,0.0625,0.03125", "--nodes", "256", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "eps,a,b,c,d,resolved"
        assert lines[-1].startswith("# fits:")

    def test_hls_check(self, tmp_path, capsys):
        out = tmp_path / "hls.json"
        code = main([
            "hls-check", "--N", "3", "--alpha", "2.0", "--pairs", "10",
            "--seed", "5", "--nodes", "256", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["bound_holds"] is True
        assert doc["near_extremal"] is True
