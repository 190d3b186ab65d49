import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from rru import model as m
from rru import reports
from rru.acceptance import load_manifest
from rru.cli import main

ROOT = Path(__file__).resolve().parents[1]


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg.to_dict()))
    return path


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


POLYA = m.DesignConfig(m.point_mass(1), m.point_mass(1), m.identity(1), 2, 1, 800)
H0 = m.DesignConfig(m.bernoulli(0.5), m.bernoulli(0.5), m.identity(1), 2, 2, 10_000)


class TestSimulate:
    def test_polya_trajectory(self, tmp_path):
        cfg = write_cfg(tmp_path, POLYA)
        assert main(["simulate", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path / "o")]) == 0
        table = rows(tmp_path / "o" / "trajectory.csv")
        assert table[0] == ["i", "delta", "y", "u", "z_before"]
        assert len(table) == 1 + POLYA.horizon
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert [c["n"] for c in summary["checkpoints"]] == list(POLYA.checkpoints)

    def test_bad_b_exits_2_and_names_field(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, POLYA.replace(b=0))
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert "b must be" in err

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2

    def test_repeat_is_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, POLYA)
        for d in ("a", "b"):
            main(["simulate", "--config", str(cfg), "--seed", "11", "--out", str(tmp_path / d)])
        for f in ("trajectory.csv", "summary.json"):
            assert sha(tmp_path / "a" / f) == sha(tmp_path / "b" / f)

    def test_run_manifest_checksums(self, tmp_path):
        cfg = write_cfg(tmp_path, POLYA)
        out = tmp_path / "o"
        main(["simulate", "--config", str(cfg), "--out", str(out)])
        doc = json.loads((out / "run_manifest.json").read_text())
        assert doc["command"] == "simulate" and doc["tolerance_version"]
        for name, digest in doc["files"].items():
            assert sha(out / name) == digest


class TestMc:
    def test_single_replicate_rows(self, tmp_path):
        cfg = write_cfg(tmp_path, H0.replace(horizon=2000, checkpoints=None))
        assert main(["mc", "--config", str(cfg), "--replicates", "1", "--out", str(tmp_path / "o")]) == 0
        table = rows(tmp_path / "o" / "study.csv")
        assert table[0] == list(reports.STUDY_COLUMNS)
        assert len(table) - 1 == len(H0.replace(horizon=2000, checkpoints=None).checkpoints)

    def test_worker_env_does_not_change_files(self, tmp_path, monkeypatch):
        cfg = write_cfg(tmp_path, H0.replace(horizon=3000, checkpoints=None))
        for workers in ("1", "3"):
            monkeypatch.setenv("RRU_WORKERS", workers)
            main(["mc", "--config", str(cfg), "--replicates", "60", "--seed", "5", "--out", str(tmp_path / workers)])
        for f in ("study.csv", "aggregate.json"):
            assert sha(tmp_path / "1" / f) == sha(tmp_path / "3" / f)

    def test_h0_bernoulli_zeta0_normal(self, tmp_path):
        cfg = write_cfg(tmp_path, H0)
        main(["mc", "--config", str(cfg), "--replicates", "1000", "--seed", "1", "--out", str(tmp_path / "o")])
        agg = json.loads((tmp_path / "o" / "aggregate.json").read_text())
        assert agg["zeta0_ks"]["p_value"] > 0.01

    def test_aggregate_round_trip(self, tmp_path):
        cfg = write_cfg(tmp_path, m.DesignConfig(m.bernoulli(0.8), m.bernoulli(0.5), m.identity(1), 2, 2, 2000))
        main(["mc", "--config", str(cfg), "--replicates", "30", "--out", str(tmp_path / "o")])
        text = (tmp_path / "o" / "aggregate.json").read_text()
        assert reports.dumps_json(json.loads(text)) == text

    def test_floats_round_trip_and_absent_fields(self, tmp_path):
        cfg = write_cfg(tmp_path, m.DesignConfig(m.bernoulli(0.9), m.bernoulli(0.5), m.identity(1), 50, 0.01, 200, (1, 200)))
        main(["mc", "--config", str(cfg), "--replicates", "5", "--out", str(tmp_path / "o")])
        table = rows(tmp_path / "o" / "study.csv")
        first = dict(zip(table[0], table[1]))
        assert first["n"] == "1" and first["zeta0"] == ""
        for row in table[1:]:
            for cell in row:
                if cell and "." in cell:
                    assert repr(float(cell)) == cell


class TestPower:
    def test_table(self, tmp_path):
        cfg = write_cfg(tmp_path, H0)
        out = tmp_path / "o"
        assert main(["power", "--config", str(cfg), "--effects", "0.2,0,0.1", "--replicates", "400", "--out", str(out)]) == 0
        table = rows(out / "power.csv")
        assert table[0] == ["effect", "n", "R", "alpha", "empirical_power", "mean_NW_share", "mean_eta_sq"]
        effects = [float(r[0]) for r in table[1:]]
        assert effects == sorted(effects) == [0.0, 0.1, 0.2]
        size = float(table[1][4])
        assert abs(size - 0.05) <= 2.576 * (0.05 * 0.95 / 400) ** 0.5

    def test_unrealizable_effect(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, H0)
        assert main(["power", "--config", str(cfg), "--effects", "0.6", "--out", str(tmp_path / "o")]) == 2
        assert "bernoulli p" in capsys.readouterr().err


class TestCheck:
    def test_list(self, capsys):
        assert main(["check", "--list"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 13 and lines[0].startswith("C01")

    def test_impossible_tolerance_fails(self, tmp_path, capsys):
        doc = load_manifest()
        doc["studies"] = {"tiny": {
            "suite": "h0", "replicates": 40,
            "config": H0.replace(horizon=400, checkpoints=None).to_dict(),
        }}
        doc["criteria"] = [
            {"id": 1, "title": "impossible", "study": "tiny",
             "checks": [{"metric": "zeta0_ks.statistic", "op": "<=", "value": 0.0}]},
            {"id": 13, "title": "kernel", "study": None,
             "checks": [{"metric": "failed_cases", "op": "==", "value": 0}]},
        ]
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(doc))
        code = main(["check", "--manifest", str(path), "--out", str(tmp_path / "o")])
        out = capsys.readouterr().out
        assert code == 1
        assert "[FAIL] C01" in out and "[PASS] C13" in out
        verdict = json.loads((tmp_path / "o" / "verdict.json").read_text())
        assert [c["passed"] for c in verdict["criteria"]] == [False, True]

    def test_bad_manifest_exits_2(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{}")
        assert main(["check", "--manifest", str(path), "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, POLYA)
    proc = subprocess.run(
        [sys.executable, "-m", "rru", "simulate", "--config", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "trajectory.csv").exists()


@pytest.mark.parametrize("name", ["polya.json", "h0_bernoulli.json", "h1_bernoulli.json", "h0_normal_clipped.json"])
def test_shipped_configs_are_valid(name):
    cfg = m.load_config(ROOT / "configs" / name)
    assert m.validate_config(cfg) == []
