import csv
import json
from pathlib import Path

import pytest

from issakit import cli
from issakit.config import RunConfig
from issakit.harness import COLUMNS, read_trace_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
DISCRETE = str(CONFIGS / "second_order_discrete.json")
CONTINUOUS = str(CONFIGS / "second_order_continuous.json")
TOY = str(CONFIGS / "toy.json")


def write_cfg(tmp_path, base, name="cfg.json", **patch):
    data = json.loads(Path(base).read_text())
    for dotted, val in patch.items():
        node = data
        keys = dotted.split("__")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = val
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


class TestSynthesize:
    def test_feasible(self, capsys):
        assert cli.main(["synthesize", "--config", CONTINUOUS]) == cli.EXIT_OK
        assert "feasible" in capsys.readouterr().out

    def test_k_min(self, capsys):
        assert cli.main(["synthesize", "--config", CONTINUOUS, "--k-min"]) == cli.EXIT_OK
        assert "k_min = 2" in capsys.readouterr().out

    def test_gain_too_small(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CONTINUOUS, index__k=1.0)
        assert cli.main(["synthesize", "--config", cfg]) == cli.EXIT_INFEASIBLE
        assert "infeasible" in capsys.readouterr().err

    def test_discrete_sigma_too_small(self, tmp_path):
        cfg = write_cfg(tmp_path, DISCRETE, index__sigma=0.05, index__sigma_star=0.0)
        assert cli.main(["synthesize", "--config", cfg]) == cli.EXIT_INFEASIBLE

    def test_toy_has_no_rule(self, capsys):
        assert cli.main(["synthesize", "--config", TOY]) == cli.EXIT_OK


class TestSimulate:
    def test_toy_rows_and_sidecar(self, tmp_path):
        out = tmp_path / "toy.csv"
        assert cli.main(["simulate", "--config", TOY, "--out", str(out)]) == cli.EXIT_OK
        tr = read_trace_csv(out)
        assert len(tr) == 100
        meta = json.loads(out.with_suffix(".json").read_text())
        assert meta["seed"] == 0 and meta["summary"]["steps"] == 100

    def test_zero_steps_header_only(self, tmp_path):
        out = tmp_path / "z.csv"
        assert cli.main(["simulate", "--config", TOY, "--out", str(out), "--steps", "0"]) == cli.EXIT_OK
        assert out.read_text() == ",".join(COLUMNS) + "\n"

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert cli.main(["simulate", "--config", DISCRETE, "--out", str(p), "--steps", "40"]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()

    def test_infeasible_design_writes_nothing(self, tmp_path):
        cfg = write_cfg(tmp_path, CONTINUOUS, index__k=1.0)
        out = tmp_path / "o.csv"
        assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == cli.EXIT_INFEASIBLE
        assert not out.exists()

    def test_mid_episode_infeasible_partial_trace(self, tmp_path, capsys):
        # no grid refinement and a single direction: the projection gives up quickly
        cfg = write_cfg(tmp_path, TOY, issa={"n_dirs": 1, "grid_max_refinements": 0},
                        obstacles=[{"cx": 0.45, "cy": 0.0, "radius": 0.25}])
        out = tmp_path / "p.csv"
        code = cli.main(["simulate", "--config", cfg, "--out", str(out)])
        assert code == cli.EXIT_EPISODE_INFEASIBLE
        tr = read_trace_csv(out)
        assert len(tr) < 100
        meta = json.loads(out.with_suffix(".json").read_text())
        assert any(f.startswith("infeasible at step") for f in meta["flags"])

    def test_sidecar_config_round_trip(self, tmp_path):
        out = tmp_path / "r.csv"
        cli.main(["simulate", "--config", DISCRETE, "--out", str(out), "--steps", "5", "--seed", "11"])
        meta = json.loads(out.with_suffix(".json").read_text())
        cfg = RunConfig.from_dict(meta["config"])
        assert cfg == RunConfig.load(DISCRETE).with_overrides(seed=11, steps=5)

    def test_continuous_approx_rejected_outside_toy(self, tmp_path):
        assert cli.main(["simulate", "--config", DISCRETE, "--out", str(tmp_path / "x.csv"),
                         "--mode", "continuous-approx"]) == cli.EXIT_USAGE


class TestToyCommand:
    @pytest.mark.parametrize("mode", ["discrete", "continuous-approx"])
    def test_modes(self, tmp_path, capsys, mode):
        out = tmp_path / f"{mode}.csv"
        assert cli.main(["toy", "--mode", mode, "--out", str(out)]) == cli.EXIT_OK
        text = capsys.readouterr().out
        assert "final_phi" in text
        if mode == "discrete":
            assert "steps_with_phi_rising_while_positive: 0" in text
            assert "intervened_steps_with_phi_rising: 0" in text

    def test_needs_toy_config(self, tmp_path):
        assert cli.main(["toy", "--config", DISCRETE, "--out", str(tmp_path / "t.csv")]) == cli.EXIT_USAGE


class TestVerify:
    def test_ok(self, tmp_path, capsys):
        out = tmp_path / "d.csv"
        cli.main(["simulate", "--config", DISCRETE, "--out", str(out), "--steps", "60"])
        capsys.readouterr()
        assert cli.main(["verify", str(out), "--config", DISCRETE]) == cli.EXIT_OK
        assert "forward_invariant: True" in capsys.readouterr().out

    def test_violation(self, tmp_path, capsys):
        out = tmp_path / "v.csv"
        cli.main(["simulate", "--config", TOY, "--out", str(out), "--steps", "10"])
        rows = out.read_text().splitlines()
        header, body = rows[0], [r.split(",") for r in rows[1:]]
        phi_col, phi0_col = COLUMNS.index("phi"), COLUMNS.index("phi0")
        for row in body[:3]:
            row[phi_col] = row[phi0_col] = "-1.0"
        body[3][phi_col] = "0.5"
        out.write_text("\n".join([header] + [",".join(r) for r in body]) + "\n")
        capsys.readouterr()
        assert cli.main(["verify", str(out), "--config", TOY]) == cli.EXIT_VERIFY_FAILED
        assert "first_violation_step: 3" in capsys.readouterr().out

    def test_never_entered(self, tmp_path, capsys):
        out = tmp_path / "n.csv"
        cli.main(["simulate", "--config", TOY, "--out", str(out), "--steps", "3"])
        capsys.readouterr()
        assert cli.main(["verify", str(out), "--config", TOY]) == cli.EXIT_OK
        assert "never-entered" in capsys.readouterr().out

    def test_schema_mismatch(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,px\n0,0\n")
        assert cli.main(["verify", str(bad), "--config", TOY]) == cli.EXIT_SCHEMA

    def test_missing_trace(self, tmp_path):
        assert cli.main(["verify", str(tmp_path / "none.csv"), "--config", TOY]) == cli.EXIT_USAGE


class TestScan:
    def test_deeply_safe(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert cli.main(["scan", "--config", DISCRETE, "--out", str(out), "--state=-5,0,0,0",
                         "--resolution", "11"]) == cli.EXIT_OK
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 121 and all(r["status"] == "SAFE" for r in rows)
        assert "safe_fraction: 1.0" in capsys.readouterr().out

    def test_zero_gain_empty(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, CONTINUOUS, obstacles=[{"cx": 0.0, "cy": 0.0, "radius": 0.25}],
                        limits={"v_max": 1.0, "a_min": -2.0, "a_max": 2.0, "w_min": -2.0, "w_max": 2.0, "dt": 0.05})
        out = tmp_path / "z.csv"
        assert cli.main(["scan", "--config", cfg, "--out", str(out), "--state=-0.45,0,0,0.3",
                         "--k", "0"]) == cli.EXIT_OK
        with open(out) as fh:
            assert all(r["status"] == "UNSAFE" for r in csv.DictReader(fh))

    def test_not_2d(self, tmp_path, monkeypatch):
        class OneD:
            control_box = ((0.0, 1.0),)

        monkeypatch.setattr(RunConfig, "build_model", lambda self: OneD())
        code = cli.main(["scan", "--config", DISCRETE, "--out", str(tmp_path / "x.csv"), "--state", "0,0,0,0"])
        assert code == cli.EXIT_NOT_2D

    def test_bad_state(self, tmp_path):
        assert cli.main(["scan", "--config", DISCRETE, "--out", str(tmp_path / "x.csv"),
                         "--state", "a,b"]) == cli.EXIT_USAGE


class TestBench:
    def test_rows(self, tmp_path):
        out = tmp_path / "b.csv"
        assert cli.main(["bench", "--config", DISCRETE, "--out", str(out), "--trials", "20"]) == cli.EXIT_OK
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["n_dirs"]) for r in rows] == [3, 5, 10, 20]
        assert all(r["wall_ms"] == "NA" for r in rows)
        assert all(0.0 <= float(r["success_rate"]) <= 1.0 for r in rows)

    def test_deterministic_without_timing(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            cli.main(["bench", "--config", DISCRETE, "--out", str(p), "--trials", "10"])
        assert a.read_bytes() == b.read_bytes()

    def test_bad_dirs(self, tmp_path):
        assert cli.main(["bench", "--config", DISCRETE, "--out", str(tmp_path / "b.csv"),
                         "--n-dirs", "0,3"]) == cli.EXIT_USAGE


class TestUsage:
    def test_unknown_key(self, tmp_path):
        cfg = write_cfg(tmp_path, DISCRETE, bogus=1)
        assert cli.main(["synthesize", "--config", cfg]) == cli.EXIT_USAGE

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{")
        assert cli.main(["synthesize", "--config", str(p)]) == cli.EXIT_USAGE

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == cli.EXIT_USAGE

    def test_unknown_trigger_override(self, tmp_path):
        cfg = write_cfg(tmp_path, DISCRETE, ctrigger={"enabled": True, "overrides": {"nope": 1}})
        assert cli.main(["synthesize", "--config", cfg]) == cli.EXIT_USAGE
