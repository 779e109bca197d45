import json
import math
import os

import numpy as np
import pytest

from quotefilter import ConfigError, IoError, Quotes
from quotefilter.cli import main
from quotefilter.config import OUT_ENV_VAR, RunConfig, parse_config
from quotefilter.impact import ImpactCurve
from quotefilter.output import (
    atomic_write_text,
    read_manifest_config,
    write_impact_csv,
    write_manifest,
)


class TestParseConfig:
    def test_minimal_file_gets_defaults(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text('{"command": "verify"}')
        cfg = parse_config(file=str(p))
        assert cfg == RunConfig(command="verify")
        assert cfg.lambda0 == 50.0 and cfg.half_spread == 0.1

    def test_negative_half_spread_message(self):
        with pytest.raises(ConfigError, match=r"quotes\.half_spread must be >= 0"):
            parse_config(file_data={"command": "verify", "quotes": {"half_spread": -0.1}})

    def test_flags_override_file(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text('{"command": "verify", "intensity": {"a": 5.0}}')
        cfg = parse_config(file=str(p), flags={"a": 20.0})
        assert cfg.a == 20.0

    def test_unknown_field_named(self):
        with pytest.raises(ConfigError, match="unknown field frobnicate"):
            parse_config(file_data={"command": "verify", "frobnicate": 1})
        with pytest.raises(ConfigError, match=r"unknown field grid\.m"):
            parse_config(file_data={"command": "verify", "grid": {"m": 3}})

    def test_seed_mandatory_for_runs(self):
        for command in ("simulate", "impact"):
            with pytest.raises(ConfigError, match="seed is mandatory"):
                parse_config(file_data={"command": command})
        parse_config(file_data={"command": "verify"})  # no seed needed

    def test_infinite_meta_horizon_roundtrip(self):
        cfg = parse_config(
            file_data={"command": "verify", "meta": {"T": "inf"}, "horizon": 1.0}
        )
        assert math.isinf(cfg.horizon_T)
        again = RunConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_type_errors_have_paths(self):
        with pytest.raises(ConfigError, match=r"intensity\.a must be a number"):
            parse_config(file_data={"command": "verify", "intensity": {"a": "big"}})
        with pytest.raises(ConfigError, match="replicas must be an integer"):
            parse_config(file_data={"command": "verify", "replicas": 2.5})

    def test_env_var_sets_default_out(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUT_ENV_VAR, str(tmp_path / "envout"))
        cfg = parse_config(file_data={"command": "verify"})
        assert cfg.out == str(tmp_path / "envout")
        cfg2 = parse_config(file_data={"command": "verify", "out": "explicit"})
        assert cfg2.out == "explicit"


class TestOutputs:
    def test_manifest_roundtrip_exact(self, tmp_path):
        cfg = parse_config(
            file_data={
                "command": "impact",
                "seed": 7,
                "meta": {"T": "inf"},
                "horizon": 1.25,
                "grid": {"dt": 0.000125},
            }
        )
        path = str(tmp_path / "manifest.json")
        write_manifest(path, cfg, extra={"note": 1})
        assert read_manifest_config(path) == cfg

    def test_empty_curve_writes_header_only(self, tmp_path):
        curve = ImpactCurve(
            times=np.array([0.5]),
            mean_impact=np.array([0.1]),
            stderr=np.array([0.0]),
            overlay=np.array([0.1]),
            readout="posterior_mean_minus_s0",
            replicas=1,
            seed=0,
        )
        # header-only when rows are sliced away upstream
        p = str(tmp_path / "impact.csv")
        write_impact_csv(p, curve)
        lines = open(p).read().splitlines()
        assert lines[0] == "t,mean_impact,stderr,overlay"

        empty = str(tmp_path / "empty.csv")
        atomic_write_text(empty, "t,mean_impact,stderr,overlay\n")
        assert open(empty).read().splitlines() == ["t,mean_impact,stderr,overlay"]

    def test_unwritable_destination_raises_with_path(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("a plain file, not a directory")
        target = str(blocker / "x.csv")
        with pytest.raises(IoError, match="x.csv"):
            atomic_write_text(target, "data\n")

    def test_atomic_no_partial_file(self, tmp_path):
        p = str(tmp_path / "out.txt")
        atomic_write_text(p, "hello\n")
        assert open(p).read() == "hello\n"
        leftovers = [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]
        assert leftovers == []


class TestCli:
    def test_simulate_byte_identical_reruns(self, tmp_path):
        out = str(tmp_path / "sim")
        argv = [
            "simulate", "--seed", "5", "--out", out,
            "--horizon", "0.5", "--T", "0.4",
        ]
        assert main(argv) == 0
        first = (open(out + "/events.csv", "rb").read(), open(out + "/manifest.json", "rb").read())
        assert main(argv) == 0
        second = (open(out + "/events.csv", "rb").read(), open(out + "/manifest.json", "rb").read())
        assert first == second

    def test_impact_byte_identical_reruns(self, tmp_path):
        out = str(tmp_path / "imp")
        argv = [
            "impact", "--seed", "5", "--out", out, "--horizon", "0.4",
            "--T", "0.3", "--replicas", "3", "--grid-n", "401",
            "--output-times", "4",
        ]
        assert main(argv) == 0
        first = open(out + "/impact.csv", "rb").read()
        assert main(argv) == 0
        assert open(out + "/impact.csv", "rb").read() == first

    def test_filter_demo_writes_snapshots_and_sidecars(self, tmp_path):
        out = str(tmp_path / "demo")
        argv = [
            "filter-demo", "--seed", "3", "--out", out,
            "--horizon", "0.2", "--T", "0.1", "--grid-n", "401",
        ]
        assert main(argv) == 0
        side = json.load(open(out + "/density_3.csv.json"))
        assert side["normalized"] is True
        assert side["mass"] == pytest.approx(1.0, abs=1e-9)
        rows = open(out + "/density_3.csv").read().splitlines()
        assert rows[0] == "x,value"
        assert len(rows) == 402

    def test_filter_demo_gaussian_trajectory(self, tmp_path):
        out = str(tmp_path / "gdemo")
        argv = [
            "filter-demo", "--seed", "3", "--out", out, "--filter", "gaussian",
            "--horizon", "0.2", "--T", "0.1",
        ]
        assert main(argv) == 0
        rows = open(out + "/trajectory.csv").read().splitlines()
        assert rows[0] == "t,x_t,sigma_t2,event"
        assert any("meta" in r for r in rows)

    def test_config_error_exit_code(self, tmp_path, capsys):
        assert main(["impact", "--out", str(tmp_path)]) == 2  # missing seed
        assert "seed is mandatory" in capsys.readouterr().err

    def test_events_csv_columns(self, tmp_path):
        out = str(tmp_path / "cols")
        main(["simulate", "--seed", "5", "--out", out, "--horizon", "0.3", "--T", "0.2"])
        header = open(out + "/events.csv").read().splitlines()[0]
        assert header == "time,side,source,bid,ask,efficient_price"

    def test_verify_exit_codes(self, monkeypatch, capsys):
        # the full suite is exercised in test_acceptance; here only the
        # CLI wiring: exit 0 when green, 1 when any criterion fails
        from quotefilter import acceptance as acc

        green = acc.VerifyReport(results=(acc.CheckResult(1, "x", "pass", "0", "1"),))
        red = acc.VerifyReport(results=(acc.CheckResult(1, "x", "fail", "9", "1"),))
        monkeypatch.setattr(acc, "run_verify", lambda cfg: green)
        assert main(["verify"]) == 0
        assert "1 passed, 0 failed" in capsys.readouterr().out
        monkeypatch.setattr(acc, "run_verify", lambda cfg: red)
        assert main(["verify"]) == 1
