import json
import os

import pytest
import yaml

import driftlab
from driftlab.cli import ConfigError, main, parse_config


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


CLASSIFY_CL3 = """\
command: classify
field:
  family: critical_lamperti
  c: 3.0
"""

SIMULATE_SMALL = """\
command: simulate
seed: 9
jumps:
  up: {family: exponential_mean1}
  down: {family: exponential_mean1}
simulate:
  horizon: 50.0
"""


class TestParseConfig:
    def test_minimal_classify_resolves_defaults(self):
        rc = parse_config("command: classify\n")
        assert rc.command == "classify"
        assert rc.seed == 0
        assert rc.strict is False
        assert rc.workers == 0
        assert rc.output_path is None
        assert rc.output_format == "json"
        eff = rc.effective
        assert eff["classify"] == {"mode": "theorem1", "x0": 2.0, "x_max": 1e4, "grid": 512}
        assert eff["field"]["family"] == "zero"
        assert eff["jumps"] == {"up": {"family": "constant1"}, "down": {"family": "constant1"}}

    def test_effective_config_round_trips(self):
        rc = parse_config(CLASSIFY_CL3)
        again = parse_config(yaml.safe_dump(rc.effective))
        assert again.effective == rc.effective

    def test_unknown_keys_are_named_with_their_path(self):
        with pytest.raises(ConfigError, match=r"config: unknown key\(s\): bogus"):
            parse_config("command: classify\nbogus: 1\n")
        with pytest.raises(ConfigError, match=r"field: unknown key\(s\): zap"):
            parse_config("command: classify\nfield: {zap: 1}\n")
        with pytest.raises(ConfigError, match=r"classify: unknown key\(s\): foo"):
            parse_config("command: classify\nclassify: {foo: 1}\n")

    def test_unknown_command(self):
        with pytest.raises(ConfigError, match="command"):
            parse_config("command: frobnicate\n")

    def test_missing_command(self):
        with pytest.raises(ConfigError, match="command: required"):
            parse_config("seed: 1\n")

    def test_type_errors_carry_the_key(self):
        with pytest.raises(ConfigError, match="seed: expected an integer"):
            parse_config("command: classify\nseed: abc\n")
        with pytest.raises(ConfigError, match="strict: expected a boolean"):
            parse_config("command: classify\nstrict: 1\n")

    def test_scientific_notation_needs_a_signed_exponent(self):
        # the YAML 1.1 resolver wants 1.0e+4; bare 1e4 and 1.0e4 are strings
        with pytest.raises(ConfigError, match="x_max: expected a number"):
            parse_config("command: classify\nclassify: {x_max: 1e4}\n")
        with pytest.raises(ConfigError, match="x_max: expected a number"):
            parse_config("command: classify\nclassify: {x_max: 1.0e4}\n")
        rc = parse_config("command: classify\nclassify: {x_max: 1.0e+4}\n")
        assert rc.params["x_max"] == 1e4

    def test_mv_critical_requires_its_parameters(self):
        with pytest.raises(ConfigError, match="mv_critical requires rho and beta"):
            parse_config("command: classify\nclassify: {mode: mv_critical}\n")
        rc = parse_config(
            "command: classify\nclassify: {mode: mv_critical, rho: 0.5, beta: 0.25}\n"
        )
        assert rc.params["rho"] == 0.5

    def test_csv_rejected_for_record_commands(self):
        with pytest.raises(ConfigError, match="csv is not available"):
            parse_config("command: classify\noutput: {format: csv}\n")
        with pytest.raises(ConfigError, match="csv is not available"):
            parse_config("command: check\ncheck: {kind: wald}\noutput: {format: csv}\n")

    def test_non_mapping_root_rejected(self):
        with pytest.raises(ConfigError, match="expected a mapping"):
            parse_config("- 1\n- 2\n")

    def test_invalid_yaml(self):
        with pytest.raises(ConfigError, match="invalid YAML"):
            parse_config("command: [unclosed\n")

    def test_field_parameter_errors_are_config_errors(self):
        with pytest.raises(ConfigError, match="field"):
            parse_config("command: classify\nfield: {family: critical_lamperti, c: -1.0}\n")

    def test_bd_oracle_window_rules(self):
        with pytest.raises(ConfigError, match="n_min"):
            parse_config("command: bd-oracle\nbd-oracle: {n_min: 20, n_max: 10}\n")
        with pytest.raises(ConfigError, match="source is 'ratio'"):
            parse_config("command: bd-oracle\nbd-oracle: {source: ratio}\n")
        with pytest.raises(ConfigError, match="span both tails"):
            parse_config("command: bd-oracle\nbd-oracle: {bilateral: true, n_min: 2}\n")

    def test_seed_precedence_env_and_config(self, monkeypatch):
        monkeypatch.delenv("DRIFTLAB_SEED", raising=False)
        assert parse_config("command: classify\n").seed == 0
        monkeypatch.setenv("DRIFTLAB_SEED", "77")
        assert parse_config("command: classify\n").seed == 77
        assert parse_config("command: classify\nseed: 5\n").seed == 5

    def test_garbage_env_seed_is_a_config_error(self, monkeypatch):
        monkeypatch.setenv("DRIFTLAB_SEED", "not-a-number")
        with pytest.raises(ConfigError, match="DRIFTLAB_SEED"):
            parse_config("command: classify\n")


class TestMainClassify:
    def test_summary_line_and_exit_code(self, tmp_path, capsys):
        cfg = write(tmp_path, CLASSIFY_CL3)
        assert main([cfg]) == 0
        out = capsys.readouterr().out
        assert out == "verdict=Transient c_estimate=3.000 method=theorem1 window=[2,10000]\n"

    def test_json_record_embeds_config_and_version(self, tmp_path):
        cfg = write(tmp_path, CLASSIFY_CL3)
        out = tmp_path / "res.json"
        assert main([cfg, "--out", str(out)]) == 0
        rec = json.loads(out.read_text())
        assert rec["tool"] == "driftlab"
        assert rec["version"] == driftlab.__version__
        assert rec["command"] == "classify"
        assert rec["result"]["verdict"] == "Transient"
        assert rec["result"]["c_estimate"] == pytest.approx(3.0, rel=1e-12)
        assert rec["config"]["classify"]["grid"] == 512
        assert rec["config"]["field"]["c"] == 3.0

    def test_strict_inconclusive_exits_one(self, tmp_path, capsys):
        cfg = write(
            tmp_path, "command: classify\nfield: {family: critical_lamperti, c: 1.0}\n"
        )
        assert main([cfg]) == 0
        assert main([cfg, "--strict"]) == 1
        assert "verdict=Inconclusive" in capsys.readouterr().out

    def test_set_overrides_apply_before_validation(self, tmp_path, capsys):
        cfg = write(tmp_path, "command: classify\n")
        code = main(
            [
                cfg,
                "--set", "field.family=critical_lamperti",
                "--set", "field.c=3.0",
                "--set", "classify.grid=256",
            ]
        )
        assert code == 0
        assert "verdict=Transient" in capsys.readouterr().out

    def test_malformed_set_is_usage_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "command: classify\n")
        assert main([cfg, "--set", "no-equals-here"]) == 2
        assert "config error" in capsys.readouterr().err


class TestMainErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        assert main([str(tmp_path / "nope.yaml")]) == 3
        assert "cannot read config" in capsys.readouterr().err

    def test_invalid_yaml_file(self, tmp_path, capsys):
        cfg = write(tmp_path, "command: [unclosed\n")
        assert main([cfg]) == 2
        assert "invalid YAML" in capsys.readouterr().err

    def test_non_mapping_root(self, tmp_path, capsys):
        cfg = write(tmp_path, "- a\n- b\n")
        assert main([cfg]) == 2
        assert "must be a mapping" in capsys.readouterr().err

    def test_unknown_command_in_config(self, tmp_path, capsys):
        cfg = write(tmp_path, "command: mystery\n")
        assert main([cfg]) == 2
        assert "config error" in capsys.readouterr().err

    def test_unknown_flag(self, tmp_path, capsys):
        cfg = write(tmp_path, "command: classify\n")
        with pytest.MonkeyPatch.context():
            assert main([cfg, "--frobnicate"]) == 2

    def test_unwritable_output_path(self, tmp_path, capsys):
        cfg = write(tmp_path, CLASSIFY_CL3)
        missing = tmp_path / "no" / "such" / "dir" / "out.json"
        assert main([cfg, "--out", str(missing)]) == 3
        assert "cannot write output" in capsys.readouterr().err

    def test_version_flag(self, capsys):
        assert main(["--version"]) == 0
        assert "driftlab" in capsys.readouterr().out


class TestMainSimulate:
    def test_csv_default_and_determinism(self, tmp_path, capsys):
        cfg = write(tmp_path, SIMULATE_SMALL)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main([cfg, "--out", str(a)]) == 0
        assert main([cfg, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        text = a.read_text()
        assert text.startswith("tau,signed_jump,z_after\n")
        out = capsys.readouterr().out
        assert "seed=9" in out
        assert "events=" in out

    def test_seed_flag_changes_the_path(self, tmp_path):
        cfg = write(tmp_path, SIMULATE_SMALL)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main([cfg, "--out", str(a)]) == 0
        assert main([cfg, "--seed", "10", "--out", str(b)]) == 0
        assert a.read_bytes() != b.read_bytes()

    def test_env_seed_matches_explicit_config(self, tmp_path, monkeypatch):
        no_seed = SIMULATE_SMALL.replace("seed: 9\n", "")
        cfg_env = write(tmp_path, no_seed, "env.yaml")
        cfg_fix = write(tmp_path, no_seed + "seed: 321\n", "fix.yaml")
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        monkeypatch.setenv("DRIFTLAB_SEED", "321")
        assert main([cfg_env, "--out", str(a)]) == 0
        monkeypatch.delenv("DRIFTLAB_SEED")
        assert main([cfg_fix, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_json_format_carries_the_arrays(self, tmp_path):
        cfg = write(tmp_path, SIMULATE_SMALL)
        out = tmp_path / "traj.json"
        assert main([cfg, "--format", "json", "--out", str(out)]) == 0
        rec = json.loads(out.read_text())
        assert rec["result"]["n_events"] == len(rec["result"]["times"])
        assert rec["config"]["output"]["format"] == "json"

    def test_no_stray_tempfiles(self, tmp_path):
        cfg = write(tmp_path, SIMULATE_SMALL)
        out = tmp_path / "a.csv"
        assert main([cfg, "--out", str(out)]) == 0
        leftovers = [n for n in os.listdir(tmp_path) if n.startswith(".driftlab-")]
        assert leftovers == []


EXPERIMENT_SMALL = """\
command: experiment
seed: 11
jumps:
  up: {family: exponential_mean1}
  down: {family: exponential_mean1}
experiment:
  n_paths: 25
  horizon: 40.0
  level: 3.0
  band: 1.0
"""


class TestMainExperiment:
    def test_csv_output_is_byte_identical_across_runs(self, tmp_path):
        cfg = write(tmp_path, EXPERIMENT_SMALL)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main([cfg, "--out", str(a)]) == 0
        assert main([cfg, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().startswith("path,seed,reached_L,first_hit_time,returned,final_z\n")

    def test_json_report_round_trips(self, tmp_path, capsys):
        # the record embeds the effective config, so byte-identity needs
        # the same output path on both runs
        cfg = write(tmp_path, EXPERIMENT_SMALL)
        a = tmp_path / "a.json"
        assert main([cfg, "--format", "json", "--out", str(a)]) == 0
        first = a.read_bytes()
        assert main([cfg, "--format", "json", "--out", str(a)]) == 0
        assert a.read_bytes() == first
        rec = json.loads(a.read_text())
        assert rec["result"]["proxy"] == "band-return"
        assert 0.0 <= rec["result"]["returned_fraction"] <= 1.0
        out = capsys.readouterr().out
        assert "returned=" in out


BD_RATIO = """\
command: bd-oracle
bd-oracle:
  source: ratio
  c: 2.0
  n_min: 2
  n_max: 2000
  tail_extension: 98000
"""


class TestMainBdOracle:
    def test_ratio_family_is_transient_under_both_criteria(self, tmp_path, capsys):
        cfg = write(tmp_path, BD_RATIO)
        out = tmp_path / "bd.json"
        assert main([cfg, "--out", str(out)]) == 0
        rec = json.loads(out.read_text())
        assert rec["result"]["ratio"]["verdict"] == "Transient"
        assert rec["result"]["series"]["verdict"] == "Transient"
        assert rec["result"]["chain_window"] == [2, 2000]
        summary = capsys.readouterr().out.strip()
        assert "ratio=Transient(2.000)" in summary
        assert "series=Transient(" in summary

    def test_strict_flags_inconclusive_chains(self, tmp_path):
        cfg = write(
            tmp_path,
            "command: bd-oracle\n"
            "bd-oracle: {source: ratio, c: 1.03, n_max: 500, criterion: ratio}\n",
        )
        assert main([cfg]) == 0
        assert main([cfg, "--strict"]) == 1

    def test_chain_csv_dump(self, tmp_path):
        cfg = write(
            tmp_path,
            "command: bd-oracle\n"
            "bd-oracle: {source: ratio, c: 2.0, n_max: 50, criterion: ratio}\n",
        )
        out = tmp_path / "chain.csv"
        assert main([cfg, "--format", "csv", "--out", str(out)]) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "n,lambda_star,mu_star"
        assert len(lines) == 50
        n, lam, mu = lines[1].split(",")
        assert n == "2"
        assert float(lam) + float(mu) == pytest.approx(1.0, rel=1e-12)

    def test_discretized_field_source(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "command: bd-oracle\n"
            "field: {family: critical_lamperti, c: 3.0}\n"
            "bd-oracle: {n_min: 3, n_max: 2000, criterion: ratio}\n",
        )
        assert main([cfg]) == 0
        assert "ratio=Transient(" in capsys.readouterr().out

    def test_saturated_window_is_reported_as_config_error(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "command: bd-oracle\n"
            "field: {family: critical_lamperti, c: 3.0}\n"
            "bd-oracle: {n_min: 2, n_max: 100, quadrature_points: 1, criterion: ratio}\n",
        )
        assert main([cfg]) == 2
        assert "non-positive at cell" in capsys.readouterr().err


class TestMainCheck:
    def test_wald(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "command: check\ncheck: {kind: wald, sigma: 1.0, n_paths: 300}\n",
        )
        out = tmp_path / "wald.json"
        assert main([cfg, "--out", str(out)]) == 0
        rec = json.loads(out.read_text())
        assert rec["result"]["kind"] == "wald"
        assert rec["result"]["passed"] is True
        assert rec["result"]["bound"] == 2.0
        assert capsys.readouterr().out.startswith("wald empirical=")

    def test_martingale(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "command: check\n"
            "check: {kind: martingale, rate: 0.5, tau: 4.0, horizon: 6.0, n_paths: 200}\n",
        )
        out = tmp_path / "mart.json"
        assert main([cfg, "--out", str(out)]) == 0
        rec = json.loads(out.read_text())
        assert rec["result"]["literal"]["within_3se"] is True
        assert rec["result"]["ensemble"]["within_3se"] is True
        assert "martingale literal=" in capsys.readouterr().out

    def test_balance(self, tmp_path, capsys):
        cfg = write(
            tmp_path,
            "command: check\n"
            "field: {family: mean_reverting, kappa: 0.2}\n"
            "jumps: {up: {family: exponential_mean1}, down: {family: exponential_mean1}}\n"
            "check: {kind: balance, total_time: 2000.0, window_min: -6, window_max: 6}\n",
        )
        out = tmp_path / "bal.json"
        assert main([cfg, "--strict", "--out", str(out)]) == 0
        rec = json.loads(out.read_text())
        assert rec["result"]["exact_l1"] < 1e-10
        assert rec["result"]["l1"] >= 0.0
        assert "balance l1=" in capsys.readouterr().out

    def test_check_validation(self):
        with pytest.raises(ConfigError, match="check.horizon"):
            parse_config(
                "command: check\ncheck: {kind: martingale, tau: 10.0, horizon: 5.0}\n"
            )
        with pytest.raises(ConfigError, match="at least 3 cells"):
            parse_config(
                "command: check\ncheck: {kind: balance, window_min: 0, window_max: 1}\n"
            )
