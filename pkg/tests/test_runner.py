import csv
import json

import pytest

from hedgehog_lab import cli
from hedgehog_lab.errors import ConfigError, LabError, PartialRunError
from hedgehog_lab.runner import (
    PARAMS,
    STATUSES,
    canonical_json,
    config_hash,
    overall_status,
    output_root,
    run,
    suite,
    validate_config,
)

CF = {"kind": "cf", "params": {"alpha": "golden", "count": 20}}
GATED = {"kind": "dy-verify", "params": {"levels": [2], "samples": 3, "tol": "1e-9"}}


def files(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "manifest.json"}


def test_validation_paths():
    with pytest.raises(ConfigError) as info:
        validate_config({"kind": "cf", "params": {"count": 0}})
    assert info.value.path == "$.params.count"
    with pytest.raises(ConfigError) as info:
        validate_config({"kind": "circle", "params": {"checks": ["comb", "bogus"]}})
    assert info.value.path == "$.params.checks[1]"
    with pytest.raises(ConfigError) as info:
        validate_config({"kind": "cf", "params": {"colour": 1}})
    assert info.value.path.startswith("$.params")
    with pytest.raises(ConfigError):
        validate_config({"kind": "sweep"})
    with pytest.raises(ConfigError):
        validate_config([1, 2])


def test_defaults_filled_and_hash_canonical():
    a = validate_config({"kind": "cf"})
    b = validate_config({"params": {"brjuno": 10, "alpha": "golden"}, "kind": "cf", "seed": 0})
    assert a == b and config_hash(a) == config_hash(b)
    assert set(a["params"]) == set(PARAMS["cf"])
    assert canonical_json({"b": 1, "a": [1.5, "x"]}) == '{"a":[1.5,"x"],"b":1}'
    c = validate_config({"kind": "cf", "seed": 1})
    assert config_hash(c) != config_hash(a)


def test_overall_status():
    assert overall_status({}) == "pass"
    assert overall_status(["pass", "warn"]) == "warn"
    assert overall_status(["skipped(gate)", "pass"]) == "pass"
    assert overall_status(["skipped(gate)"]) == "skipped(gate)"
    assert overall_status(["warn", "fail"]) == "fail"
    with pytest.raises(LabError):
        overall_status(["ok"])


def test_cf_manifest(tmp_path):
    m = run(CF, tmp_path)
    csvs = [a for a in m.artifacts if a.endswith(".csv")]
    assert csvs == ["cf.csv"]
    assert m.overall == "pass" and set(m.statuses.values()) <= set(STATUSES)
    run_dir = tmp_path / f"cf-{m.config_hash}"
    assert str(run_dir) == m.path
    on_disk = {p.name for p in run_dir.iterdir()}
    assert on_disk == set(m.artifacts) | {"manifest.json"}
    raw = (run_dir / "cf.csv").read_bytes()
    assert raw.startswith(b"n,a_n,p_n,q_n,signed_error,brjuno_partial,exact_ok\r\n")
    rows = list(csv.DictReader((run_dir / "cf.csv").open(newline="")))
    assert [int(r["q_n"]) for r in rows[:6]] == [1, 1, 2, 3, 5, 8]
    man = json.loads((run_dir / "manifest.json").read_text())
    assert man["config_hash"] == m.config_hash and "started" in man
    assert "started" not in (run_dir / "report.json").read_text()


def test_gate_is_skipped_not_fail(tmp_path):
    m = run(GATED, tmp_path)
    assert set(m.statuses.values()) == {"skipped(gate)"}
    assert m.overall == "skipped(gate)"


def test_replay_byte_identical(tmp_path):
    m1 = run(CF, tmp_path / "a")
    first = files(tmp_path / "a" / f"cf-{m1.config_hash}")
    stored = tmp_path / "cfg.json"
    stored.write_text(json.dumps(json.loads(first["config.json"])))
    m2 = run(json.loads(stored.read_text()), tmp_path / "b")
    assert m2.config_hash == m1.config_hash
    assert files(tmp_path / "b" / f"cf-{m2.config_hash}") == first
    m3 = run(CF, tmp_path / "a")
    assert files(tmp_path / "a" / f"cf-{m3.config_hash}") == first


def test_partial_run_kept(tmp_path):
    cfg = {"kind": "hedgehog", "params": {"coeffs": ["50"], "resolution": 16, "N": 10}}
    with pytest.raises(PartialRunError) as info:
        run(cfg, tmp_path)
    partial = tmp_path / f"hedgehog-{config_hash(validate_config(cfg))}.partial"
    assert info.value.path == str(partial)
    assert (partial / "config.json").exists()
    assert not any(p.name.startswith(".") for p in tmp_path.iterdir())


def test_suite_empty_and_missing(tmp_path):
    agg, code = suite([], tmp_path)
    assert code == 0 and agg["count"] == 0 and agg["runs"] == []
    agg, code = suite([CF, str(tmp_path / "nope.json")], tmp_path)
    assert code == 1 and agg["failed"] == 1
    assert "not found" in agg["runs"][1]["reason"]


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("HEDGEHOG_LAB_OUT", str(tmp_path / "env"))
    assert output_root() == tmp_path / "env"
    assert output_root(tmp_path / "x") == tmp_path / "x"
    m = run(CF)
    assert m.path.startswith(str(tmp_path / "env"))


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path)
    assert cli.main(["cf", "--count", "12", "--out", out]) == 0
    assert cli.main(["holonomy", "--alpha", "0.25", "--tol", "1e-6", "--out", out]) == 1
    assert cli.main(["cf", "--count", "0", "--out", out]) == 2
    assert cli.main(["hedgehog", "--coeffs", "50", "--resolution", "16", "--N", "10",
                     "--out", out]) == 1
    assert cli.main(["dy-verify", "--level", "2", "--samples", "3", "--tol", "1e-9",
                     "--out", out]) == 0
    err = capsys.readouterr().err
    assert "$.params.count" in err
    with pytest.raises(SystemExit) as info:
        cli.main(["nonsense"])
    assert info.value.code == 2


def test_cli_config_overrides_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "cf", "params": {"count": 5}}))
    assert cli.main(["cf", "--count", "30", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    h = config_hash(validate_config({"kind": "cf", "params": {"count": 5}}))
    assert (tmp_path / f"cf-{h}").is_dir()


def test_cli_suite(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(CF))
    assert cli.main(["suite", str(cfg), "--out", str(tmp_path)]) == 0
    agg = json.loads((tmp_path / "suite.json").read_text())
    assert agg["count"] == 1 and agg["overall"] == "pass"
    assert cli.main(["suite", "--out", str(tmp_path)]) == 0
    assert cli.main(["suite", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
