from __future__ import annotations

import json
from dataclasses import asdict

import pytest

from fracshe.cli import run
from fracshe.config import ConfigError, ExperimentConfig, from_mapping, parse_config

SMALL = ["--levels", "4,8,16", "--ref-n", "32", "--K", "10", "--samples", "6", "--batch", "2", "--T", "0.1"]


def test_parse_empty_file_with_flags(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    cfg = parse_config(path, {"alpha": "1.7", "levels": "8,16", "seed": "3"})
    assert cfg.alpha == 1.7 and cfg.levels == [8, 16] and cfg.seed == 3


def test_flags_override_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"alpha": 1.2, "samples": 10}))
    cfg = parse_config(path, {"alpha": "1.8", "samples": None})
    assert cfg.alpha == 1.8 and cfg.samples == 10


def test_unknown_key_named(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"alhpa": 1.5}))
    with pytest.raises(ConfigError, match="alhpa"):
        parse_config(path)


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        from_mapping({"samples": 2.5})
    with pytest.raises(ConfigError):
        from_mapping({"dt_control": "maybe"})
    with pytest.raises(ConfigError):
        from_mapping({"alpha": None})


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(alpha=1.3, levels=[8, 32], n_ref=64, K=77, g="tanh-scaled", frozen_diffusion=True)
    path = tmp_path / "c.json"
    path.write_text(cfg.dumps())
    assert parse_config(path) == cfg
    assert from_mapping(asdict(cfg)) == cfg


def test_default_steps_rule():
    cfg = ExperimentConfig(alpha=1.5, levels=[8, 16], T=0.5)
    assert cfg.steps == 182  # dt = T * 8**-1.5 / 8
    assert ExperimentConfig(K=5).steps == 5
    assert ExperimentConfig(levels=[8, 16]).reference_level == 64


def test_eigens_command(capsys):
    assert run(["eigens", "--n", "4"]) == 0
    out, err = capsys.readouterr()
    rows = [line.split(",") for line in out.splitlines()]
    assert rows[0] == ["j", "lambda_jn"]
    assert float(rows[1][1]) == pytest.approx(9.37258, abs=1e-5)
    assert float(rows[2][1]) == pytest.approx(32.0)
    assert float(rows[3][1]) == pytest.approx(54.62742, abs=1e-5)
    assert "seed=7" in err


def test_lemma_check_command(capsys, tmp_path):
    out_json = tmp_path / "lemma.json"
    assert run(["lemma-check", "--alpha", "1.5", "--delta", "0", "--gamma", "1", "--json-out", str(out_json)]) == 0
    rows = json.loads(out_json.read_text())["rows"]
    assert rows and all(r["head_ratio"] < float("inf") and r["tail_ratio"] < float("inf") for r in rows)


@pytest.mark.parametrize("argv", [
    ["operator", "--n", "5", "--alpha", "1.5"],
    ["green", "--alpha", "1.5", "--t", "0.1", "--continuous"],
    ["green", "--alpha", "2", "--n", "8", "--x", "0.5", "--y", "0.25,0.5"],
    ["gap", "--alpha", "1.5", "--delta", "0.5", "--levels", "4,8,16"],
    ["det-rate", "--levels", "8,16,32", "--u0-modes", "256"],
    ["gruenwald", "--levels", "64,256,1024"],
])
def test_other_commands(argv, capsys):
    assert run(argv) == 0
    out, _ = capsys.readouterr()
    assert out.strip()


def test_strong_rate_report_files(tmp_path, capsys):
    js, cs = tmp_path / "r.json", tmp_path / "r.csv"
    prefix = tmp_path / "path"
    assert run(["strong-rate", *SMALL, "--json-out", str(js), "--csv-out", str(cs), "--dump-paths", str(prefix)]) == 0
    _, err = capsys.readouterr()
    assert "seed=7" in err and "warning" in err
    report = json.loads(js.read_text())
    assert report["theoretical"]["hypotheses_met"] is False
    assert cs.read_text().splitlines()[0] == "n,error,stderr,samples"
    assert (tmp_path / "path_ref.csv").read_text().startswith("t,c1,")
    assert (tmp_path / "path_n8.csv").read_text().startswith("t,u1,")


def test_strong_rate_bitwise_across_threads(tmp_path):
    outs = []
    for threads in ("1", "2", "4"):
        path = tmp_path / f"r{threads}.json"
        assert run(["strong-rate", *SMALL, "--threads", threads, "--json-out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_report_regenerates_from_echoed_config(tmp_path):
    first = tmp_path / "a.json"
    assert run(["strong-rate", *SMALL, "--json-out", str(first)]) == 0
    echoed = json.loads(first.read_text())["config"]
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(echoed))
    second = tmp_path / "b.json"
    assert run(["strong-rate", "--config", str(cfg_path), "--json-out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run(["eigens", "--alhpa", "1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run(["nonsense"])
    assert exc.value.code == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"alhpa": 1}')
    with pytest.raises(SystemExit) as exc:
        run(["eigens", "--config", str(bad)])
    assert exc.value.code == 2
    assert "alhpa" in capsys.readouterr().err


def test_runtime_error_is_nonzero_without_partial_output(tmp_path, capsys):
    out = tmp_path / "never.json"
    assert run(["gap", "--delta", "9", "--json-out", str(out)]) == 1
    assert not out.exists()
    assert "error" in capsys.readouterr().err
