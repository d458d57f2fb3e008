import json

import pytest
import yaml

from chemsical.cli import EXIT_CONFIG, EXIT_OK, MANIFEST, main, replay, run_command
from chemsical.config import RunDocument, expand_inputs, load_document
from chemsical.exceptions import ConfigError


def write(tmp_path, doc, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


SMALL_EVAL = {"receiver": {"variant": "always-on"}, "evaluate": {"inputs": [20, 300], "n_traj": 3}}


def test_document_defaults_and_roundtrip(tmp_path):
    doc = RunDocument()
    back = RunDocument.from_dict(yaml.safe_load(doc.to_yaml()))
    assert back.to_dict() == doc.to_dict()
    assert back.tree.to_levels() == [231, [78, 386]]


def test_document_rejects_unknown_keys(tmp_path):
    with pytest.raises(ConfigError):
        RunDocument.from_dict({"colour": 1})
    with pytest.raises(ConfigError):
        RunDocument.from_dict({"evaluate": {"speed": 2}})
    with pytest.raises(ConfigError):
        RunDocument.from_dict({"thresholds": {"levels": [1]}})
    with pytest.raises(ConfigError):
        RunDocument.from_dict({"overlay": {"rates": {"C1": 5.0}}})
    bad = tmp_path / "bad.yaml"
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_document(bad)


def test_overlay_file_accepted_verbatim():
    doc = RunDocument.from_dict({"overlay": {"scheme": "bo", "overlay": {"rates": {"AM2": 0.01}}}})
    assert doc.receiver_config().rates["AM2"] == 0.01


def test_expand_inputs():
    assert expand_inputs("reduced", 2) == [140, 167, 216, 308, 400, 475]
    assert expand_inputs({"start": 0, "stop": 10, "step": 5}, 2) == [0, 5, 10]
    assert len(expand_inputs("full", 2)) == 601
    with pytest.raises(ConfigError):
        expand_inputs("reduced", 3)
    with pytest.raises(ConfigError):
        expand_inputs(3.5, 2)


def test_evaluate_command_and_replay(tmp_path, capsys):
    cfg = write(tmp_path, SMALL_EVAL)
    assert main(["evaluate", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "a")]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert sorted(out["outputs"]) == ["pd_curve.csv", "report.json"]
    manifest = tmp_path / "a" / MANIFEST
    m = replay(manifest, tmp_path / "b")
    for name in m.outputs:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert json.loads(manifest.read_text())["outputs"] == m.outputs


def test_optimize_command_outputs(tmp_path):
    doc = {"receiver": {"variant": "always-on"},
           "optimize": {"budget": 3, "batch_size": 1, "inputs": [20, 300], "rungs": [2, 4], "thresholds": [0.9]}}
    m = run_command("optimize", write(tmp_path, doc), seed=1, out_dir=tmp_path / "o")
    assert {"history.csv", "best_overlay.json", "cost_curve.csv"} <= set(m.outputs)
    best = json.loads((tmp_path / "o" / "best_overlay.json").read_text())
    RunDocument.from_dict({"receiver": {"variant": "always-on"}, "overlay": best})


def test_reset_and_screen_commands(tmp_path):
    doc = {"receiver": {"variant": "always-on", "reset": {"enabled": True}},
           "reset_eval": {"inputs": [300], "n_traj": 2},
           "ode_screen": {"rate_sets": [1], "variants": ["always-on"], "inputs": [20, 300]}}
    path = write(tmp_path, doc)
    m = run_command("reset-eval", path, out_dir=tmp_path / "r")
    summary = json.loads((tmp_path / "r" / "reset_summary.json").read_text())
    assert 0 <= summary["clear_success_fraction"] <= 1
    m = run_command("ode-screen", path, out_dir=tmp_path / "s")
    assert "ode_errors_always-on_set1.csv" in m.outputs


def test_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, {"receiver": {"num_tx": 7}})
    assert main(["evaluate", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["evaluate", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["evaluate", "--n-traj", "0", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["evaluate", "--workers", "0", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["replay", str(tmp_path / "none.json"), "--out", str(tmp_path / "y")]) == EXIT_CONFIG
    noreset = write(tmp_path, {"reset_eval": {"n_traj": 1}}, "nr.yaml")
    assert main(["reset-eval", "--config", str(noreset), "--out", str(tmp_path / "z")]) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        main(["bogus"])
    capsys.readouterr()
