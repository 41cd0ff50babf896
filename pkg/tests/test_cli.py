from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from birtcombine.cli import main

ROOT = Path(__file__).resolve().parents[1]
SCHEMA = json.loads((ROOT / "docs" / "config.schema.json").read_text())


@pytest.mark.parametrize("name", ["experiment.json", "corpus_experiment.json"])
def test_example_configs_validate(name):
    jsonschema.validate(json.loads((ROOT / "docs" / "examples" / name).read_text()), SCHEMA)


@pytest.mark.parametrize("bad", [
    {"features": "f.csv", "folds": 1},
    {"features": "f.csv", "corpus": "c.jsonl"},
    {"features": "f.csv", "roster": {"x": {"kind": "svr"}}},
    {"features": "f.csv", "combine": {"tiebreak": "coin"}},
    {"roster": {}},
])
def test_schema_rejects(bad):
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, SCHEMA)


@pytest.fixture
def corpus(tmp_path):
    cfg = tmp_path / "synth.json"
    cfg.write_text(json.dumps({"models": {"a": {"sd": 15}, "b": {"sd": 25, "bias": {"0": 40}}}}))
    assert main(["synth", "corpus", "--config", str(cfg), "--n", "240", "--seed", "3", "--out", str(tmp_path / "c")]) == 0
    return tmp_path / "c"


def test_end_to_end_commands(tmp_path, corpus, capsys):
    roster = tmp_path / "roster.json"
    roster.write_text(json.dumps({"lin": {"kind": "linear"}, "knn": {"kind": "knn"}}))
    assert main(["train-predict", "--roster", str(roster), "--train", str(corpus / "features.csv"),
                 "--out", str(tmp_path / "tp")]) == 0
    assert (tmp_path / "tp" / "predictions.csv").read_text().startswith("instance_id,lin,knn")
    assert main(["fit-irt", "--predictions", str(corpus / "predictions.csv"), "--gold", str(corpus / "gold.csv"),
                 "--out", str(tmp_path / "irt")]) == 0
    assert main(["combine", "--model", str(tmp_path / "irt" / "combiner.json"),
                 "--predictions", str(corpus / "predictions.csv"), "--out", str(tmp_path / "comb")]) == 0
    lines = (tmp_path / "comb" / "combined.csv").read_text().splitlines()
    assert lines[0] == "instance_id,band,score,rule" and len(lines) == 241
    audit = [json.loads(x) for x in (tmp_path / "comb" / "audit.jsonl").read_text().splitlines()]
    assert len(audit) == 240 and {"intervals", "votes", "rule"} <= set(audit[0])
    capsys.readouterr()
    assert main(["evaluate", "--predictions", str(corpus / "predictions.csv"), "--gold", str(corpus / "gold.csv")]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert set(metrics) == {"a", "b"} and metrics["a"]["qwk"] > 0.8


def test_split_predictions_with_full_gold_and_evaluate_combined(tmp_path, corpus, capsys):
    rows = (corpus / "predictions.csv").read_text().splitlines()
    (tmp_path / "val.csv").write_text("\n".join(rows[:81]) + "\n")
    (tmp_path / "test.csv").write_text("\n".join(rows[:1] + rows[81:]) + "\n")
    gold = str(corpus / "gold.csv")
    assert main(["fit-irt", "--predictions", str(tmp_path / "val.csv"), "--gold", gold, "--out", str(tmp_path)]) == 0
    assert main(["combine", "--model", str(tmp_path / "combiner.json"), "--predictions", str(tmp_path / "test.csv"),
                 "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--predictions", str(tmp_path / "combined.csv"), "--gold", gold]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert list(metrics) == ["combined"] and sum(map(sum, metrics["combined"]["confusion"])) == 160


def test_gold_must_cover_predictions(tmp_path, corpus, capsys):
    lines = (corpus / "gold.csv").read_text().splitlines()
    (tmp_path / "gold.csv").write_text("\n".join(lines[:-1]) + "\n")
    code = main(["evaluate", "--predictions", str(corpus / "predictions.csv"), "--gold", str(tmp_path / "gold.csv")])
    assert code == 2 and "gold file lacks 1 instance ids" in capsys.readouterr().err


def test_roster_from_experiment_config_and_bad_entries(tmp_path, corpus, capsys):
    exp = ROOT / "docs" / "examples" / "experiment.json"
    assert main(["train-predict", "--roster", str(exp), "--train", str(corpus / "features.csv"),
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "predictions.csv").read_text().startswith("instance_id,mean,linear,ridge")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"s": {"kind": "stacked", "members": ["ridge"]}}))
    assert main(["train-predict", "--roster", str(bad), "--train", str(corpus / "features.csv")]) == 2
    assert "must be an object" in capsys.readouterr().err


def test_synth_birt_and_fit(tmp_path):
    assert main(["synth", "birt", "--bands", "6", "--models", "5", "--seed", "2", "--out", str(tmp_path)]) == 0
    assert main(["fit-irt", "--observations", str(tmp_path / "observations.json"), "--out", str(tmp_path)]) == 0
    params = json.loads((tmp_path / "params.json").read_text())
    assert len(params["theta"]) == 5 and params["final_loss"] < 1e-6


def test_run_is_byte_deterministic(tmp_path, corpus):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({
        "features": str(corpus / "features.csv"),
        "imported": [{"path": str(corpus / "predictions.csv"), "note": "synthetic"}],
        "roster": {"lin": {"kind": "linear"}, "tree": {"kind": "cart", "max_depth": 3}},
        "folds": 3, "seed": 4,
    }))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r1"), "--audit"]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r2")]) == 0
    assert (tmp_path / "r1" / "report.json").read_bytes() == (tmp_path / "r2" / "report.json").read_bytes()
    assert (tmp_path / "r1" / "audit.jsonl").exists()
    assert "irt[all]" in (tmp_path / "r1" / "report.txt").read_text()


def test_featurize(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "a", "text": "Uma frase. Outra frase porque sim.", "score": 2}\n'
                 '{"id": "b", "text": "Texto.", "score": 4}\n')
    assert main(["featurize", "--corpus", str(p), "--out", str(tmp_path / "f")]) == 0
    header = (tmp_path / "f" / "features.csv").read_text().splitlines()[0].split(",")
    assert header[0] == "instance_id" and header[-1] == "score"
    flags = json.loads((tmp_path / "f" / "registry.json").read_text())["flags"]
    assert flags == {"a": ["single_paragraph"], "b": ["single_sentence", "single_paragraph"]}


def test_exit_code_input_error(tmp_path, capsys):
    assert main(["evaluate", "--predictions", str(tmp_path / "nope.csv"), "--gold", str(tmp_path / "g.csv")]) == 2
    assert "error" in capsys.readouterr().err
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "text": "  ", "score": 1}\n')
    assert main(["featurize", "--corpus", str(bad), "--out", str(tmp_path)]) == 2
    one_band = tmp_path / "f.csv"
    one_band.write_text("instance_id,x,score\n" + "".join(f"r{i},{i},120\n" for i in range(20)))
    cfg = tmp_path / "e.json"
    cfg.write_text(json.dumps({"features": str(one_band), "roster": {"l": {"kind": "linear"}}, "folds": 2}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_exit_code_numeric_error(tmp_path, monkeypatch):
    import birtcombine.birt as birt

    assert main(["synth", "birt", "--seed", "1", "--out", str(tmp_path)]) == 0
    monkeypatch.setattr(birt.kernels, "descend", lambda t, d, s, w, *rest: (t, d, s, w, 1.0, 1.0, 3, 3))
    assert main(["fit-irt", "--observations", str(tmp_path / "observations.json"), "--out", str(tmp_path)]) == 3


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "birtcombine", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "train-predict" in out.stdout
