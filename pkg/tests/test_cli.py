import json

from lbdkit import cli
from lbdkit.textprep import PreprocessConfig, get_normalizer


def write_config(tmp_path, snapshot, extra=""):
    path = tmp_path / "run.yaml"
    path.write_text(f"dataset: rs-dfo\nsnapshot: {snapshot}\nthreads: 1\n{extra}", encoding="utf-8")
    return path


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_closed_run_writes_artifacts_and_manifest(tmp_path, toy_snapshot):
    out = tmp_path / "closed"
    assert cli.main(["closed", "--config", str(write_config(tmp_path, toy_snapshot)), "--out", str(out)]) == 0
    recovery = read_json(out / "gold_recovery.json")
    phrase = get_normalizer(PreprocessConfig()).normalize_phrase
    assert recovery["hits"] == sorted([phrase("blood viscosity"), phrase("platelet aggregation")])
    assert recovery["recall"] == 2 / 3
    manifest = read_json(out / "manifest.json")
    assert manifest["status"] == "ok"
    assert manifest["command"] == "closed"
    assert "toy.psv.gz" in manifest["inputs"]
    assert set(manifest["outputs"]) == {"common_terms.psv", "gold_recovery.json", "run.log.jsonl"}
    assert (out / "manifest.txt").exists()
    events = [json.loads(line)["message"] for line in (out / "run.log.jsonl").read_text(encoding="utf-8").splitlines()]
    assert events[0] == "run_start"
    assert "pipeline_complete" in events
    assert not list(tmp_path.glob(".lbdkit-*"))


def test_crossbee_run_reports_auc(tmp_path, toy_snapshot):
    out = tmp_path / "crossbee"
    assert cli.main(["crossbee", "--config", str(write_config(tmp_path, toy_snapshot)), "--out", str(out)]) == 0
    for artifact in ("ranking.psv", "roc.csv", "roc.svg", "heuristics.json"):
        assert (out / artifact).exists()
    metrics = read_json(out / "manifest.json")["metrics"]
    assert 0.0 <= metrics["auc"] <= 1.0
    assert metrics["best_elementary"] in ("freqTerm", "freqDoc", "freqRatio")


def test_ingest_run_exports_vocabulary(tmp_path, toy_snapshot):
    out = tmp_path / "ingest"
    assert cli.main(["ingest", "--config", str(write_config(tmp_path, toy_snapshot)), "--out", str(out)]) == 0
    statistics = read_json(out / "statistics.json")
    assert statistics["docs_a"] == 4 and statistics["docs_c"] == 4
    assert statistics["common_terms"] == 6
    assert (out / "vocabulary.psv").read_text(encoding="utf-8").startswith("term|tf_a|tf_c|df_a|df_c")


def test_rerun_replaces_an_earlier_run(tmp_path, toy_snapshot):
    config = str(write_config(tmp_path, toy_snapshot))
    out = tmp_path / "out"
    assert cli.main(["ingest", "--config", config, "--out", str(out)]) == 0
    assert cli.main(["closed", "--config", config, "--out", str(out)]) == 0
    assert not (out / "vocabulary.psv").exists()
    assert (out / "common_terms.psv").exists()


def test_invalid_config_exits_2_without_output(tmp_path, toy_snapshot):
    out = tmp_path / "out"
    config = write_config(tmp_path, toy_snapshot, "outlier:\n  clusters: 3\n")
    assert cli.main(["outlier", "--config", str(config), "--out", str(out)]) == 2
    assert not out.exists()
    assert cli.main(["closed", "--config", str(write_config(tmp_path, toy_snapshot)), "--seed", "-3", "--out", str(out)]) == 2
    assert not out.exists()


def test_missing_fixture_exits_3_without_output(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["closed", "--config", str(write_config(tmp_path, tmp_path / "absent.psv.gz")), "--out", str(out)]) == 3
    assert not out.exists()


def test_foreign_output_directory_is_refused(tmp_path, toy_snapshot):
    out = tmp_path / "out"
    out.mkdir()
    (out / "notes.txt").write_text("keep me", encoding="utf-8")
    assert cli.main(["closed", "--config", str(write_config(tmp_path, toy_snapshot)), "--out", str(out)]) == 2
    assert (out / "notes.txt").read_text(encoding="utf-8") == "keep me"


def test_failing_run_leaves_only_a_failed_manifest(tmp_path, toy_snapshot):
    out = tmp_path / "out"
    config = write_config(tmp_path, toy_snapshot)
    assert cli.main(["crossbee", "--config", str(config), "--dataset", "aut-can", "--out", str(out)]) == 1
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]
    manifest = read_json(out / "manifest.json")
    assert manifest["status"] == "failed"
    assert manifest["error"]["type"] == "EmptyGoldError"
    assert not list(tmp_path.glob(".lbdkit-*"))


def test_validate_subcommand(tmp_path, toy_snapshot, capsys):
    config = str(write_config(tmp_path, toy_snapshot))
    assert cli.main(["validate", "--config", config, "--pipeline", "closed"]) == 0
    assert "ok" in capsys.readouterr().out
    assert cli.main(["validate", "--config", config, "--pipeline", "linkpred", "--json"]) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload["ok"] is False
    assert [f["field"] for f in payload["findings"]] == ["linkpred.references"]


def test_environment_overrides_config_file(tmp_path, toy_snapshot, monkeypatch):
    monkeypatch.setenv("LBDKIT_SEED", "11")
    out = tmp_path / "out"
    assert cli.main(["closed", "--config", str(write_config(tmp_path, toy_snapshot)), "--out", str(out)]) == 0
    assert read_json(out / "manifest.json")["seed"] == 11


def test_no_command_prints_help(capsys):
    assert cli.main([]) == 1
    assert "usage" in capsys.readouterr().out
