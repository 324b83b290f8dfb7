from pathlib import Path

import pytest

from lbdkit.config import (
    FINDING_FIELD,
    FINDING_MISSING_FILE,
    FINDING_UNKNOWN_KEY,
    PipelineConfig,
    env_overrides,
    validate,
)
from lbdkit.errors import ConfigError
from lbdkit.textprep import TITLE_AND_ABSTRACT


def write_yaml(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults():
    config = PipelineConfig.resolve(environ={})
    assert config.pipeline == "closed"
    assert config.dataset == "rs-dfo"
    assert config.seed == 42
    assert config.threads >= 1
    assert config.preprocess.ngram_max == 2


def test_registry_preprocess_settings_apply_per_dataset():
    config = PipelineConfig.resolve(environ={}, overrides={"dataset": "aut-can"})
    assert config.preprocess.fields_used == TITLE_AND_ABSTRACT


def test_precedence_file_then_env_then_overrides(tmp_path):
    path = write_yaml(tmp_path / "run.yaml", "seed: 1\nthreads: 2\noutlier:\n  k: 3\n  min_df: 4\n")
    config = PipelineConfig.resolve(path, environ={"LBDKIT_SEED": "7", "LBDKIT_OUTLIER__K": "5"}, overrides={"threads": 8})
    assert config.seed == 7
    assert config.threads == 8
    assert config.outlier.k == 5
    assert config.outlier.min_df == 4
    assert config.source == str(path)


def test_none_overrides_leave_lower_layers_alone(tmp_path):
    path = write_yaml(tmp_path / "run.yaml", "seed: 3\n")
    config = PipelineConfig.resolve(path, environ={}, overrides={"seed": None, "dataset": None})
    assert config.seed == 3


def test_env_layer_parsing():
    layer = env_overrides({"LBDKIT_SEED": "7", "LBDKIT_CROSSBEE__HEURISTICS": "freqDoc,freqRatio", "HOME": "/root"})
    assert layer == {"seed": "7", "crossbee": {"heuristics": "freqDoc,freqRatio"}}
    config = PipelineConfig.resolve(environ={"LBDKIT_CROSSBEE__HEURISTICS": "freqDoc,freqRatio", "LBDKIT_CLOSED__EXCLUDE_SHARED": "no"})
    assert config.crossbee.heuristics == ["freqDoc", "freqRatio"]
    assert config.closed.exclude_shared is False


def test_unknown_keys_and_bad_values_are_reported(tmp_path):
    path = write_yaml(tmp_path / "run.yaml", "sed: 1\nseed: many\noutlier:\n  kk: 2\nopen: [1, 2]\n")
    config = PipelineConfig.resolve(path, environ={})
    assert config.unknown_keys == ["sed", "outlier.kk"]
    assert any(error.startswith("seed:") for error in config.errors)
    assert any(error.startswith("open:") for error in config.errors)
    report = validate(config)
    assert {f.field for f in report.of_kind(FINDING_UNKNOWN_KEY)} == {"sed", "outlier.kk"}
    assert not report.ok


def test_invalid_yaml_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.resolve(write_yaml(tmp_path / "bad.yaml", "seed: [1\n"), environ={})
    with pytest.raises(ConfigError):
        PipelineConfig.resolve(write_yaml(tmp_path / "list.yaml", "- 1\n- 2\n"), environ={})
    with pytest.raises(ConfigError):
        PipelineConfig.resolve(tmp_path / "absent.yaml", environ={})


def test_validate_reports_missing_inputs(tmp_path):
    config = PipelineConfig.resolve(environ={}, overrides={"pipeline": "linkpred", "data_dir": str(tmp_path)})
    report = validate(config)
    missing = {f.field for f in report.of_kind(FINDING_MISSING_FILE)}
    assert missing == {"snapshot", "linkpred.references"}


def test_validate_reports_bad_fields(tmp_path, toy_snapshot):
    config = PipelineConfig.resolve(
        environ={},
        overrides={"pipeline": "crossbee", "snapshot": str(toy_snapshot), "seed": -1, "threads": 0},
    )
    config.crossbee.heuristics = ["freqDoc", "oracle"]
    config.crossbee.weights = [1.0]
    fields = {f.field for f in validate(config).of_kind(FINDING_FIELD)}
    assert fields == {"seed", "threads", "crossbee.heuristics", "crossbee.weights"}


def test_unknown_dataset_and_pipeline():
    config = PipelineConfig.resolve(environ={}, overrides={"dataset": "nope", "pipeline": "everything"})
    fields = {f.field for f in validate(config).findings}
    assert {"dataset", "pipeline"} <= fields


def test_valid_closed_config(toy_snapshot):
    config = PipelineConfig.resolve(environ={}, overrides={"snapshot": str(toy_snapshot)})
    assert validate(config).ok


def test_config_hash_ignores_output_location_and_threads():
    first = PipelineConfig.resolve(environ={}, overrides={"out_dir": "a", "threads": 1})
    second = PipelineConfig.resolve(environ={}, overrides={"out_dir": "b", "threads": 4})
    third = PipelineConfig.resolve(environ={}, overrides={"seed": 9})
    assert first.config_hash() == second.config_hash()
    assert first.config_hash() != third.config_hash()


def test_derived_paths(tmp_path):
    config = PipelineConfig.resolve(environ={}, overrides={"dataset": "mig-mg", "data_dir": str(tmp_path)})
    assert config.snapshot_path() == tmp_path / "swanson_1988.psv.gz"
    assert config.snapshot_dir("open") == tmp_path / "mig-mg" / "second_level"
    assert config.snapshot_dir("rajolink") == tmp_path / "mig-mg" / "rare_terms"
    assert config.choices_path("open").name == "mig-mg.b_concepts.txt"
    assert config.references_path() == tmp_path / "mig-mg.references.psv.gz"
    assert Path(config.gold_path()).name == "mig-mg.gold.txt"
