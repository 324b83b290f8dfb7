from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml

from lbdkit.corpus import GOLD_DATASETS, GOLD_DIR, RESOURCE_DIR, DatasetEntry, get_dataset
from lbdkit.crossbee import DEFAULT_HEURISTICS, HEURISTICS
from lbdkit.errors import ConfigError
from lbdkit.linkpred import DEFAULT_TEST_SIZE, MEASURES
from lbdkit.open_concept import DEFAULT_A_TYPES, DEFAULT_B_TYPES, SEMANTIC_TYPES_PATH
from lbdkit.outlier import DEFAULT_K, DEFAULT_MIN_DF, SPACE_PCA2, SPACES
from lbdkit.rajolink import RA_TYPES
from lbdkit.textprep import TITLE_ONLY, PreprocessConfig, default_stopwords, load_stopwords

PIPELINES = ("ingest", "closed", "open", "crossbee", "outlier", "rajolink", "linkpred")
ENV_PREFIX = "LBDKIT_"
CHOICES_DIR = RESOURCE_DIR / "choices"

# Fields that never change a run's results.
UNHASHED_FIELDS = ("out_dir", "threads", "interactive", "unknown_keys", "errors", "source")


def default_threads() -> int:
    return os.cpu_count() or 1


@dataclass
class PreprocessSettings:
    fields_used: str = TITLE_ONLY
    ngram_max: int = 2
    min_support: int = 2
    stemming_enabled: bool = True
    stopwords_path: Optional[str] = None

    def to_config(self) -> PreprocessConfig:
        stopwords = load_stopwords(Path(self.stopwords_path)) if self.stopwords_path else default_stopwords()
        return PreprocessConfig(
            fields_used=self.fields_used,
            ngram_max=self.ngram_max,
            min_support=self.min_support,
            stopword_list=stopwords,
            stemming_enabled=self.stemming_enabled,
        )


@dataclass
class ClosedSettings:
    exclude_shared: bool = True


@dataclass
class CrossbeeSettings:
    heuristics: List[str] = field(default_factory=lambda: list(DEFAULT_HEURISTICS))
    weights: List[float] = field(default_factory=list)
    candidates_file: Optional[str] = None
    svg: bool = True


@dataclass
class OpenSettings:
    b_types: List[str] = field(default_factory=lambda: list(DEFAULT_B_TYPES))
    a_types: List[str] = field(default_factory=lambda: list(DEFAULT_A_TYPES))
    semantic_types: Optional[str] = None
    snapshot_dir: Optional[str] = None
    choices: Optional[str] = None


@dataclass
class OutlierSettings:
    k: int = DEFAULT_K
    min_df: int = DEFAULT_MIN_DF
    space: str = SPACE_PCA2


@dataclass
class RajolinkSettings:
    ra_types: List[str] = field(default_factory=lambda: list(RA_TYPES))
    semantic_types: Optional[str] = None
    snapshot_dir: Optional[str] = None
    choices: Optional[str] = None
    pair_dataset: Optional[str] = None


@dataclass
class LinkpredSettings:
    references: Optional[str] = None
    measures: List[str] = field(default_factory=lambda: ["common_neighbors", "jaccard", "adamic_adar"])
    test_size: int = DEFAULT_TEST_SIZE
    projection: bool = False


SECTIONS = {
    "preprocess": PreprocessSettings,
    "closed": ClosedSettings,
    "crossbee": CrossbeeSettings,
    "open": OpenSettings,
    "outlier": OutlierSettings,
    "rajolink": RajolinkSettings,
    "linkpred": LinkpredSettings,
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _parse_list(value: Any) -> List[Any]:
    if isinstance(value, (list, tuple)):
        return list(value)
    text = str(value).strip()
    return [part.strip() for part in text.split(",") if part.strip()] if text else []


def _coerce(value: Any, type_name: str) -> Any:
    """Cast a raw YAML/env/CLI value to the declared field type."""
    if type_name.startswith("Optional["):
        if value is None or (isinstance(value, str) and not value.strip()):
            return None
        type_name = type_name[len("Optional["):-1]
    if type_name == "bool":
        return _parse_bool(value)
    if type_name == "int":
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    if type_name == "float":
        return float(value)
    if type_name == "str":
        if isinstance(value, (dict, list)):
            raise ValueError(f"expected a string, got {value!r}")
        return str(value)
    if type_name == "List[str]":
        return [str(item) for item in _parse_list(value)]
    if type_name == "List[float]":
        return [float(item) for item in _parse_list(value)]
    return value


def _fill(target: Any, values: Mapping[str, Any], prefix: str, unknown: List[str], errors: List[str]) -> None:
    declared = {f.name: f for f in fields(target)}
    for key, value in values.items():
        spec = declared.get(key)
        if spec is None:
            unknown.append(f"{prefix}{key}")
            continue
        try:
            setattr(target, key, _coerce(value, str(spec.type)))
        except (TypeError, ValueError) as exc:
            errors.append(f"{prefix}{key}: {exc}")


def deep_merge(base: Dict[str, Any], layer: Mapping[str, Any]) -> Dict[str, Any]:
    for key, value in layer.items():
        if value is None and key not in base:
            base[key] = None
        elif isinstance(value, Mapping) and isinstance(base.get(key), dict):
            deep_merge(base[key], value)
        elif isinstance(value, Mapping):
            base[key] = deep_merge({}, value)
        elif value is not None:
            base[key] = value
    return base


def load_yaml(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping of keys and sections")
    return data


def env_overrides(environ: Mapping[str, str]) -> Dict[str, Any]:
    """``LBDKIT_SEED=7`` sets ``seed``; ``LBDKIT_OUTLIER__K=3`` sets ``outlier.k``."""
    layer: Dict[str, Any] = {}
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        if "__" in key:
            section, sub = key.split("__", 1)
            layer.setdefault(section, {})[sub] = environ[name]
        else:
            layer[key] = environ[name]
    return layer


@dataclass
class PipelineConfig:
    pipeline: str = "closed"
    dataset: str = "rs-dfo"
    data_dir: str = "data"
    snapshot: Optional[str] = None
    out_dir: str = "out"
    seed: int = 42
    threads: int = field(default_factory=default_threads)
    choices: Optional[str] = None
    interactive: bool = False
    preprocess: PreprocessSettings = field(default_factory=PreprocessSettings)
    closed: ClosedSettings = field(default_factory=ClosedSettings)
    crossbee: CrossbeeSettings = field(default_factory=CrossbeeSettings)
    open: OpenSettings = field(default_factory=OpenSettings)
    outlier: OutlierSettings = field(default_factory=OutlierSettings)
    rajolink: RajolinkSettings = field(default_factory=RajolinkSettings)
    linkpred: LinkpredSettings = field(default_factory=LinkpredSettings)
    unknown_keys: List[str] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    source: Optional[str] = None

    @staticmethod
    def from_dict(data: Mapping[str, Any], source: Optional[str] = None) -> "PipelineConfig":
        config = PipelineConfig(source=source)
        top = {k: v for k, v in data.items() if k not in SECTIONS}
        for reserved in ("unknown_keys", "errors", "source"):
            if reserved in top:
                config.unknown_keys.append(reserved)
                top.pop(reserved)
        _fill(config, top, "", config.unknown_keys, config.errors)
        for name in SECTIONS:
            values = data.get(name)
            if values is None:
                continue
            if not isinstance(values, Mapping):
                config.errors.append(f"{name}: expected a section of key-value pairs")
                continue
            _fill(getattr(config, name), values, f"{name}.", config.unknown_keys, config.errors)
        return config

    @staticmethod
    def load(path: Path) -> "PipelineConfig":
        return PipelineConfig.from_dict(load_yaml(path), source=str(path))

    @staticmethod
    def resolve(
        path: Optional[Path] = None,
        environ: Optional[Mapping[str, str]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> "PipelineConfig":
        """defaults < dataset registry < config file < environment < ``overrides``."""
        file_layer = load_yaml(path) if path else {}
        env_layer = env_overrides(os.environ if environ is None else environ)
        cli_layer = {k: v for k, v in (overrides or {}).items() if v is not None}
        dataset = cli_layer.get("dataset") or env_layer.get("dataset") or file_layer.get("dataset") or PipelineConfig.dataset
        registry_layer: Dict[str, Any] = {}
        try:
            registry_layer = {"preprocess": dict(get_dataset(str(dataset)).preprocess)}
        except LookupError:
            pass
        merged: Dict[str, Any] = {}
        for layer in (registry_layer, file_layer, env_layer, cli_layer):
            deep_merge(merged, layer)
        return PipelineConfig.from_dict(merged, source=str(path) if path else None)

    def dataset_entry(self) -> DatasetEntry:
        try:
            return get_dataset(self.dataset)
        except LookupError as exc:
            raise ConfigError(str(exc)) from exc

    def preprocess_config(self) -> PreprocessConfig:
        return self.preprocess.to_config()

    def snapshot_path(self) -> Path:
        if self.snapshot:
            return Path(self.snapshot)
        return Path(self.data_dir) / self.dataset_entry().snapshot

    def gold_path(self) -> Path:
        return GOLD_DIR / f"{self.dataset_entry().key}.gold.txt"

    def has_gold(self) -> bool:
        return self.dataset_entry().key in GOLD_DATASETS

    def references_path(self) -> Path:
        if self.linkpred.references:
            return Path(self.linkpred.references)
        entry = self.dataset_entry()
        return Path(self.data_dir) / (entry.references or f"{entry.key}.references.psv.gz")

    def semantic_types_path(self, section: str) -> Path:
        configured = getattr(self, section).semantic_types
        return Path(configured) if configured else SEMANTIC_TYPES_PATH

    def snapshot_dir(self, section: str) -> Path:
        configured = getattr(self, section).snapshot_dir
        if configured:
            return Path(configured)
        sub = "second_level" if section == "open" else "rare_terms"
        return Path(self.data_dir) / self.dataset_entry().key / sub

    def choices_path(self, section: str) -> Path:
        if self.choices:
            return Path(self.choices)
        configured = getattr(self, section).choices
        if configured:
            return Path(configured)
        suffix = "b_concepts" if section == "open" else "rajolink"
        return CHOICES_DIR / f"{self.dataset_entry().key}.{suffix}.txt"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        payload = {k: v for k, v in self.to_dict().items() if k not in UNHASHED_FIELDS}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


FINDING_FIELD = "field"
FINDING_UNKNOWN_KEY = "unknown_key"
FINDING_MISSING_FILE = "missing_file"


@dataclass(frozen=True)
class Finding:
    kind: str
    field: str
    message: str
    path: str = ""

    def line(self) -> str:
        return f"[{self.kind}] {self.field}: {self.message}"


@dataclass
class ValidationReport:
    findings: List[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def of_kind(self, kind: str) -> List[Finding]:
        return [finding for finding in self.findings if finding.kind == kind]

    def to_dict(self) -> Dict[str, Any]:
        return {"ok": self.ok, "findings": [asdict(finding) for finding in self.findings]}


def _needs_file(report: ValidationReport, name: str, path: Path, directory: bool = False) -> None:
    exists = path.is_dir() if directory else path.is_file()
    if not exists:
        kind = "directory" if directory else "file"
        report.findings.append(Finding(FINDING_MISSING_FILE, name, f"{kind} not found: {path}", str(path)))


def validate(config: PipelineConfig) -> ValidationReport:
    """Every bad field, unknown key and missing input of ``config``; never writes anything."""
    report = ValidationReport()
    for error in config.errors:
        name, _, message = error.partition(": ")
        report.findings.append(Finding(FINDING_FIELD, name, message))
    for key in config.unknown_keys:
        report.findings.append(Finding(FINDING_UNKNOWN_KEY, key, "unknown key"))

    if config.pipeline not in PIPELINES:
        report.findings.append(
            Finding(FINDING_FIELD, "pipeline", f"unknown pipeline '{config.pipeline}'; valid: {', '.join(PIPELINES)}")
        )
    if config.seed < 0:
        report.findings.append(Finding(FINDING_FIELD, "seed", "must be >= 0"))
    if config.threads < 1:
        report.findings.append(Finding(FINDING_FIELD, "threads", "must be >= 1"))
    try:
        config.preprocess_config()
    except ConfigError as exc:
        report.findings.append(Finding(FINDING_FIELD, "preprocess", str(exc)))
    except OSError as exc:
        report.findings.append(Finding(FINDING_MISSING_FILE, "preprocess.stopwords_path", str(exc), str(config.preprocess.stopwords_path)))

    try:
        config.dataset_entry()
    except ConfigError as exc:
        report.findings.append(Finding(FINDING_FIELD, "dataset", str(exc)))
        return report

    pipeline = config.pipeline
    _needs_file(report, "snapshot", config.snapshot_path())
    if pipeline in ("closed", "crossbee"):
        if not config.has_gold():
            report.findings.append(Finding(FINDING_FIELD, "dataset", f"no gold standard ships for '{config.dataset}'"))
        else:
            _needs_file(report, "gold", config.gold_path())
    if pipeline == "crossbee":
        unknown = [h for h in config.crossbee.heuristics if h not in HEURISTICS]
        if unknown or not config.crossbee.heuristics:
            report.findings.append(
                Finding(FINDING_FIELD, "crossbee.heuristics", f"unknown {unknown}; valid: {', '.join(sorted(HEURISTICS))}")
            )
        weights = config.crossbee.weights
        if weights and (len(weights) != len(config.crossbee.heuristics) or any(w <= 0 for w in weights)):
            report.findings.append(Finding(FINDING_FIELD, "crossbee.weights", "one positive weight per heuristic"))
        if config.crossbee.candidates_file:
            _needs_file(report, "crossbee.candidates_file", Path(config.crossbee.candidates_file))
    if pipeline in ("open", "rajolink"):
        _needs_file(report, f"{pipeline}.semantic_types", config.semantic_types_path(pipeline))
        _needs_file(report, f"{pipeline}.snapshot_dir", config.snapshot_dir(pipeline), directory=True)
        if not config.interactive:
            _needs_file(report, f"{pipeline}.choices", config.choices_path(pipeline))
    if pipeline == "outlier":
        if config.outlier.k < 1:
            report.findings.append(Finding(FINDING_FIELD, "outlier.k", "must be >= 1"))
        if config.outlier.min_df < 1:
            report.findings.append(Finding(FINDING_FIELD, "outlier.min_df", "must be >= 1"))
        if config.outlier.space not in SPACES:
            report.findings.append(Finding(FINDING_FIELD, "outlier.space", f"valid: {', '.join(SPACES)}"))
    if pipeline == "linkpred":
        _needs_file(report, "linkpred.references", config.references_path())
        unknown = [m for m in config.linkpred.measures if m not in MEASURES]
        if unknown or not config.linkpred.measures:
            report.findings.append(
                Finding(FINDING_FIELD, "linkpred.measures", f"unknown {unknown}; valid: {', '.join(sorted(MEASURES))}")
            )
        if config.linkpred.test_size < 1:
            report.findings.append(Finding(FINDING_FIELD, "linkpred.test_size", "must be >= 1"))
    return report
