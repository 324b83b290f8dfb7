from __future__ import annotations

import hashlib
import json
import platform
import shutil
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional

from lbdkit.errors import ConfigError
from lbdkit.logging import get_logger, log_event

MANIFEST_JSON = "manifest.json"
MANIFEST_TXT = "manifest.txt"
STATUS_OK = "ok"
STATUS_FAILED = "failed"

TRACKED_PACKAGES = ("lbdkit", "numpy", "scipy", "pandas", "networkx", "nltk", "scikit-learn", "PyYAML")


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def library_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass
class RunManifest:
    """Provenance for one CLI run. ``created_at`` is the only time-dependent field."""

    command: str
    dataset: str
    status: str = STATUS_OK
    seed: int = 42
    threads: int = 1
    config_hash: str = ""
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    versions: Dict[str, str] = field(default_factory=library_versions)
    metrics: Dict[str, Any] = field(default_factory=dict)
    error: Optional[Dict[str, str]] = None
    created_at: str = field(default_factory=_utc_now)

    def record_input(self, path: Path) -> str:
        path = Path(path)
        digest = file_sha256(path)
        self.inputs[path.name] = digest
        return digest

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save(self, directory: Path) -> Path:
        directory = Path(directory)
        json_path = directory / MANIFEST_JSON
        text_path = directory / MANIFEST_TXT
        json_path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")

        lines = [
            f"Run manifest - {self.created_at}",
            f"Command: {self.command}",
            f"Dataset: {self.dataset}",
            f"Status: {self.status}",
            f"Seed: {self.seed}",
            f"Threads: {self.threads}",
            f"Config hash: {self.config_hash}",
        ]
        if self.inputs:
            lines.append("Inputs:")
            lines.extend(f"- {name} sha256={digest}" for name, digest in sorted(self.inputs.items()))
        if self.outputs:
            lines.append("Outputs:")
            lines.extend(f"- {name}" for name in self.outputs)
        for key, value in sorted(self.metrics.items()):
            if isinstance(value, (int, float, str)):
                lines.append(f"{key}: {value}")
        if self.error:
            lines.append(f"Error: {self.error.get('type')}: {self.error.get('message')}")
        text_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        log_event(get_logger(), "manifest_written", {"json": str(json_path), "status": self.status})
        return json_path


def _clear_previous_run(directory: Path) -> None:
    """Empty ``directory`` if it is absent, empty, or an earlier run's output."""
    if not directory.exists():
        return
    if not directory.is_dir():
        raise ConfigError(f"Output path {directory} is not a directory")
    entries = list(directory.iterdir())
    if entries and not (directory / MANIFEST_JSON).exists():
        raise ConfigError(f"Output directory {directory} is not empty and holds no earlier run")
    for entry in entries:
        if entry.is_dir():
            shutil.rmtree(entry)
        else:
            entry.unlink()


class StagedOutput:
    """Artifacts are written to a sibling temporary directory and promoted on success."""

    def __init__(self, out_dir: Path) -> None:
        self.out_dir = Path(out_dir)
        self.out_dir.parent.mkdir(parents=True, exist_ok=True)
        if self.out_dir.exists():
            _clear_previous_run(self.out_dir)
        self.staging = Path(tempfile.mkdtemp(prefix=".lbdkit-", dir=self.out_dir.parent))

    def path(self, name: str) -> Path:
        return self.staging / name

    def artifacts(self) -> List[str]:
        return sorted(p.name for p in self.staging.iterdir() if p.is_file())

    def promote(self, manifest: RunManifest) -> Path:
        manifest.outputs = [name for name in self.artifacts() if name not in (MANIFEST_JSON, MANIFEST_TXT)]
        manifest.save(self.staging)
        _clear_previous_run(self.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name in self.artifacts():
            shutil.move(str(self.staging / name), str(self.out_dir / name))
        self.discard()
        return self.out_dir

    def fail(self, manifest: RunManifest, exc: BaseException) -> Path:
        self.discard()
        _clear_previous_run(self.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        manifest.status = STATUS_FAILED
        manifest.outputs = []
        manifest.error = {"type": type(exc).__name__, "message": str(exc)}
        manifest.save(self.out_dir)
        (self.out_dir / MANIFEST_TXT).unlink(missing_ok=True)
        return self.out_dir

    def discard(self) -> None:
        shutil.rmtree(self.staging, ignore_errors=True)
