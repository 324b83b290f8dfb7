"""Domain-pair bibliographic corpora, PSV snapshots and gold-standard b-terms."""

from __future__ import annotations

import csv
import gzip
import io
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import date
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd
import yaml

from lbdkit.errors import CorpusLoadError, FixtureMissingError
from lbdkit.logging import get_logger, log_event, log_warning

DOMAIN_A = "A"
DOMAIN_C = "C"
DOMAINS = (DOMAIN_A, DOMAIN_C)

PSV_COLUMNS = ("pmid", "domain", "pub_date", "title", "abstract", "mesh")
MESH_SEPARATOR = ";"

RESOURCE_DIR = Path(__file__).resolve().parent / "resources"
GOLD_DIR = RESOURCE_DIR / "gold"
DATASETS_PATH = RESOURCE_DIR / "datasets.yaml"
GOLD_DATASETS = {
    "rs-dfo": "RS-DFO",
    "mig-mg": "Mig-Mg",
    "aut-can": "Aut-CaN",
}


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    abstract: str
    mesh_headings: Tuple[str, ...]
    pub_date: date
    domain: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("Document id must be non-empty")
        if self.domain not in DOMAINS:
            raise ValueError(f"Document {self.id} has domain {self.domain!r}; expected A or C")


@dataclass(frozen=True)
class RowRejection:
    line: int
    reason: str
    pmid: str = ""


@dataclass(frozen=True)
class DomainPairCorpus:
    label_a: str
    label_c: str
    documents: Tuple[Document, ...]
    query_terms_a: Tuple[str, ...] = ()
    query_terms_c: Tuple[str, ...] = ()
    cutoff_date: Optional[date] = None
    rejections: Tuple[RowRejection, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        for doc in self.documents:
            if doc.domain not in DOMAINS:
                raise ValueError(f"Document {doc.id} has domain {doc.domain!r}")

    def __len__(self) -> int:
        return len(self.documents)

    def docs_in(self, domain: str) -> List[Document]:
        return [doc for doc in self.documents if doc.domain == domain]

    def count(self, domain: str) -> int:
        return sum(1 for doc in self.documents if doc.domain == domain)

    def with_documents(self, documents: Iterable[Document]) -> "DomainPairCorpus":
        return replace(self, documents=tuple(documents))

    def statistics(self) -> Dict[str, object]:
        stats: Dict[str, object] = {
            "label_a": self.label_a,
            "label_c": self.label_c,
            "docs_c": self.count(DOMAIN_C),
            "docs_a": self.count(DOMAIN_A),
            "rejected_rows": len(self.rejections),
        }
        for domain in DOMAINS:
            docs = self.docs_in(domain)
            words = [len(f"{doc.title} {doc.abstract}".split()) for doc in docs]
            stats[f"mean_words_{domain.lower()}"] = round(sum(words) / len(words), 3) if words else 0.0
        return stats


def _parse_date(raw: str) -> date:
    return date.fromisoformat(raw.strip())


def _resolve_domain(raw: str, label_a: str, label_c: str) -> Optional[str]:
    value = raw.strip()
    if value.upper() in DOMAINS:
        return value.upper()
    lowered = value.lower()
    if lowered == label_a.lower():
        return DOMAIN_A
    if lowered == label_c.lower():
        return DOMAIN_C
    return None


def _split_mesh(raw: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in raw.split(MESH_SEPARATOR) if part.strip())


def _data_line_numbers(path: Path) -> Tuple[List[int], List[int]]:
    """Physical line numbers of well-formed and over-long data rows, in file order.

    Mirrors the parser: blank lines are skipped and a row with more fields
    than the header is malformed.
    """
    opener = gzip.open if path.suffix == ".gz" else open
    good: List[int] = []
    bad: List[int] = []
    with opener(path, "rt", encoding="utf-8") as handle:
        width = 0
        for number, raw in enumerate(handle, start=1):
            text = raw.rstrip("\r\n")
            if number == 1:
                width = text.count("|") + 1
            elif text.strip() or "|" in text:
                (bad if text.count("|") + 1 > width else good).append(number)
    return good, bad


def load_psv(
    path: Path,
    schema: Optional[Mapping[str, str]] = None,
    *,
    label_a: str = DOMAIN_A,
    label_c: str = DOMAIN_C,
    query_terms_a: Sequence[str] = (),
    query_terms_c: Sequence[str] = (),
    cutoff_date: Optional[date] = None,
    assume_domain: Optional[str] = None,
) -> DomainPairCorpus:
    """Load a gzip pipe-separated snapshot into a corpus.

    ``schema`` maps logical column names (``PSV_COLUMNS``) to the header names
    used in the file. Bad rows are collected on ``corpus.rejections``; only an
    unreadable file or a missing required column aborts the load.
    """
    logger = get_logger()
    path = Path(path)
    if not path.exists():
        raise FixtureMissingError(path, "corpus snapshot")
    columns = {name: name for name in PSV_COLUMNS}
    columns.update(schema or {})

    malformed: List[List[str]] = []

    def _bad_line(fields: List[str]) -> None:
        malformed.append(fields)
        return None

    try:
        frame = pd.read_csv(
            path,
            sep="|",
            dtype=str,
            keep_default_na=False,
            quoting=csv.QUOTE_NONE,
            compression="infer",
            engine="python",
            on_bad_lines=_bad_line,
        )
        good_lines, bad_lines = _data_line_numbers(path)
    except pd.errors.EmptyDataError as exc:
        raise CorpusLoadError(f"{path}: file has no header row") from exc
    except (OSError, EOFError, UnicodeDecodeError, pd.errors.ParserError) as exc:
        raise CorpusLoadError(f"{path}: unreadable snapshot ({exc})") from exc

    required = ["pmid", "pub_date", "title"] + ([] if assume_domain else ["domain"])
    missing = [columns[name] for name in required if columns[name] not in frame.columns]
    if missing:
        raise CorpusLoadError(f"{path}: missing columns {', '.join(missing)}")

    def _cell(row: Mapping[str, str], name: str) -> str:
        value = row.get(columns[name], "")
        return value if isinstance(value, str) else ""

    if len(good_lines) != len(frame) or len(bad_lines) != len(malformed):
        log_warning(logger, "line_numbers_unavailable", {"path": str(path)})
        good_lines = list(range(2, len(frame) + 2))
        bad_lines = [0] * len(malformed)

    documents: List[Document] = []
    rejections = [
        RowRejection(line=line, reason=f"malformed row with {len(fields)} fields", pmid=fields[0] if fields else "")
        for line, fields in zip(bad_lines, malformed)
    ]
    seen: Dict[Tuple[str, str], int] = {}
    for line, row in zip(good_lines, frame.to_dict(orient="records")):
        pmid = _cell(row, "pmid").strip()
        if not pmid:
            rejections.append(RowRejection(line=line, reason="missing id"))
            continue
        domain = assume_domain or _resolve_domain(_cell(row, "domain"), label_a, label_c)
        if domain is None:
            rejections.append(RowRejection(line=line, reason=f"unknown domain {_cell(row, 'domain')!r}", pmid=pmid))
            continue
        try:
            pub_date = _parse_date(_cell(row, "pub_date"))
        except ValueError:
            rejections.append(RowRejection(line=line, reason=f"unparsable date {_cell(row, 'pub_date')!r}", pmid=pmid))
            continue
        if cutoff_date is not None and pub_date > cutoff_date:
            rejections.append(RowRejection(line=line, reason=f"published after cutoff {cutoff_date}", pmid=pmid))
            continue
        if (pmid, domain) in seen:
            rejections.append(RowRejection(line=line, reason=f"duplicate id (first at line {seen[(pmid, domain)]})", pmid=pmid))
            continue
        seen[(pmid, domain)] = line
        documents.append(
            Document(
                id=pmid,
                title=_cell(row, "title").strip(),
                abstract=_cell(row, "abstract").strip(),
                mesh_headings=_split_mesh(_cell(row, "mesh")),
                pub_date=pub_date,
                domain=domain,
            )
        )

    rejections.sort(key=lambda r: r.line)
    corpus = DomainPairCorpus(
        label_a=label_a,
        label_c=label_c,
        documents=tuple(documents),
        query_terms_a=tuple(query_terms_a),
        query_terms_c=tuple(query_terms_c),
        cutoff_date=cutoff_date,
        rejections=tuple(rejections),
    )
    log_event(
        logger,
        "corpus_loaded",
        {"path": str(path), "docs_a": corpus.count(DOMAIN_A), "docs_c": corpus.count(DOMAIN_C), "rejected": len(rejections)},
    )
    if rejections:
        log_warning(logger, "rows_rejected", {"path": str(path), "count": len(rejections), "first": rejections[0].reason})
    return corpus


def _clean_field(value: str) -> str:
    """Fold a text field onto one PSV cell: pipes become spaces and whitespace runs collapse."""
    return " ".join(value.replace("|", " ").split())


def save_psv(documents: Iterable[Document], path: Path) -> Path:
    """Write documents in the corpus schema; gzip output carries a fixed mtime.

    The format has no escaping, so text is folded with ``_clean_field``: a
    title or abstract holding a pipe or a line break reads back with single
    spaces, and a heading containing ``;`` reads back split.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter="|", quoting=csv.QUOTE_NONE, quotechar=None, lineterminator="\n")
    writer.writerow(PSV_COLUMNS)
    for doc in documents:
        writer.writerow(
            [
                doc.id,
                doc.domain,
                doc.pub_date.isoformat(),
                _clean_field(doc.title),
                _clean_field(doc.abstract),
                MESH_SEPARATOR.join(_clean_field(h) for h in doc.mesh_headings),
            ]
        )
    data = buffer.getvalue().encode("utf-8")
    if path.suffix == ".gz":
        with path.open("wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as handle:
            handle.write(data)
    else:
        path.write_bytes(data)
    return path


def save_rejections(rejections: Sequence[RowRejection], path: Path) -> Path:
    frame = pd.DataFrame([{"line": r.line, "pmid": r.pmid, "reason": r.reason} for r in rejections], columns=["line", "pmid", "reason"])
    frame.to_csv(path, sep="|", index=False, lineterminator="\n")
    return path


def exclude_shared_records(corpus: DomainPairCorpus) -> DomainPairCorpus:
    domains_by_id: Dict[str, set] = {}
    for doc in corpus.documents:
        domains_by_id.setdefault(doc.id, set()).add(doc.domain)
    shared = {doc_id for doc_id, domains in domains_by_id.items() if len(domains) > 1}
    if not shared:
        return corpus
    log_event(get_logger(), "shared_records_excluded", {"count": len(shared)})
    return corpus.with_documents(doc for doc in corpus.documents if doc.id not in shared)


def shared_ids(corpus: DomainPairCorpus) -> List[str]:
    ids_a = Counter(doc.id for doc in corpus.docs_in(DOMAIN_A))
    ids_c = Counter(doc.id for doc in corpus.docs_in(DOMAIN_C))
    return sorted(set(ids_a) & set(ids_c))


@dataclass(frozen=True)
class GoldStandard:
    dataset_name: str
    b_terms: Tuple[str, ...]

    @property
    def term_set(self) -> frozenset:
        return frozenset(self.b_terms)


def _gold_key(dataset_name: str) -> str:
    key = dataset_name.strip().lower()
    if key not in GOLD_DATASETS:
        raise LookupError(f"Unknown dataset '{dataset_name}'; expected one of {', '.join(GOLD_DATASETS.values())}")
    return key


def _default_normalizer(term: str) -> str:
    return " ".join(term.lower().split())


def load_gold(
    dataset_name: str,
    normalizer: Optional[Callable[[str], str]] = None,
    gold_dir: Optional[Path] = None,
) -> GoldStandard:
    """Read ``<dataset>.gold.txt``; every term passes through ``normalizer``.

    The list keeps one entry per published term even when two terms collapse
    to the same normalized form.
    """
    key = _gold_key(dataset_name)
    path = Path(gold_dir or GOLD_DIR) / f"{key}.gold.txt"
    if not path.exists():
        raise FixtureMissingError(path, "gold standard")
    normalize = normalizer or _default_normalizer
    terms = [
        normalize(line)
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    return GoldStandard(dataset_name=GOLD_DATASETS[key], b_terms=tuple(terms))


def _as_date(value: Union[str, date]) -> date:
    return value if isinstance(value, date) else date.fromisoformat(str(value).strip())


@dataclass(frozen=True)
class DatasetEntry:
    key: str
    name: str
    snapshot: str
    label_a: str
    label_c: str
    query_terms_a: Tuple[str, ...]
    query_terms_c: Tuple[str, ...]
    cutoff_date: date
    references: Optional[str] = None
    exclude_headings: Tuple[str, ...] = ()
    preprocess: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.query_terms_a or not self.query_terms_c:
            raise ValueError(f"Dataset {self.key} needs query terms for both domains")


@lru_cache(maxsize=4)
def load_registry(path: Path = DATASETS_PATH) -> Dict[str, DatasetEntry]:
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    registry: Dict[str, DatasetEntry] = {}
    for key, item in data.items():
        registry[key] = DatasetEntry(
            key=key,
            name=item.get("name", key),
            snapshot=item["snapshot"],
            label_a=item["label_a"],
            label_c=item["label_c"],
            query_terms_a=tuple(item.get("query_terms_a", [])),
            query_terms_c=tuple(item.get("query_terms_c", [])),
            cutoff_date=_as_date(item["cutoff_date"]),
            references=item.get("references"),
            exclude_headings=tuple(item.get("exclude_headings", [])),
            preprocess=dict(item.get("preprocess", {})),
        )
    return registry


def get_dataset(name: str) -> DatasetEntry:
    """Registry entry by key (``rs-dfo``) or display name (``RS-DFO``)."""
    registry = load_registry()
    wanted = name.strip().lower()
    for entry in registry.values():
        if wanted in (entry.key, entry.name.lower()):
            return entry
    raise LookupError(f"Unknown dataset '{name}'; expected one of {', '.join(sorted(registry))}")


def load_dataset(name: str, data_dir: Path, snapshot: Optional[Path] = None, apply_cutoff: bool = True) -> DomainPairCorpus:
    entry = get_dataset(name)
    path = Path(snapshot) if snapshot else Path(data_dir) / entry.snapshot
    return load_psv(
        path,
        label_a=entry.label_a,
        label_c=entry.label_c,
        query_terms_a=entry.query_terms_a,
        query_terms_c=entry.query_terms_c,
        cutoff_date=entry.cutoff_date if apply_cutoff else None,
    )
