"""Concept-based open discovery over MeSH headings."""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from lbdkit.choices import ChoiceMatcher, locate_snapshot, read_choice_lines
from lbdkit.corpus import DOMAIN_A, DOMAIN_C, RESOURCE_DIR, Document, DomainPairCorpus, load_psv
from lbdkit.errors import FixtureMissingError, PipelineInapplicableError
from lbdkit.evalkit import RankedList, rank_aggregate
from lbdkit.logging import get_logger, log_event, log_warning
from lbdkit.textprep import TermNormalizer
from lbdkit.vectorspace import column_totals, count_matrix, tfidf

SEMANTIC_TYPES_PATH = RESOURCE_DIR / "semantic_types.psv"

DEFAULT_B_TYPES = ("Amino Acid, Peptide, or Protein", "Pathologic Function", "Phenomenon or Process")
DEFAULT_A_TYPES = DEFAULT_B_TYPES + ("Element, Ion, or Isotope", "Biologically Active Substance")


def load_semantic_types(path: Path = SEMANTIC_TYPES_PATH) -> Dict[str, FrozenSet[str]]:
    """``heading|semantic_type`` rows; a heading may carry several types."""
    path = Path(path)
    if not path.exists():
        raise FixtureMissingError(path, "semantic type table")
    frame = pd.read_csv(path, sep="|", dtype=str, keep_default_na=False)
    table: Dict[str, set] = {}
    for heading, semantic_type in zip(frame["heading"], frame["semantic_type"]):
        if heading.strip() and semantic_type.strip():
            table.setdefault(heading.strip(), set()).add(semantic_type.strip())
    return {heading: frozenset(types) for heading, types in table.items()}


@dataclass(frozen=True)
class SemanticTypeFilter:
    allowed_types: FrozenSet[str]
    heading_to_types: Mapping[str, FrozenSet[str]] = field(compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "allowed_types", frozenset(self.allowed_types))
        known = set().union(*self.heading_to_types.values()) if self.heading_to_types else set()
        unknown = sorted(self.allowed_types - known)
        if unknown:
            log_warning(get_logger(), "semantic_types_unmapped", {"types": unknown})

    @classmethod
    def from_table(cls, allowed_types: Iterable[str], path: Path = SEMANTIC_TYPES_PATH) -> "SemanticTypeFilter":
        return cls(allowed_types=frozenset(allowed_types), heading_to_types=load_semantic_types(path))

    def is_mapped(self, heading: str) -> bool:
        return heading in self.heading_to_types

    def allows(self, heading: str) -> bool:
        return bool(self.heading_to_types.get(heading, frozenset()) & self.allowed_types)


def _heading_counts(documents: Iterable[Document]) -> Counter:
    counts: Counter = Counter()
    for doc in documents:
        counts.update(set(doc.mesh_headings))
    return counts


def collect_headings(corpus: DomainPairCorpus, domain: Optional[str] = DOMAIN_C) -> Dict[str, int]:
    """Heading document frequencies over one domain (``None`` for both)."""
    documents = corpus.documents if domain is None else corpus.docs_in(domain)
    counts = _heading_counts(documents)
    if not counts:
        raise PipelineInapplicableError("No document carries MeSH headings; concept-based discovery is inapplicable")
    return dict(sorted(counts.items()))


def filter_semantic_types(headings: Iterable[str], type_filter: SemanticTypeFilter) -> List[str]:
    headings = list(dict.fromkeys(headings))
    unmapped = [h for h in headings if not type_filter.is_mapped(h)]
    if unmapped:
        log_warning(get_logger(), "headings_unmapped", {"count": len(unmapped), "sample": sorted(unmapped)[:10]})
    return [h for h in headings if type_filter.allows(h)]


def heading_ranking(headings: Sequence[str], documents: Sequence[Document]) -> RankedList:
    """Aggregated TF-IDF of ``headings`` with each document's heading list as its terms."""
    headings = sorted(set(headings))
    if not headings:
        return RankedList.empty()
    counters = [Counter(doc.mesh_headings) for doc in documents]
    matrix = count_matrix([doc.id for doc in documents], counters, headings)
    return RankedList.from_scores(column_totals(tfidf(matrix)))


def rank_b_concepts(headings: Sequence[str], corpus: DomainPairCorpus, domain: str = DOMAIN_C) -> RankedList:
    if not headings:
        raise ValueError("rank_b_concepts needs at least one heading")
    return heading_ranking(headings, corpus.docs_in(domain))


@dataclass(frozen=True)
class BConceptExpansion:
    b_concept: str
    documents: Tuple[Document, ...]
    a_headings: Tuple[str, ...]
    ranking: RankedList
    source: str = ""

    def __post_init__(self) -> None:
        present = set(_heading_counts(self.documents))
        stray = [h for h in self.a_headings if h not in present]
        if stray:
            raise ValueError(f"a-headings not present in the {self.b_concept} documents: {stray}")

    def summary(self) -> Dict[str, object]:
        return {
            "b_concept": self.b_concept,
            "records": len(self.documents),
            "a_headings": len(self.a_headings),
            "source": self.source,
        }


def expand_b_concept(
    b_concept: str,
    second_level: Union[Path, str, Sequence[Document]],
    type_filter: SemanticTypeFilter,
    exclude_headings: Iterable[str] = (),
) -> BConceptExpansion:
    """Filtered a-headings of the literature retrieved for ``b_concept``.

    ``second_level`` is a snapshot path or its documents. The b-heading and
    the start-domain query headings never count as a-concepts.
    """
    source = ""
    if isinstance(second_level, (str, Path)):
        source = Path(second_level).name
        corpus = load_psv(Path(second_level), label_a=b_concept, assume_domain=DOMAIN_A)
        documents = corpus.documents
    else:
        documents = tuple(second_level)
    excluded = {b_concept, *exclude_headings}
    present = [h for h in sorted(_heading_counts(documents)) if h not in excluded]
    a_headings = tuple(filter_semantic_types(present, type_filter))
    expansion = BConceptExpansion(
        b_concept=b_concept,
        documents=tuple(documents),
        a_headings=a_headings,
        ranking=heading_ranking(a_headings, documents),
        source=source,
    )
    log_event(get_logger(), "b_concept_expanded", expansion.summary())
    return expansion


def intersect_and_aggregate(expansions: Sequence[BConceptExpansion]) -> RankedList:
    """a-concepts shared by every expansion, Borda-aggregated over their per-expansion ranks."""
    if len(expansions) < 2:
        raise ValueError("intersect_and_aggregate needs at least two expansions")
    shared = set(expansions[0].a_headings)
    for expansion in expansions[1:]:
        shared &= set(expansion.a_headings)
    if not shared:
        log_warning(
            get_logger(),
            "empty_a_concept_intersection",
            {"b_concepts": [e.b_concept for e in expansions], "sizes": [len(e.a_headings) for e in expansions]},
        )
        return RankedList.empty()
    return rank_aggregate([expansion.ranking.restrict(shared) for expansion in expansions])


def novelty_check(a_concept: str, c_corpus: DomainPairCorpus) -> int:
    """C-domain documents already indexed with ``a_concept``."""
    return sum(1 for doc in c_corpus.docs_in(DOMAIN_C) if a_concept in doc.mesh_headings)


def load_choice_file(path: Path) -> List[str]:
    return read_choice_lines(path)


@dataclass
class OpenDiscoveryReport:
    dataset: str
    headings_total: int
    headings_filtered: int
    b_concepts: List[Dict[str, object]]
    expansions: List[Dict[str, object]]
    candidates: List[Dict[str, object]]
    note: str = ""

    def to_dict(self) -> Dict[str, object]:
        return {
            "dataset": self.dataset,
            "headings_total": self.headings_total,
            "headings_filtered": self.headings_filtered,
            "b_concepts": self.b_concepts,
            "expansions": self.expansions,
            "candidates": self.candidates,
            "note": self.note,
        }

    def save(self, path: Path) -> Path:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def run_open_discovery(
    corpus: DomainPairCorpus,
    b_choices: Sequence[str],
    snapshot_dir: Path,
    normalizer: TermNormalizer,
    b_filter: SemanticTypeFilter,
    a_filter: Optional[SemanticTypeFilter] = None,
    exclude_headings: Iterable[str] = (),
    threads: int = 1,
    dataset: str = "",
) -> Tuple[OpenDiscoveryReport, RankedList, RankedList]:
    """Headings, type filter, b-ranking, expansions, intersection and novelty in one pass.

    Returns the report, the b-concept ranking and the aggregated a-concepts.
    """
    headings = collect_headings(corpus, DOMAIN_C)
    excluded = tuple(exclude_headings)
    filtered = [h for h in filter_semantic_types(headings, b_filter) if h not in excluded]
    b_ranking = rank_b_concepts(filtered, corpus)
    matcher = ChoiceMatcher(b_ranking, normalizer, "b-concept")
    picks: List[Tuple[str, str]] = []
    for choice in b_choices:
        key = matcher.resolve(choice)
        if key not in [b for b, _ in picks]:
            picks.append((key, choice))
    chosen = [b for b, _ in picks]
    if len(chosen) < 2:
        raise PipelineInapplicableError("Open discovery needs at least two distinct b-concepts")

    sources = [locate_snapshot(snapshot_dir, [b, choice]) for b, choice in picks]
    a_filter = a_filter or b_filter

    def _expand(pair: Tuple[str, Path]) -> BConceptExpansion:
        return expand_b_concept(pair[0], pair[1], a_filter, excluded)

    pairs = list(zip(chosen, sources))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            expansions = list(pool.map(_expand, pairs))
    else:
        expansions = [_expand(pair) for pair in pairs]

    aggregated = intersect_and_aggregate(expansions)
    candidates = []
    for rank, (heading, score) in enumerate(aggregated, start=1):
        novelty = novelty_check(heading, corpus)
        candidates.append({"heading": heading, "score": score, "rank": rank, "novelty": novelty, "novel": novelty == 0})
    report = OpenDiscoveryReport(
        dataset=dataset,
        headings_total=len(headings),
        headings_filtered=len(filtered),
        b_concepts=[
            {"heading": b, "choice": choice, "position": b_ranking.position_of(b), "score": b_ranking.score_of(b)}
            for b, choice in picks
        ],
        expansions=[expansion.summary() for expansion in expansions],
        candidates=candidates,
        note="" if candidates else "the expansions share no a-concept",
    )
    log_event(get_logger(), "open_discovery", {"candidates": len(candidates), "b_concepts": chosen})
    return report, b_ranking, aggregated
