"""RaJoLink open discovery: rare terms (Ra), joint terms (Jo), closed discovery (Link)."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from lbdkit.choices import ChoiceMatcher, locate_snapshot, prompt_choices, read_choice_lines, term_slug
from lbdkit.closed_abc import CommonTermSet, common_terms
from lbdkit.corpus import DOMAIN_A, DOMAIN_C, Document, DomainPairCorpus, exclude_shared_records, load_psv
from lbdkit.crossbee import DEFAULT_HEURISTICS, HeuristicInputs, count_profile, ensemble_rank
from lbdkit.errors import ChoiceValidationError, PipelineInapplicableError
from lbdkit.evalkit import RankedList
from lbdkit.logging import get_logger, log_event, log_warning
from lbdkit.open_concept import SemanticTypeFilter, filter_semantic_types, heading_ranking
from lbdkit.report import file_sha256
from lbdkit.textprep import PreprocessConfig, build_vocabulary, count_terms, get_normalizer, is_query_term
from lbdkit.vectorspace import column_totals, count_matrix, tfidf

RA_TYPES = ("Enzymes and Coenzymes", "Amino Acids, Peptides, and Proteins")

SOURCE_REPLAY = "replay_file"
SOURCE_INTERACTIVE = "interactive"
STAGE_RA = "ra"
STAGE_JO = "jo"


def rare_term_slug(term: str) -> str:
    return term_slug(term)


@dataclass(frozen=True)
class ChoiceRecord:
    ra_selected: Tuple[str, ...] = ()
    jo_selected: Optional[str] = None
    source: str = SOURCE_REPLAY

    def dump(self) -> str:
        lines = [f"ra: {term}" for term in self.ra_selected]
        if self.jo_selected:
            lines.append(f"jo: {self.jo_selected}")
        return "\n".join(lines) + "\n"

    def save(self, path: Path) -> Path:
        Path(path).write_text(self.dump(), encoding="utf-8")
        return path

    @classmethod
    def parse(cls, text: str, source: str = SOURCE_REPLAY) -> "ChoiceRecord":
        ra: List[str] = []
        jo: Optional[str] = None
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            stage, sep, value = line.partition(":")
            stage = stage.strip().lower()
            value = value.strip()
            if not sep or not value or stage not in (STAGE_RA, STAGE_JO):
                raise ValueError(f"line {number}: expected 'ra: <term>' or 'jo: <term>', got {raw!r}")
            if stage == STAGE_RA:
                if jo is not None:
                    raise ValueError(f"line {number}: 'ra:' lines must precede the 'jo:' line")
                ra.append(value)
            elif jo is not None:
                raise ValueError(f"line {number}: only one 'jo:' line is allowed")
            else:
                jo = value
        return cls(ra_selected=tuple(ra), jo_selected=jo, source=source)

    @classmethod
    def load(cls, path: Path) -> "ChoiceRecord":
        return cls.parse("\n".join(read_choice_lines(path)))


@dataclass(frozen=True, eq=False)
class LinkResult:
    common: CommonTermSet
    ranking: RankedList


@dataclass
class RaJoLinkSession:
    start_corpus: DomainPairCorpus
    term_filter: SemanticTypeFilter
    config: PreprocessConfig
    ra_ranking: RankedList = field(default_factory=RankedList.empty)
    jo_corpus: Tuple[Document, ...] = ()
    jo_ranking: RankedList = field(default_factory=RankedList.empty)
    choices: ChoiceRecord = field(default_factory=ChoiceRecord)
    requested: Dict[str, List[str]] = field(default_factory=dict)
    fixture_hashes: Dict[str, str] = field(default_factory=dict)
    rare_corpora: Dict[str, Tuple[Document, ...]] = field(default_factory=dict)
    link: Optional[LinkResult] = None

    def require_ra(self) -> Tuple[str, ...]:
        if not self.choices.ra_selected:
            raise PipelineInapplicableError("Jo needs at least one Ra choice")
        return self.choices.ra_selected

    def require_jo(self) -> str:
        if not self.choices.jo_selected:
            raise PipelineInapplicableError("Link needs a Jo choice")
        return self.choices.jo_selected

    def report(self) -> Dict[str, object]:
        ra = [
            {"term": term, "position": self.ra_ranking.position_of(term), "score": self.ra_ranking.score_of(term)}
            for term in self.choices.ra_selected
        ]
        jo = None
        if self.choices.jo_selected and self.choices.jo_selected in self.jo_ranking:
            jo = {
                "term": self.choices.jo_selected,
                "position": self.jo_ranking.position_of(self.choices.jo_selected),
                "score": self.jo_ranking.score_of(self.choices.jo_selected),
            }
        payload: Dict[str, object] = {
            "start_domain": self.start_corpus.label_c,
            "choices_source": self.choices.source,
            "requested": self.requested,
            "ra": {"candidates": len(self.ra_ranking), "selected": ra},
            "jo": {
                "documents": len(self.jo_corpus),
                "corpora": {term: len(docs) for term, docs in self.rare_corpora.items()},
                "candidates": len(self.jo_ranking),
                "selected": jo,
            },
            "fixture_hashes": dict(sorted(self.fixture_hashes.items())),
        }
        if self.link is not None:
            payload["link"] = {
                "common_terms": len(self.link.common),
                "top": [{"term": term, "score": score} for term, score in self.link.ranking.top(20)],
            }
        return payload

    def save_report(self, path: Path) -> Path:
        Path(path).write_text(json.dumps(self.report(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def ra_rank_rare(corpus: DomainPairCorpus, term_filter: SemanticTypeFilter) -> RankedList:
    """Type-filtered start-domain headings, lowest aggregated TF-IDF first."""
    documents = corpus.docs_in(DOMAIN_C)
    present = sorted({heading for doc in documents for heading in doc.mesh_headings})
    kept = filter_semantic_types(present, term_filter)
    if not kept:
        raise PipelineInapplicableError("No start-domain heading survives the Ra semantic type filter")
    ranked = heading_ranking(kept, documents)
    ascending = RankedList.from_scores(dict(ranked.items), ascending=True)
    log_event(get_logger(), "ra_ranked", {"candidates": len(ascending)})
    return ascending


def _combined(rare_corpora: Sequence[Sequence[Document]]) -> List[Document]:
    seen = set()
    combined: List[Document] = []
    for documents in rare_corpora:
        for doc in documents:
            if doc.id not in seen:
                seen.add(doc.id)
                combined.append(doc)
    return combined


def jo_joint_candidates(
    rare_corpora: Sequence[Sequence[Document]],
    config: PreprocessConfig,
    query_terms: Sequence[str] = (),
    threads: int = 1,
) -> RankedList:
    """Terms present in every rare-term literature, by aggregated TF-IDF over their union.

    Records retrieved by several rare terms count once in the union. The
    usual vocabulary rules apply: ``min_support`` over the union and no term
    built on a query word.
    """
    if len(rare_corpora) < 2:
        raise PipelineInapplicableError("Jo needs the literatures of at least two rare terms")
    combined = _combined(rare_corpora)
    counters = count_terms(combined, config, threads=threads)
    by_id = {doc.id: counter for doc, counter in zip(combined, counters)}
    support: Counter = Counter()
    for counter in counters:
        support.update(counter.keys())

    joint: Optional[set] = None
    for documents in rare_corpora:
        present = set()
        for doc in documents:
            present.update(by_id[doc.id].keys())
        joint = present if joint is None else joint & present

    exact, prefixes = get_normalizer(config).query_words(query_terms)
    terms = sorted(
        term for term in (joint or set())
        if support[term] >= config.min_support and not is_query_term(term, exact, prefixes)
    )
    if not terms:
        log_warning(get_logger(), "empty_joint_candidates", {"corpora": [len(d) for d in rare_corpora]})
        return RankedList.empty()
    matrix = count_matrix([doc.id for doc in combined], counters, terms)
    ranked = RankedList.from_scores(column_totals(tfidf(matrix)))
    log_event(get_logger(), "jo_ranked", {"documents": len(combined), "candidates": len(ranked)})
    return ranked


def run_jo(session: RaJoLinkSession, snapshot_dir: Path, threads: int = 1) -> RankedList:
    """Load one snapshot per Ra choice and rank the joint terms."""
    chosen = session.require_ra()
    requested = session.requested.get(STAGE_RA, [])
    rare: Dict[str, Tuple[Document, ...]] = {}
    for index, term in enumerate(chosen):
        alias = requested[index] if index < len(requested) else term
        path = locate_snapshot(snapshot_dir, [term, alias])
        session.fixture_hashes[path.name] = file_sha256(path)
        rare[term] = load_psv(path, label_a=term, assume_domain=DOMAIN_A).documents
    session.rare_corpora = rare
    session.jo_corpus = tuple(_combined(list(rare.values())))
    query_terms = list(chosen) + list(session.start_corpus.query_terms_c)
    session.jo_ranking = jo_joint_candidates(list(rare.values()), session.config, query_terms, threads)
    return session.jo_ranking


def link_closed(
    session: RaJoLinkSession,
    pair_corpus: DomainPairCorpus,
    config: Optional[PreprocessConfig] = None,
    threads: int = 1,
) -> LinkResult:
    """Closed discovery between the start domain and the Jo choice's domain."""
    session.require_jo()
    corpus = exclude_shared_records(pair_corpus)
    vocab = build_vocabulary(corpus, config or session.config, threads=threads)
    common = common_terms(vocab)
    ranking = ensemble_rank(common, DEFAULT_HEURISTICS, inputs=HeuristicInputs(vocab=vocab, profile=count_profile(vocab)))
    session.link = LinkResult(common=common, ranking=ranking)
    log_event(get_logger(), "link_closed", {"jo": session.choices.jo_selected, "common_terms": len(common)})
    return session.link


def acquire_choices(
    session: RaJoLinkSession,
    stage: str,
    replay: Optional[ChoiceRecord] = None,
    input_fn: Callable[[str], str] = input,
    output_fn: Callable[[str], None] = print,
) -> ChoiceRecord:
    """Fill one stage of ``session.choices``.

    With ``replay`` every choice is validated against the stage's ranking;
    without it the expert picks positions on the terminal. Stored choices are
    always exact ranking keys, so a dumped record replays the session exactly.
    """
    if stage not in (STAGE_RA, STAGE_JO):
        raise ValueError(f"Unknown RaJoLink stage {stage!r}")
    ranked = session.ra_ranking if stage == STAGE_RA else session.jo_ranking
    if stage == STAGE_JO:
        session.require_ra()
    normalizer = get_normalizer(session.config)

    if replay is not None:
        wanted = list(replay.ra_selected) if stage == STAGE_RA else ([replay.jo_selected] if replay.jo_selected else [])
        if not wanted:
            raise ChoiceValidationError("", stage, [])
        resolved = ChoiceMatcher(ranked, normalizer, stage).resolve_all(wanted)
        source = replay.source
    else:
        wanted = prompt_choices(ranked, stage, multiple=stage == STAGE_RA, input_fn=input_fn, output_fn=output_fn)
        resolved = wanted
        source = SOURCE_INTERACTIVE

    session.requested[stage] = list(wanted)
    if stage == STAGE_RA:
        session.choices = ChoiceRecord(ra_selected=tuple(resolved), jo_selected=None, source=source)
    else:
        session.choices = ChoiceRecord(ra_selected=session.choices.ra_selected, jo_selected=resolved[0], source=source)
    log_event(get_logger(), "choices_acquired", {"stage": stage, "source": source, "selected": list(resolved)})
    return session.choices
