"""Citation-network link prediction with time-sliced evaluation."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date
from itertools import combinations
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from lbdkit.corpus import Document, RowRejection
from lbdkit.errors import (
    ConfigError,
    CorpusLoadError,
    FixtureMissingError,
    InsufficientNegativesError,
    PipelineInapplicableError,
    UnknownNodeError,
)
from lbdkit.evalkit import RankedList, auc
from lbdkit.logging import get_logger, log_event, log_warning

REFERENCE_COLUMNS = ("citing_id", "cited_id", "cited_pub_date")
DEFAULT_TEST_SIZE = 1000
DEFAULT_SEED = 42
PRECISION_KS = (10, 50, 100)
ENUMERATION_LIMIT = 200_000

Pair = Tuple[str, str]


@dataclass(frozen=True)
class Reference:
    citing_id: str
    cited_id: str
    cited_pub_date: date


def pair_of(u: str, v: str) -> Pair:
    return (u, v) if u <= v else (v, u)


def pair_key(pair: Pair) -> str:
    return f"{pair[0]}|{pair[1]}"


def load_references(path: Path) -> Tuple[List[Reference], List[RowRejection]]:
    """Read a ``citing_id|cited_id|cited_pub_date`` snapshot; bad rows are returned, not raised."""
    path = Path(path)
    if not path.exists():
        raise FixtureMissingError(path, "reference snapshot")
    try:
        frame = pd.read_csv(
            path, sep="|", dtype=str, keep_default_na=False, quoting=csv.QUOTE_NONE, compression="infer"
        )
    except pd.errors.EmptyDataError as exc:
        raise CorpusLoadError(f"{path}: file has no header row") from exc
    except (OSError, EOFError, UnicodeDecodeError, pd.errors.ParserError) as exc:
        raise CorpusLoadError(f"{path}: unreadable reference snapshot ({exc})") from exc
    missing = [name for name in REFERENCE_COLUMNS if name not in frame.columns]
    if missing:
        raise CorpusLoadError(f"{path}: missing columns {', '.join(missing)}")

    references: List[Reference] = []
    rejections: List[RowRejection] = []
    for offset, (citing, cited, raw_date) in enumerate(zip(frame["citing_id"], frame["cited_id"], frame["cited_pub_date"])):
        line = offset + 2
        citing, cited = citing.strip(), cited.strip()
        if not citing or not cited:
            rejections.append(RowRejection(line=line, reason="missing id", pmid=citing))
            continue
        try:
            cited_date = date.fromisoformat(raw_date.strip())
        except ValueError:
            rejections.append(RowRejection(line=line, reason=f"unparsable date {raw_date!r}", pmid=citing))
            continue
        references.append(Reference(citing_id=citing, cited_id=cited, cited_pub_date=cited_date))
    log_event(get_logger(), "references_loaded", {"path": str(path), "rows": len(references), "rejected": len(rejections)})
    return references, rejections


@dataclass(frozen=True, eq=False)
class CitationNetwork:
    graph: nx.Graph
    cutoff: Optional[date] = None
    citing: FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        if nx.number_of_selfloops(self.graph):
            raise ValueError("Citation network must not contain self-loops")
        if not nx.is_frozen(self.graph):
            object.__setattr__(self, "graph", nx.freeze(self.graph))

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Pair],
        nodes: Iterable[str] = (),
        cutoff: Optional[date] = None,
        citing: Iterable[str] = (),
    ) -> "CitationNetwork":
        graph = nx.Graph()
        graph.add_nodes_from(sorted(set(nodes)))
        graph.add_edges_from(sorted(pair_of(u, v) for u, v in edges if u != v))
        return cls(graph=graph, cutoff=cutoff, citing=frozenset(citing))

    @property
    def nodes(self) -> FrozenSet[str]:
        return frozenset(self.graph.nodes)

    @property
    def edges(self) -> FrozenSet[Pair]:
        return frozenset(pair_of(u, v) for u, v in self.graph.edges)

    def has_edge(self, u: str, v: str) -> bool:
        return self.graph.has_edge(u, v)

    def neighbors(self, node: str) -> FrozenSet[str]:
        if node not in self.graph:
            raise UnknownNodeError(f"Node '{node}' is not in the network")
        return frozenset(self.graph.adj[node])


@dataclass(frozen=True, eq=False)
class TimeSlicedSplit:
    train: CitationNetwork
    test_edges: FrozenSet[Pair]
    rejected: Tuple[RowRejection, ...] = ()
    unevaluable: int = 0

    def __post_init__(self) -> None:
        overlap = [pair for pair in self.test_edges if self.train.has_edge(*pair)]
        if overlap:
            raise ValueError(f"{len(overlap)} test edges are already training edges")
        stray = [pair for pair in self.test_edges if pair[0] not in self.train.graph or pair[1] not in self.train.graph]
        if stray:
            raise ValueError(f"{len(stray)} test edges touch nodes outside the training network")

    def summary(self) -> Dict[str, object]:
        return {
            "train_nodes": self.train.graph.number_of_nodes(),
            "train_edges": self.train.graph.number_of_edges(),
            "test_edges": len(self.test_edges),
            "rejected": len(self.rejected),
            "unevaluable": self.unevaluable,
        }


def build_network(
    docs: Sequence[Document],
    references: Sequence[Reference],
    cutoff: date,
    test_size: int = DEFAULT_TEST_SIZE,
) -> TimeSlicedSplit:
    """Split citation edges at ``cutoff``.

    An edge is dated by ``cited_pub_date``, the publication date of the cited
    work, not by the citing document. Edges dated on or before the cutoff
    form the training network together with every document published by
    then, so a later document joins training through its references to older
    work. The first ``test_size`` later edges (by date, then ids) whose
    endpoints both exist in training form the test set; later edges touching
    unseen nodes are counted as unevaluable.
    """
    known = {doc.id for doc in docs}
    rejected: List[RowRejection] = []
    train_rows: List[Reference] = []
    later_rows: List[Reference] = []
    for index, ref in enumerate(references):
        if ref.citing_id not in known:
            rejected.append(RowRejection(line=index + 2, reason="citing id is not a corpus document", pmid=ref.citing_id))
        elif ref.citing_id == ref.cited_id:
            rejected.append(RowRejection(line=index + 2, reason="self citation", pmid=ref.citing_id))
        elif ref.cited_pub_date <= cutoff:
            train_rows.append(ref)
        else:
            later_rows.append(ref)
    if rejected:
        log_warning(get_logger(), "references_rejected", {"count": len(rejected), "first": rejected[0].reason})

    train_nodes = {doc.id for doc in docs if doc.pub_date <= cutoff}
    train_edges = {pair_of(ref.citing_id, ref.cited_id) for ref in train_rows}
    for u, v in train_edges:
        train_nodes.update((u, v))
    train = CitationNetwork.from_edges(train_edges, train_nodes, cutoff, citing=known)

    test: List[Pair] = []
    seen = set(train_edges)
    unevaluable = 0
    for ref in sorted(later_rows, key=lambda r: (r.cited_pub_date, r.citing_id, r.cited_id)):
        if len(test) >= test_size:
            break
        pair = pair_of(ref.citing_id, ref.cited_id)
        if pair in seen:
            continue
        seen.add(pair)
        if pair[0] not in train_nodes or pair[1] not in train_nodes:
            unevaluable += 1
            continue
        test.append(pair)
    split = TimeSlicedSplit(train=train, test_edges=frozenset(test), rejected=tuple(rejected), unevaluable=unevaluable)
    log_event(get_logger(), "network_built", split.summary())
    return split


MEASURES: Dict[str, Callable[[CitationNetwork, str, str], float]] = {}
link_measure = lambda f: MEASURES.setdefault(f.__name__, f)  # noqa: E731


def _neighborhoods(net: CitationNetwork, u: str, v: str) -> Tuple[FrozenSet[str], FrozenSet[str]]:
    if u == v:
        raise ValueError("Proximity is defined for two distinct nodes")
    return net.neighbors(u), net.neighbors(v)


@link_measure
def common_neighbors(net: CitationNetwork, u: str, v: str) -> float:
    gamma_u, gamma_v = _neighborhoods(net, u, v)
    return float(len(gamma_u & gamma_v))


@link_measure
def jaccard(net: CitationNetwork, u: str, v: str) -> float:
    gamma_u, gamma_v = _neighborhoods(net, u, v)
    union = gamma_u | gamma_v
    if not union:
        return 0.0
    return len(gamma_u & gamma_v) / len(union)


@link_measure
def adamic_adar(net: CitationNetwork, u: str, v: str) -> float:
    """Sum of 1/ln(deg z) over common neighbours z; degree-1 neighbours add nothing."""
    gamma_u, gamma_v = _neighborhoods(net, u, v)
    total = 0.0
    for node in sorted(gamma_u & gamma_v):
        degree = net.graph.degree(node)
        if degree >= 2:
            total += 1.0 / math.log(degree)
    return total


Measure = Union[str, Callable[[CitationNetwork, str, str], float]]


def get_measure(measure: Measure) -> Callable[[CitationNetwork, str, str], float]:
    if callable(measure):
        return measure
    try:
        return MEASURES[measure]
    except KeyError as exc:
        raise ConfigError(f"Unknown measure '{measure}'; expected one of {', '.join(sorted(MEASURES))}") from exc


def score_pairs(net: CitationNetwork, pairs: Iterable[Pair], measure: Measure) -> Dict[Pair, float]:
    scorer = get_measure(measure)
    return {pair: float(scorer(net, pair[0], pair[1])) for pair in sorted(set(pairs))}


def co_citation_projection(split: TimeSlicedSplit) -> TimeSlicedSplit:
    """Reference-reference network: two references are linked when one document cites both.

    Edge weights count the shared citing documents. Test pairs are the
    co-citations that only appear once the test edges are added.
    """
    citing = split.train.citing

    def _project(graph: nx.Graph) -> nx.Graph:
        projected = nx.Graph()
        for doc in sorted(node for node in graph.nodes if node in citing):
            cited = sorted(node for node in graph.adj[doc] if node not in citing)
            for u, v in combinations(cited, 2):
                weight = projected.get_edge_data(u, v, {"weight": 0})["weight"]
                projected.add_edge(u, v, weight=weight + 1)
        return projected

    train_graph = nx.Graph(split.train.graph)
    projected_train = _project(train_graph)
    projected_train.add_nodes_from(sorted(n for n in train_graph.nodes if n not in citing))
    full = nx.Graph(train_graph)
    full.add_edges_from(sorted(split.test_edges))
    projected_full = _project(full)
    test = {
        pair_of(u, v)
        for u, v in projected_full.edges
        if not projected_train.has_edge(u, v) and u in projected_train and v in projected_train
    }
    network = CitationNetwork(graph=projected_train, cutoff=split.train.cutoff, citing=frozenset())
    return TimeSlicedSplit(train=network, test_edges=frozenset(test), rejected=split.rejected, unevaluable=split.unevaluable)


def _is_open(pair: Pair, net: CitationNetwork, test: FrozenSet[Pair]) -> bool:
    return pair not in test and not net.has_edge(*pair)


def sample_negatives(split: TimeSlicedSplit, count: int, seed: int = DEFAULT_SEED) -> List[Pair]:
    """``count`` training-node pairs linked neither in training nor in test, drawn with ``seed``."""
    net = split.train
    nodes = sorted(net.nodes)
    n_nodes = len(nodes)
    possible = n_nodes * (n_nodes - 1) // 2 - net.graph.number_of_edges() - len(split.test_edges)
    if possible < count:
        raise InsufficientNegativesError(f"Only {possible} unlinked pairs for {count} positives")
    rng = np.random.default_rng(seed)
    if n_nodes * (n_nodes - 1) // 2 <= ENUMERATION_LIMIT:
        pool = [pair for pair in combinations(nodes, 2) if _is_open(pair, net, split.test_edges)]
        picks = rng.choice(len(pool), size=count, replace=False)
        return sorted(pool[int(i)] for i in picks)
    chosen: set = set()
    while len(chosen) < count:
        i, j = (int(x) for x in rng.integers(n_nodes, size=2))
        if i == j:
            continue
        pair = pair_of(nodes[i], nodes[j])
        if _is_open(pair, net, split.test_edges):
            chosen.add(pair)
    return sorted(chosen)


@dataclass
class LinkEvaluation:
    measure: str
    auc: float
    precision_at_k: Dict[int, float]
    seed: int
    positives: int
    negatives: int
    scores: Dict[Pair, float] = field(default_factory=dict, repr=False)

    def to_dict(self) -> Dict[str, object]:
        return {
            "measure": self.measure,
            "auc": self.auc,
            "precision_at_k": {str(k): v for k, v in sorted(self.precision_at_k.items())},
            "seed": self.seed,
            "positives": self.positives,
            "negatives": self.negatives,
        }

    def save(self, path: Path) -> Path:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def evaluate_time_sliced(
    split: TimeSlicedSplit,
    measure: Measure,
    seed: int = DEFAULT_SEED,
    ks: Sequence[int] = PRECISION_KS,
) -> LinkEvaluation:
    """AUC and precision@k of ``measure`` on test edges against an equal-size negative sample."""
    if not split.test_edges:
        raise PipelineInapplicableError("Time-sliced evaluation needs at least one test edge")
    scorer = get_measure(measure)
    positives = sorted(split.test_edges)
    negatives = sample_negatives(split, len(positives), seed)
    scores = score_pairs(split.train, positives + negatives, scorer)
    ranked = RankedList.from_scores({pair_key(pair): score for pair, score in scores.items()})
    positive_keys = {pair_key(pair) for pair in positives}
    precision = {}
    for k in ks:
        top = ranked.keys()[:k]
        precision[k] = sum(1 for key in top if key in positive_keys) / len(top) if top else 0.0
    name = measure if isinstance(measure, str) else getattr(measure, "__name__", "custom")
    evaluation = LinkEvaluation(
        measure=name,
        auc=auc(ranked, positive_keys),
        precision_at_k=precision,
        seed=seed,
        positives=len(positives),
        negatives=len(negatives),
        scores=scores,
    )
    log_event(get_logger(), "link_prediction_evaluated", evaluation.to_dict())
    return evaluation


def write_scored_pairs(evaluation: LinkEvaluation, split: TimeSlicedSplit, path: Path) -> Path:
    rows = [
        {"u": u, "v": v, "score": score, "label": int((u, v) in split.test_edges)}
        for (u, v), score in sorted(evaluation.scores.items())
    ]
    pd.DataFrame(rows, columns=["u", "v", "score", "label"]).to_csv(
        path, sep="|", index=False, lineterminator="\n", float_format="%.10g"
    )
    return path
