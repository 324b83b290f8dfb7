"""Bridging-term ranking with elementary heuristics and a rank-voting ensemble."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from lbdkit.closed_abc import CommonTermSet
from lbdkit.corpus import GoldStandard
from lbdkit.errors import ConfigError, EmptyGoldError, MatrixKindError, NotACandidateError
from lbdkit.evalkit import RankedList, auc, export_roc_csv, render_roc_svg, roc_curve
from lbdkit.logging import get_logger, log_event, log_warning
from lbdkit.textprep import TermVocabulary
from lbdkit.vectorspace import COUNTS, DomainProfile

FREQ_TERM = "freqTerm"
FREQ_DOC = "freqDoc"
FREQ_RATIO = "freqRatio"
ENSEMBLE = "ensemble"


@dataclass(frozen=True)
class HeuristicInputs:
    vocab: TermVocabulary
    profile: DomainProfile


@dataclass(frozen=True)
class HeuristicSpec:
    name: str
    scorer: Callable[[str, HeuristicInputs], float] = field(compare=False, repr=False)
    higher_is_better: bool = True


HEURISTICS: Dict[str, HeuristicSpec] = {}


def register_heuristic(name: str, higher_is_better: bool = True):
    """Register ``func(term, inputs) -> float`` under ``name``."""

    def decorator(func: Callable[[str, HeuristicInputs], float]):
        HEURISTICS[name] = HeuristicSpec(name=name, scorer=func, higher_is_better=higher_is_better)
        return func

    return decorator


def get_heuristic(name: Union[str, HeuristicSpec]) -> HeuristicSpec:
    if isinstance(name, HeuristicSpec):
        return name
    try:
        return HEURISTICS[name]
    except KeyError as exc:
        raise ConfigError(f"Unknown heuristic '{name}'; expected one of {', '.join(sorted(HEURISTICS))}") from exc


def count_profile(vocab: TermVocabulary) -> DomainProfile:
    """Per-domain occurrence totals; equal to aggregating the bag-of-words matrix."""
    return DomainProfile(
        terms=vocab.terms,
        weight_a=np.array([vocab.tf_a[t] for t in vocab.terms], dtype=np.float64),
        weight_c=np.array([vocab.tf_c[t] for t in vocab.terms], dtype=np.float64),
        kind=COUNTS,
    )


def _both_positive(term: str, pair: Tuple[float, float]) -> Tuple[float, float]:
    a, c = pair
    if a <= 0 or c <= 0:
        raise NotACandidateError(f"'{term}' does not occur in both domains")
    return a, c


def score_freq_term(term: str, profile: DomainProfile) -> float:
    if profile.kind != COUNTS:
        raise MatrixKindError("freqTerm needs a profile of raw counts")
    a, c = _both_positive(term, profile.get(term))
    return float(min(a, c))


def score_freq_doc(term: str, vocab: TermVocabulary) -> float:
    a, c = _both_positive(term, vocab.df(term))
    return float(min(a, c))


def score_freq_ratio(term: str, vocab: TermVocabulary) -> float:
    a, c = _both_positive(term, vocab.df(term))
    return min(a, c) / max(a, c)


@register_heuristic(FREQ_TERM)
def _freq_term(term: str, inputs: HeuristicInputs) -> float:
    return score_freq_term(term, inputs.profile)


@register_heuristic(FREQ_DOC)
def _freq_doc(term: str, inputs: HeuristicInputs) -> float:
    return score_freq_doc(term, inputs.vocab)


@register_heuristic(FREQ_RATIO)
def _freq_ratio(term: str, inputs: HeuristicInputs) -> float:
    return score_freq_ratio(term, inputs.vocab)


DEFAULT_HEURISTICS = (FREQ_TERM, FREQ_DOC, FREQ_RATIO)


def _candidate_keys(candidates: CommonTermSet) -> List[str]:
    return sorted(candidates.terms)


def heuristic_scores(candidates: CommonTermSet, spec: HeuristicSpec, inputs: HeuristicInputs) -> Dict[str, float]:
    return {term: float(spec.scorer(term, inputs)) for term in _candidate_keys(candidates)}


def heuristic_ranking(candidates: CommonTermSet, spec: Union[str, HeuristicSpec], inputs: HeuristicInputs) -> RankedList:
    spec = get_heuristic(spec)
    scores = heuristic_scores(candidates, spec, inputs)
    return RankedList.from_scores(scores, ascending=not spec.higher_is_better)


def ensemble_rank(
    candidates: CommonTermSet,
    heuristics: Sequence[Union[str, HeuristicSpec]],
    weights: Optional[Sequence[float]] = None,
    inputs: Optional[HeuristicInputs] = None,
) -> RankedList:
    """Weighted normalized-rank vote.

    Each heuristic ranks the candidates (average rank on ties) and contributes
    ``weight * (1 - (rank - 1) / (n - 1))``.
    """
    specs = [get_heuristic(h) for h in heuristics]
    if not specs:
        raise ConfigError("ensemble_rank needs at least one heuristic")
    weights = [1.0] * len(specs) if weights is None else [float(w) for w in weights]
    if len(weights) != len(specs):
        raise ConfigError(f"{len(specs)} heuristics but {len(weights)} weights")
    if any(w <= 0 for w in weights):
        raise ConfigError("Heuristic weights must be positive")

    keys = _candidate_keys(candidates)
    if not keys:
        return RankedList.empty()
    if len(keys) == 1:
        return RankedList.from_scores({keys[0]: float(sum(weights))})
    if inputs is None:
        raise ValueError("ensemble_rank needs heuristic inputs for more than one candidate")

    size = len(keys)
    total = np.zeros(size, dtype=np.float64)
    for spec, weight in zip(specs, weights):
        raw = np.array([spec.scorer(term, inputs) for term in keys], dtype=np.float64)
        ranks = rankdata(-raw if spec.higher_is_better else raw, method="average")
        total += weight * (1.0 - (ranks - 1.0) / (size - 1.0))
    return RankedList.from_scores(dict(zip(keys, total.tolist())))


@dataclass
class HeuristicEvaluation:
    rankings: Dict[str, RankedList]
    aucs: Dict[str, float]
    gold_positions: Dict[str, Dict[str, int]]
    gold_missing: List[str]

    def best_elementary(self) -> Tuple[str, float]:
        elementary = {name: value for name, value in self.aucs.items() if name != ENSEMBLE}
        name = max(sorted(elementary), key=lambda key: elementary[key])
        return name, elementary[name]

    def to_dict(self) -> dict:
        return {
            "aucs": dict(sorted(self.aucs.items())),
            "gold_positions": {name: dict(sorted(pos.items())) for name, pos in sorted(self.gold_positions.items())},
            "gold_missing": list(self.gold_missing),
            "candidates": len(self.rankings.get(ENSEMBLE, RankedList.empty())),
        }


def evaluate_heuristics(
    candidates: CommonTermSet,
    inputs: HeuristicInputs,
    gold: GoldStandard,
    heuristics: Sequence[Union[str, HeuristicSpec]] = DEFAULT_HEURISTICS,
    weights: Optional[Sequence[float]] = None,
) -> HeuristicEvaluation:
    """AUC of every elementary heuristic and of their ensemble against the gold terms."""
    logger = get_logger()
    positives = sorted(gold.term_set & candidates.terms)
    missing = sorted(gold.term_set - candidates.terms)
    if not positives:
        raise EmptyGoldError(f"No {gold.dataset_name} gold term is among the {len(candidates)} candidates")
    if missing:
        log_warning(logger, "gold_terms_not_candidates", {"count": len(missing), "terms": missing})

    specs = [get_heuristic(h) for h in heuristics]
    rankings: Dict[str, RankedList] = {spec.name: heuristic_ranking(candidates, spec, inputs) for spec in specs}
    rankings[ENSEMBLE] = ensemble_rank(candidates, specs, weights, inputs)

    aucs = {name: auc(ranked, positives) for name, ranked in rankings.items()}
    positions = {name: {term: ranked.position_of(term) for term in positives} for name, ranked in rankings.items()}
    evaluation = HeuristicEvaluation(rankings=rankings, aucs=aucs, gold_positions=positions, gold_missing=missing)
    log_event(logger, "heuristics_evaluated", {"aucs": evaluation.to_dict()["aucs"]})
    return evaluation


def ranking_frame(ranked: RankedList, gold: Optional[GoldStandard] = None) -> pd.DataFrame:
    frame = ranked.to_frame().rename(columns={"key": "term"})
    gold_terms = gold.term_set if gold else frozenset()
    frame["is_gold"] = [int(term in gold_terms) for term in frame["term"]]
    return frame[["term", "score", "rank", "is_gold"]]


def write_ranking(ranked: RankedList, path: Path, gold: Optional[GoldStandard] = None) -> Path:
    ranking_frame(ranked, gold).to_csv(path, sep="|", index=False, lineterminator="\n", float_format="%.10g")
    return path


def export_roc(ranked: RankedList, gold: GoldStandard, csv_path: Path, svg_path: Optional[Path] = None) -> Path:
    curve = roc_curve(ranked, gold.term_set & set(ranked.keys()))
    export_roc_csv(curve, csv_path)
    if svg_path is not None:
        render_roc_svg(curve, svg_path, title=f"{gold.dataset_name} ensemble ROC")
    return csv_path
