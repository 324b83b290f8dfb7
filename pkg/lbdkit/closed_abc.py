"""ABC closed discovery: terms shared by both literatures."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Tuple

import pandas as pd

from lbdkit.corpus import GoldStandard
from lbdkit.errors import EmptyGoldError
from lbdkit.logging import get_logger, log_event
from lbdkit.textprep import TermVocabulary


@dataclass(frozen=True)
class CommonTerm:
    term: str
    df_a: int
    df_c: int

    def __post_init__(self) -> None:
        if self.df_a < 1 or self.df_c < 1:
            raise ValueError(f"'{self.term}' is not present in both domains")

    @property
    def balance(self) -> int:
        return min(self.df_a, self.df_c)


@dataclass(frozen=True)
class CommonTermSet:
    """Common terms ordered by min(df_a, df_c) descending, then term."""

    members: Tuple[CommonTerm, ...]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[CommonTerm]:
        return iter(self.members)

    def __contains__(self, term: object) -> bool:
        return term in self.terms

    @property
    def terms(self) -> frozenset:
        cached = self.__dict__.get("_terms")
        if cached is None:
            cached = frozenset(member.term for member in self.members)
            object.__setattr__(self, "_terms", cached)
        return cached

    def ordered_terms(self) -> List[str]:
        return [member.term for member in self.members]

    def to_frame(self, gold: Optional[GoldStandard] = None) -> pd.DataFrame:
        gold_terms = gold.term_set if gold else frozenset()
        return pd.DataFrame(
            {
                "term": [m.term for m in self.members],
                "df_a": [m.df_a for m in self.members],
                "df_c": [m.df_c for m in self.members],
                "is_gold": [int(m.term in gold_terms) for m in self.members],
            },
            columns=["term", "df_a", "df_c", "is_gold"],
        )


def _ordered(members: Iterable[CommonTerm]) -> Tuple[CommonTerm, ...]:
    return tuple(sorted(members, key=lambda m: (-m.balance, m.term)))


def common_terms(vocab: TermVocabulary) -> CommonTermSet:
    members = [
        CommonTerm(term=term, df_a=vocab.df_a[term], df_c=vocab.df_c[term])
        for term in vocab.terms
        if vocab.df_a[term] > 0 and vocab.df_c[term] > 0
    ]
    common = CommonTermSet(members=_ordered(members))
    log_event(get_logger(), "common_terms", {"count": len(common)})
    return common


@dataclass(frozen=True)
class GoldRecoveryReport:
    dataset_name: str
    hits: Tuple[str, ...]
    misses: Tuple[str, ...]
    recall: float

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_name,
            "hits": list(self.hits),
            "misses": list(self.misses),
            "recall": self.recall,
        }


def check_gold_recovery(common: CommonTermSet, gold: GoldStandard) -> GoldRecoveryReport:
    """Recall over the distinct normalized gold terms."""
    gold_terms = gold.term_set
    if not gold_terms:
        raise EmptyGoldError(f"Gold standard for {gold.dataset_name} has no terms")
    hits = tuple(sorted(gold_terms & common.terms))
    misses = tuple(sorted(gold_terms - common.terms))
    report = GoldRecoveryReport(
        dataset_name=gold.dataset_name,
        hits=hits,
        misses=misses,
        recall=len(hits) / len(gold_terms),
    )
    log_event(get_logger(), "gold_recovery", report.to_dict())
    return report


def write_common_terms(common: CommonTermSet, path: Path, gold: Optional[GoldStandard] = None) -> Path:
    common.to_frame(gold).to_csv(path, sep="|", index=False, lineterminator="\n")
    return path
