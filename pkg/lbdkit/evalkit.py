"""Ranked lists, ROC curves, Mann-Whitney AUC and Borda rank aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from lbdkit.errors import EmptyIntersectionError, RankLookupError

BORDA = "borda"
AGGREGATION_METHODS = (BORDA,)


@dataclass(frozen=True)
class RankedList:
    """Ordered (key, score) pairs.

    Descending lists sort by score then key; ascending lists by score
    ascending then key. Either way equal scores are ordered lexicographically.
    """

    items: Tuple[Tuple[str, float], ...]
    ascending: bool = False

    def __post_init__(self) -> None:
        seen = set()
        for index, (key, _score) in enumerate(self.items):
            if key in seen:
                raise ValueError(f"Duplicate key {key!r} in ranked list")
            seen.add(key)
            if index == 0:
                continue
            prev_key, prev_score = self.items[index - 1]
            _, score = self.items[index]
            out_of_order = score > prev_score if not self.ascending else score < prev_score
            if out_of_order or (score == prev_score and key < prev_key):
                raise ValueError(f"Ranked list is not ordered at position {index + 1} ({key!r})")

    @classmethod
    def from_scores(cls, scores: Mapping[str, float], ascending: bool = False) -> "RankedList":
        sign = 1.0 if ascending else -1.0
        ordered = sorted(((str(k), float(v)) for k, v in scores.items()), key=lambda kv: (sign * kv[1], kv[0]))
        return cls(items=tuple(ordered), ascending=ascending)

    @classmethod
    def empty(cls) -> "RankedList":
        return cls(items=())

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Tuple[str, float]]:
        return iter(self.items)

    def __contains__(self, key: object) -> bool:
        return key in self._positions

    @property
    def _positions(self) -> Dict[str, int]:
        cached = self.__dict__.get("_position_cache")
        if cached is None:
            cached = {key: index + 1 for index, (key, _) in enumerate(self.items)}
            object.__setattr__(self, "_position_cache", cached)
        return cached

    def keys(self) -> List[str]:
        return [key for key, _ in self.items]

    def scores(self) -> List[float]:
        return [score for _, score in self.items]

    def score_of(self, key: str) -> float:
        return self.items[self.position_of(key) - 1][1]

    def position_of(self, key: str) -> int:
        position = self._positions.get(key)
        if position is None:
            raise RankLookupError(f"'{key}' is not in the ranked list")
        return position

    def top(self, n: int) -> "RankedList":
        return RankedList(items=self.items[:n], ascending=self.ascending)

    def restrict(self, keys: Iterable[str]) -> "RankedList":
        allowed = set(keys)
        return RankedList(items=tuple(item for item in self.items if item[0] in allowed), ascending=self.ascending)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"key": self.keys(), "score": self.scores(), "rank": list(range(1, len(self) + 1))},
            columns=["key", "score", "rank"],
        )


def position_of(key: str, ranked: RankedList) -> int:
    return ranked.position_of(key)


@dataclass(frozen=True)
class RocCurve:
    points: Tuple[Tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.points or self.points[0] != (0.0, 0.0) or self.points[-1] != (1.0, 1.0):
            raise ValueError("ROC curve must run from (0, 0) to (1, 1)")
        for (x0, y0), (x1, y1) in zip(self.points, self.points[1:]):
            if x1 < x0 or y1 < y0:
                raise ValueError("ROC coordinates must be non-decreasing")

    @property
    def fpr(self) -> List[float]:
        return [x for x, _ in self.points]

    @property
    def tpr(self) -> List[float]:
        return [y for _, y in self.points]


def _tie_groups(ranked: RankedList) -> np.ndarray:
    """Group index per item: consecutive equal scores share a group, 0 is the best."""
    groups = np.zeros(len(ranked), dtype=np.int64)
    scores = ranked.scores()
    for index in range(1, len(scores)):
        groups[index] = groups[index - 1] + (0 if scores[index] == scores[index - 1] else 1)
    return groups


def _labels(ranked: RankedList, positives: Iterable[str]) -> np.ndarray:
    wanted = set(positives)
    labels = np.array([key in wanted for key in ranked.keys()], dtype=bool)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("ROC/AUC needs at least one positive in the ranking")
    if n_pos == len(labels):
        raise ValueError("ROC/AUC needs at least one negative in the ranking")
    return labels


def roc_curve(ranked: RankedList, positives: Iterable[str]) -> RocCurve:
    """Threshold sweep over the list order; a run of tied scores is one step.

    Positives absent from the ranking are ignored.
    """
    labels = _labels(ranked, positives)
    groups = _tie_groups(ranked)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    points: List[Tuple[float, float]] = [(0.0, 0.0)]
    tp = fp = 0
    for index in range(len(labels)):
        if labels[index]:
            tp += 1
        else:
            fp += 1
        last_of_group = index == len(labels) - 1 or groups[index + 1] != groups[index]
        if last_of_group:
            points.append((fp / n_neg, tp / n_pos))
    return RocCurve(points=tuple(points))


def auc(ranked: RankedList, positives: Iterable[str]) -> float:
    """Mann-Whitney AUC with half credit for ties, on list order."""
    labels = _labels(ranked, positives)
    effective = -_tie_groups(ranked).astype(np.float64)
    ranks = rankdata(effective, method="average")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    u_stat = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))


def auc_trapezoid(curve: RocCurve) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(curve.points, curve.points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def rank_aggregate(lists: Sequence[RankedList], method: str = BORDA) -> RankedList:
    """Borda count over the keys every list shares: score = sum of (n - rank)."""
    if method not in AGGREGATION_METHODS:
        raise ValueError(f"Unknown aggregation method {method!r}")
    if not lists:
        raise EmptyIntersectionError("No ranked lists to aggregate")
    common = set(lists[0].keys())
    for ranked in lists[1:]:
        common &= set(ranked.keys())
    if not common:
        raise EmptyIntersectionError("Ranked lists share no keys")
    size = len(common)
    scores: Dict[str, float] = {key: 0.0 for key in common}
    for ranked in lists:
        restricted = [key for key in ranked.keys() if key in common]
        for position, key in enumerate(restricted, start=1):
            scores[key] += size - position
    return RankedList.from_scores(scores)


def export_roc_csv(curve: RocCurve, path: Path) -> Path:
    pd.DataFrame({"fpr": curve.fpr, "tpr": curve.tpr}, columns=["fpr", "tpr"]).to_csv(
        path, index=False, lineterminator="\n", float_format="%.10g"
    )
    return path


def render_roc_svg(curve: RocCurve, path: Path, title: str = "", size: int = 320) -> Path:
    margin = 30
    span = size - 2 * margin
    coords = " ".join(
        f"{margin + x * span:.2f},{size - margin - y * span:.2f}" for x, y in curve.points
    )
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="{margin}" y="{margin}" width="{span}" height="{span}" fill="none" stroke="#888"/>',
        f'<line x1="{margin}" y1="{size - margin}" x2="{size - margin}" y2="{margin}" stroke="#ccc" stroke-dasharray="4"/>',
        f'<polyline points="{coords}" fill="none" stroke="#1f5fbf" stroke-width="2"/>',
        f'<text x="{margin}" y="{margin - 10}" font-size="12">{escape(title)}</text>',
        f'<text x="{size / 2:.0f}" y="{size - 8}" font-size="11" text-anchor="middle">FPR</text>',
        f'<text x="10" y="{size / 2:.0f}" font-size="11">TPR</text>',
        "</svg>",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
