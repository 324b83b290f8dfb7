"""Outlier-based closed discovery: PCA projection, k-means and minority-domain documents."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse
from sklearn.cluster import KMeans, kmeans_plusplus

from lbdkit.corpus import DOMAIN_A, DOMAIN_C, Document, DomainPairCorpus, save_psv
from lbdkit.errors import ConfigError, RankDeficientError
from lbdkit.logging import get_logger, log_event, log_warning
from lbdkit.textprep import TermVocabulary
from lbdkit.vectorspace import WeightedMatrix, bow, tfidf

SPACE_PCA2 = "pca2"
SPACE_FULL = "full"
SPACES = (SPACE_PCA2, SPACE_FULL)

DEFAULT_K = 2
DEFAULT_SEED = 42
DEFAULT_MIN_DF = 5
MAX_ITERATIONS = 300

POWER_MAX_ITER = 2000
POWER_TOL = 1e-11
EIGEN_FLOOR = 1e-12

Points = Union[np.ndarray, sparse.csr_matrix]


def filter_terms_by_df(matrix: WeightedMatrix, min_df: int = DEFAULT_MIN_DF) -> WeightedMatrix:
    """Keep columns whose document frequency over all rows is at least ``min_df``."""
    keep = np.flatnonzero(matrix.document_frequencies() >= min_df)
    return matrix.restrict_columns(keep.tolist())


@dataclass(frozen=True, eq=False)
class PcaProjection:
    doc_ids: Tuple[str, ...]
    coords: np.ndarray
    components: np.ndarray
    variances: np.ndarray
    mean: np.ndarray


class _CenteredCovariance:
    """Products with the covariance of ``X - mean`` without densifying ``X``."""

    def __init__(self, cells: sparse.csr_matrix) -> None:
        self.cells = cells
        self.n_rows = cells.shape[0]
        self.mean = np.asarray(cells.mean(axis=0)).ravel()
        self.ones = np.ones(self.n_rows)

    def project(self, vector: np.ndarray) -> np.ndarray:
        return np.asarray(self.cells @ vector).ravel() - float(self.mean @ vector)

    def apply(self, vector: np.ndarray) -> np.ndarray:
        projected = self.project(vector)
        back = np.asarray(self.cells.T @ projected).ravel() - self.mean * projected.sum()
        return back / (self.n_rows - 1)


def _fix_sign(vector: np.ndarray) -> np.ndarray:
    return vector if vector[int(np.argmax(np.abs(vector)))] >= 0 else -vector


def _orthogonalize(vector: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    for other in basis:
        vector = vector - float(other @ vector) * other
    return vector


def _power_iteration(cov: _CenteredCovariance, start: np.ndarray, deflate: Sequence[np.ndarray]) -> Tuple[np.ndarray, float]:
    vector = _orthogonalize(start, deflate)
    norm = np.linalg.norm(vector)
    if norm < EIGEN_FLOOR:
        return vector, 0.0
    vector = _fix_sign(vector / norm)
    for _ in range(POWER_MAX_ITER):
        nxt = _orthogonalize(cov.apply(vector), deflate)
        norm = np.linalg.norm(nxt)
        if norm < EIGEN_FLOOR:
            return vector, 0.0
        nxt = _fix_sign(nxt / norm)
        converged = np.linalg.norm(nxt - vector) < POWER_TOL
        vector = nxt
        if converged:
            break
    return vector, float(vector @ cov.apply(vector))


def _start_vector(size: int, alternate: bool = False) -> np.ndarray:
    steps = np.arange(size, dtype=np.float64)
    if alternate:
        return np.where(steps % 2 == 0, 1.0, -1.0) * (1.0 + steps / size)
    return 1.0 + steps / size


def reduce_pca2(matrix: WeightedMatrix) -> PcaProjection:
    """Top-2 principal components by power iteration with deflation.

    Components are signed so their largest-magnitude loading is positive.
    """
    n_rows, n_cols = matrix.shape
    if n_rows < 2 or n_cols < 2:
        raise RankDeficientError(f"PCA needs at least 2 documents and 2 terms, got {n_rows} x {n_cols}")
    cov = _CenteredCovariance(sparse.csr_matrix(matrix.cells, dtype=np.float64))

    first, var1 = _power_iteration(cov, _start_vector(n_cols), [])
    if var1 <= EIGEN_FLOOR:
        raise RankDeficientError("All documents have identical term vectors; there is no variance to project")
    start = _start_vector(n_cols)
    if np.linalg.norm(_orthogonalize(start / np.linalg.norm(start), [first])) < 1e-6:
        start = _start_vector(n_cols, alternate=True)
    second, var2 = _power_iteration(cov, start, [first])
    if var2 <= EIGEN_FLOOR:
        second = _orthogonalize(start, [first])
        second = _fix_sign(second / np.linalg.norm(second))
        var2 = 0.0

    components = np.vstack([first, second])
    coords = np.column_stack([cov.project(first), cov.project(second)])
    return PcaProjection(
        doc_ids=matrix.doc_ids,
        coords=coords,
        components=components,
        variances=np.array([var1, var2]),
        mean=cov.mean,
    )


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    seed: int
    doc_ids: Tuple[str, ...] = ()
    inertia_history: Tuple[float, ...] = ()
    iterations: int = 0

    def __post_init__(self) -> None:
        k = self.centroids.shape[0]
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= k):
            raise ValueError("Cluster label out of range")
        if self.doc_ids and len(self.doc_ids) != len(self.labels):
            raise ValueError("Every document needs exactly one cluster label")

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    def cluster_of(self, doc_id: str) -> int:
        return int(self.labels[self.doc_ids.index(doc_id)])

    def as_mapping(self) -> Dict[str, int]:
        return {doc_id: int(label) for doc_id, label in zip(self.doc_ids, self.labels)}


def kmeans(
    points: Points,
    k: int,
    seed: int = DEFAULT_SEED,
    doc_ids: Sequence[str] = (),
    max_iter: int = MAX_ITERATIONS,
) -> ClusterAssignment:
    """Lloyd's algorithm from a seeded k-means++ start.

    Each round is a single warm-started ``KMeans`` step so the inertia after
    every round is kept. Stops once assignments are stable or after
    ``max_iter`` rounds.
    """
    points = sparse.csr_matrix(points, dtype=np.float64) if sparse.issparse(points) else np.asarray(points, dtype=np.float64)
    n_points = points.shape[0]
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > n_points:
        raise ConfigError(f"k={k} exceeds the number of points ({n_points})")

    centroids, _ = kmeans_plusplus(points, k, random_state=seed)
    labels: Optional[np.ndarray] = None
    history: List[float] = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        step = KMeans(n_clusters=k, init=centroids, n_init=1, max_iter=1, tol=0.0, algorithm="lloyd").fit(points)
        centroids = step.cluster_centers_
        history.append(float(step.inertia_))
        stable = labels is not None and np.array_equal(step.labels_, labels)
        labels = step.labels_.astype(np.int64)
        if stable:
            break
    return ClusterAssignment(
        labels=labels,
        centroids=np.asarray(centroids),
        seed=seed,
        doc_ids=tuple(doc_ids),
        inertia_history=tuple(history),
        iterations=iterations,
    )


@dataclass(frozen=True)
class ClusterSummary:
    index: int
    size: int
    count_a: int
    count_c: int
    majority: str
    tied: bool
    outliers: Tuple[Document, ...] = field(repr=False)

    def to_dict(self) -> Dict[str, object]:
        return {
            "cluster": self.index,
            "size": self.size,
            "count_a": self.count_a,
            "count_c": self.count_c,
            "majority": self.majority,
            "tied": self.tied,
            "outliers": len(self.outliers),
        }


@dataclass(frozen=True)
class OutlierReport:
    clusters: Tuple[ClusterSummary, ...]
    seed: int
    k: int

    def outlier_documents(self) -> List[Document]:
        return [doc for cluster in self.clusters for doc in cluster.outliers]

    def outliers_in(self, domain: str) -> List[Document]:
        return [doc for doc in self.outlier_documents() if doc.domain == domain]

    def to_dict(self) -> Dict[str, object]:
        return {
            "k": self.k,
            "seed": self.seed,
            "clusters": [cluster.to_dict() for cluster in self.clusters],
            "outliers_a": len(self.outliers_in(DOMAIN_A)),
            "outliers_c": len(self.outliers_in(DOMAIN_C)),
        }


def detect_outliers(assignment: ClusterAssignment, corpus: DomainPairCorpus) -> OutlierReport:
    """Minority-domain documents of every cluster; a tied cluster counts A as its majority."""
    if len(assignment.labels) != len(corpus.documents):
        raise ValueError("Cluster labels are not aligned with the corpus documents")
    logger = get_logger()
    summaries: List[ClusterSummary] = []
    for cluster in range(assignment.k):
        members = [doc for doc, label in zip(corpus.documents, assignment.labels) if label == cluster]
        count_a = sum(1 for doc in members if doc.domain == DOMAIN_A)
        count_c = len(members) - count_a
        tied = count_a == count_c and count_a > 0
        majority = DOMAIN_A if count_a >= count_c else DOMAIN_C
        if tied:
            log_warning(logger, "cluster_majority_tie", {"cluster": cluster, "size": len(members)})
        summaries.append(
            ClusterSummary(
                index=cluster,
                size=len(members),
                count_a=count_a,
                count_c=count_c,
                majority=majority,
                tied=tied,
                outliers=tuple(doc for doc in members if doc.domain != majority),
            )
        )
    report = OutlierReport(clusters=tuple(summaries), seed=assignment.seed, k=assignment.k)
    log_event(logger, "outliers_detected", report.to_dict())
    return report


def export_outliers(report: OutlierReport, path: Path) -> Path:
    return save_psv(report.outlier_documents(), path)


def export_scatter(projection: PcaProjection, assignment: ClusterAssignment, corpus: DomainPairCorpus, path: Path) -> Path:
    frame = pd.DataFrame(
        {
            "doc_id": list(projection.doc_ids),
            "x": projection.coords[:, 0],
            "y": projection.coords[:, 1],
            "cluster": assignment.labels.astype(int),
            "domain": [doc.domain for doc in corpus.documents],
        },
        columns=["doc_id", "x", "y", "cluster", "domain"],
    )
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    return path


@dataclass(frozen=True, eq=False)
class OutlierRun:
    matrix: WeightedMatrix
    projection: PcaProjection
    assignment: ClusterAssignment
    report: OutlierReport
    space: str

    def summary(self) -> Dict[str, object]:
        payload = self.report.to_dict()
        payload.update(
            {
                "space": self.space,
                "terms": self.matrix.shape[1],
                "documents": self.matrix.shape[0],
                "explained_variance": [round(float(v), 10) for v in self.projection.variances],
                "iterations": self.assignment.iterations,
            }
        )
        return payload

    def save_summary(self, path: Path) -> Path:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def run_outlier_detection(
    corpus: DomainPairCorpus,
    vocab: TermVocabulary,
    k: int = DEFAULT_K,
    seed: int = DEFAULT_SEED,
    min_df: int = DEFAULT_MIN_DF,
    space: str = SPACE_PCA2,
    threads: int = 1,
) -> OutlierRun:
    if space not in SPACES:
        raise ConfigError(f"space must be one of {', '.join(SPACES)}, got {space!r}")
    counts = filter_terms_by_df(bow(corpus, vocab, threads=threads), min_df)
    weighted = tfidf(counts)
    projection = reduce_pca2(weighted)
    points: Points = projection.coords if space == SPACE_PCA2 else weighted.cells
    assignment = kmeans(points, k, seed=seed, doc_ids=weighted.doc_ids)
    report = detect_outliers(assignment, corpus)
    return OutlierRun(matrix=weighted, projection=projection, assignment=assignment, report=report, space=space)
