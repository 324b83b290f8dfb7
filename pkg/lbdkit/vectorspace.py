from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy import sparse

from lbdkit.corpus import DOMAIN_A, DOMAIN_C, DomainPairCorpus
from lbdkit.errors import MatrixKindError, VocabularyMismatchError
from lbdkit.textprep import TermVocabulary, corpus_fingerprint, count_terms

COUNTS = "counts"
TFIDF = "tfidf"


@dataclass(frozen=True, eq=False)
class WeightedMatrix:
    doc_ids: Tuple[str, ...]
    terms: Tuple[str, ...]
    cells: sparse.csr_matrix
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (COUNTS, TFIDF):
            raise MatrixKindError(f"Unknown matrix kind {self.kind!r}")
        if self.cells.shape != (len(self.doc_ids), len(self.terms)):
            raise ValueError(f"Matrix shape {self.cells.shape} does not match {len(self.doc_ids)} x {len(self.terms)}")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.cells.shape

    def column(self, term: str) -> np.ndarray:
        index = self.terms.index(term)
        return self.cells.getcol(index).toarray().ravel()

    def document_frequencies(self) -> np.ndarray:
        return np.asarray((self.cells > 0).sum(axis=0)).ravel()

    def restrict_columns(self, keep: Sequence[int]) -> "WeightedMatrix":
        keep = list(keep)
        return WeightedMatrix(
            doc_ids=self.doc_ids,
            terms=tuple(self.terms[i] for i in keep),
            cells=self.cells[:, keep].tocsr(),
            kind=self.kind,
        )

    def to_triplets(self) -> List[Tuple[str, str, float]]:
        coo = self.cells.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(self.doc_ids[coo.row[i]], self.terms[coo.col[i]], float(coo.data[i])) for i in order]


def count_matrix(doc_ids: Sequence[str], counters: Sequence[Mapping[str, int]], terms: Sequence[str]) -> WeightedMatrix:
    """Sparse document x term counts for terms in ``terms``; other keys are ignored."""
    column_of = {term: index for index, term in enumerate(terms)}
    rows: List[int] = []
    cols: List[int] = []
    data: List[float] = []
    for row, counter in enumerate(counters):
        for term in sorted(counter):
            col = column_of.get(term)
            if col is None or counter[term] == 0:
                continue
            rows.append(row)
            cols.append(col)
            data.append(float(counter[term]))
    cells = sparse.csr_matrix((data, (rows, cols)), shape=(len(doc_ids), len(terms)), dtype=np.float64)
    cells.sum_duplicates()
    cells.eliminate_zeros()
    return WeightedMatrix(doc_ids=tuple(doc_ids), terms=tuple(terms), cells=cells, kind=COUNTS)


def bow(corpus: DomainPairCorpus, vocab: TermVocabulary, threads: int = 1) -> WeightedMatrix:
    if vocab.corpus_fingerprint != corpus_fingerprint(corpus.documents):
        raise VocabularyMismatchError("Vocabulary was built from a different corpus")
    counters = count_terms(corpus.documents, vocab.config, threads=threads)
    return count_matrix([doc.id for doc in corpus.documents], counters, vocab.terms)


def tfidf(matrix: WeightedMatrix) -> WeightedMatrix:
    """tf * ln(N / df) with raw counts as tf; terms present in every row get weight 0."""
    if matrix.kind != COUNTS:
        raise MatrixKindError("tfidf expects a counts matrix")
    n_rows = matrix.shape[0]
    df = matrix.document_frequencies().astype(np.float64)
    idf = np.zeros_like(df)
    present = df > 0
    idf[present] = np.log(n_rows / df[present])
    cells = (matrix.cells @ sparse.diags(idf)).tocsr()
    cells.eliminate_zeros()
    return WeightedMatrix(doc_ids=matrix.doc_ids, terms=matrix.terms, cells=cells, kind=TFIDF)


@dataclass(frozen=True, eq=False)
class DomainProfile:
    terms: Tuple[str, ...]
    weight_a: np.ndarray
    weight_c: np.ndarray
    kind: str = COUNTS

    def __contains__(self, term: object) -> bool:
        return term in self._index

    @property
    def _index(self) -> Dict[str, int]:
        cached = self.__dict__.get("_index_cache")
        if cached is None:
            cached = {term: i for i, term in enumerate(self.terms)}
            object.__setattr__(self, "_index_cache", cached)
        return cached

    def get(self, term: str) -> Tuple[float, float]:
        index = self._index.get(term)
        if index is None:
            return 0.0, 0.0
        return float(self.weight_a[index]), float(self.weight_c[index])

    def total(self) -> float:
        return float(self.weight_a.sum() + self.weight_c.sum())


def _row_mask(domains: Sequence[str], domain: str) -> np.ndarray:
    return np.array([d == domain for d in domains], dtype=np.float64)


def aggregate_by_domain(matrix: WeightedMatrix, corpus: DomainPairCorpus) -> DomainProfile:
    if matrix.doc_ids != tuple(doc.id for doc in corpus.documents):
        raise ValueError("Matrix rows are not aligned with the corpus documents")
    domains = [doc.domain for doc in corpus.documents]
    weight_a = np.asarray(matrix.cells.T @ _row_mask(domains, DOMAIN_A)).ravel()
    weight_c = np.asarray(matrix.cells.T @ _row_mask(domains, DOMAIN_C)).ravel()
    return DomainProfile(terms=matrix.terms, weight_a=weight_a, weight_c=weight_c, kind=matrix.kind)


def column_totals(matrix: WeightedMatrix) -> Dict[str, float]:
    totals = np.asarray(matrix.cells.sum(axis=0)).ravel()
    return {term: float(totals[i]) for i, term in enumerate(matrix.terms)}


def export_triplets(matrix: WeightedMatrix, path: Path) -> Path:
    with Path(path).open("w", encoding="utf-8") as handle:
        for doc_id, term, weight in matrix.to_triplets():
            handle.write(f"{doc_id}\t{term}\t{weight:.10g}\n")
    return path
