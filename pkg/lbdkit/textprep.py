from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import pandas as pd
from nltk.stem import PorterStemmer

from lbdkit.corpus import DOMAIN_A, DOMAIN_C, RESOURCE_DIR, Document, DomainPairCorpus
from lbdkit.errors import ConfigError
from lbdkit.logging import get_logger, log_event, log_warning

TITLE_ONLY = "title_only"
TITLE_AND_ABSTRACT = "title_and_abstract"
FIELD_MODES = (TITLE_ONLY, TITLE_AND_ABSTRACT)

TOKEN_RE = re.compile(r"[a-z0-9]+(?:[-.][a-z0-9]+)*")
NUMERIC_RE = re.compile(r"[0-9]+(?:[-.][0-9]+)*")
COMPOUND_SPLIT_RE = re.compile(r"[-.]")

STOPWORDS_PATH = RESOURCE_DIR / "stopwords_en.txt"
STEM_EXCEPTIONS_PATH = RESOURCE_DIR / "stem_exceptions.txt"


def _resource_lines(path: Path) -> List[str]:
    return [
        line.strip()
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]


@lru_cache(maxsize=8)
def load_stopwords(path: Path = STOPWORDS_PATH) -> FrozenSet[str]:
    return frozenset(word.lower() for word in _resource_lines(Path(path)))


@lru_cache(maxsize=8)
def load_stem_exceptions(path: Path = STEM_EXCEPTIONS_PATH) -> Dict[str, str]:
    table: Dict[str, str] = {}
    for line in _resource_lines(Path(path)):
        surface, _, stem = line.partition("\t")
        if stem:
            table[surface.strip().lower()] = stem.strip()
    return table


def default_stopwords() -> FrozenSet[str]:
    return load_stopwords()


@dataclass(frozen=True)
class PreprocessConfig:
    fields_used: str = TITLE_ONLY
    ngram_max: int = 2
    min_support: int = 2
    stopword_list: FrozenSet[str] = field(default_factory=default_stopwords)
    stemming_enabled: bool = True

    def __post_init__(self) -> None:
        if self.fields_used not in FIELD_MODES:
            raise ConfigError(f"fields_used must be one of {', '.join(FIELD_MODES)}, got {self.fields_used!r}")
        if int(self.ngram_max) < 1:
            raise ConfigError(f"ngram_max must be >= 1, got {self.ngram_max}")
        if int(self.min_support) < 1:
            raise ConfigError(f"min_support must be >= 1, got {self.min_support}")
        object.__setattr__(self, "stopword_list", frozenset(self.stopword_list))

    def fingerprint(self) -> str:
        payload = {
            "fields_used": self.fields_used,
            "ngram_max": self.ngram_max,
            "min_support": self.min_support,
            "stopwords": sorted(self.stopword_list),
            "stemming_enabled": self.stemming_enabled,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def tokenize(text: str, keep_numbers: bool = False) -> List[str]:
    """Lowercase alphanumeric tokens. Compounds joined by an inner hyphen or dot stay one
    token ('bcl-2', '22q11.2'); standalone numbers are dropped unless ``keep_numbers``."""
    if not text:
        return []
    tokens = TOKEN_RE.findall(text.lower())
    if keep_numbers:
        return tokens
    return [token for token in tokens if not NUMERIC_RE.fullmatch(token)]


class TermNormalizer:
    def __init__(self, config: PreprocessConfig) -> None:
        self.config = config
        self.stopwords = config.stopword_list
        self.exceptions = load_stem_exceptions()
        self._stemmer = PorterStemmer() if config.stemming_enabled else None
        self._cache: Dict[str, str] = {}

    def stem(self, token: str) -> str:
        if self._stemmer is None:
            return token
        cached = self._cache.get(token)
        if cached is None:
            cached = self.exceptions.get(token) or self._stemmer.stem(token)
            self._cache[token] = cached
        return cached

    def normalize(self, tokens: Iterable[str]) -> List[str]:
        """Stopwords out, compounds split into their parts (numeric parts kept), parts stemmed."""
        words: List[str] = []
        for token in tokens:
            if token in self.stopwords:
                continue
            for part in COMPOUND_SPLIT_RE.split(token):
                if part and part not in self.stopwords:
                    words.append(self.stem(part))
        return words

    def normalize_phrase(self, text: str) -> str:
        """Canonical form of a free phrase such as a gold term or a domain label.

        Phrases arrive with compounds already spaced out ("bcl 2", "5 ht"), so their
        numbers are kept to land on the same form as "Bcl-2" or "5-HT" in running text.
        """
        return " ".join(self.normalize(tokenize(text, keep_numbers=True)))

    def query_words(self, query_terms: Iterable[str]) -> Tuple[FrozenSet[str], Tuple[str, ...]]:
        exact = set()
        prefixes = set()
        for query in query_terms:
            for raw in query.split():
                if raw.endswith("*"):
                    prefixes.update(tokenize(raw.rstrip("*")))
                else:
                    exact.update(self.normalize(tokenize(raw)))
        return frozenset(exact), tuple(sorted(prefixes))


@lru_cache(maxsize=32)
def get_normalizer(config: PreprocessConfig) -> TermNormalizer:
    return TermNormalizer(config)


def normalize(tokens: Sequence[str], config: PreprocessConfig) -> List[str]:
    return get_normalizer(config).normalize(tokens)


def ngrams(tokens: Sequence[str], ngram_max: int) -> List[str]:
    grams: List[str] = []
    for size in range(1, ngram_max + 1):
        for start in range(len(tokens) - size + 1):
            grams.append(" ".join(tokens[start:start + size]))
    return grams


def document_fields(doc: Document, config: PreprocessConfig) -> List[str]:
    if config.fields_used == TITLE_ONLY:
        return [doc.title]
    return [doc.title, doc.abstract]


def extract_document_terms(doc: Document, config: PreprocessConfig) -> Counter:
    normalizer = get_normalizer(config)
    terms: Counter = Counter()
    for text in document_fields(doc, config):
        terms.update(ngrams(normalizer.normalize(tokenize(text)), config.ngram_max))
    return terms


def count_terms(documents: Sequence[Document], config: PreprocessConfig, threads: int = 1) -> List[Counter]:
    """Per-document term multisets, in document order whatever the thread count."""
    if threads <= 1 or len(documents) < 2:
        return [extract_document_terms(doc, config) for doc in documents]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda doc: extract_document_terms(doc, config), documents, chunksize=256))


def corpus_fingerprint(documents: Iterable[Document]) -> str:
    digest = hashlib.sha256()
    for doc_id, domain in sorted((doc.id, doc.domain) for doc in documents):
        digest.update(f"{doc_id}\t{domain}\n".encode("utf-8"))
    return digest.hexdigest()


def is_query_term(term: str, exact: FrozenSet[str], prefixes: Sequence[str]) -> bool:
    for word in term.split():
        if word in exact:
            return True
        if any(word.startswith(prefix) for prefix in prefixes):
            return True
    return False


@dataclass(frozen=True)
class TermVocabulary:
    terms: Tuple[str, ...]
    tf_a: Dict[str, int]
    tf_c: Dict[str, int]
    df_a: Dict[str, int]
    df_c: Dict[str, int]
    n_docs_a: int
    n_docs_c: int
    config: PreprocessConfig
    corpus_fingerprint: str
    mean_terms_a: float = 0.0
    mean_terms_c: float = 0.0
    excluded_query_terms: int = 0

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: object) -> bool:
        return term in self.df_a

    def df(self, term: str) -> Tuple[int, int]:
        return self.df_a.get(term, 0), self.df_c.get(term, 0)

    def tf(self, term: str) -> Tuple[int, int]:
        return self.tf_a.get(term, 0), self.tf_c.get(term, 0)

    def domain_terms(self, domain: str) -> List[str]:
        table = self.df_a if domain == DOMAIN_A else self.df_c
        return [term for term in self.terms if table[term] > 0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "term": list(self.terms),
                "tf_a": [self.tf_a[t] for t in self.terms],
                "tf_c": [self.tf_c[t] for t in self.terms],
                "df_a": [self.df_a[t] for t in self.terms],
                "df_c": [self.df_c[t] for t in self.terms],
            },
            columns=["term", "tf_a", "tf_c", "df_a", "df_c"],
        )


def _empty_vocabulary(corpus: DomainPairCorpus, config: PreprocessConfig) -> TermVocabulary:
    return TermVocabulary(
        terms=(),
        tf_a={},
        tf_c={},
        df_a={},
        df_c={},
        n_docs_a=0,
        n_docs_c=0,
        config=config,
        corpus_fingerprint=corpus_fingerprint(corpus.documents),
    )


def build_vocabulary(
    corpus: DomainPairCorpus,
    config: PreprocessConfig,
    threads: int = 1,
    exclude_query_terms: bool = True,
) -> TermVocabulary:
    logger = get_logger()
    if not corpus.documents:
        log_warning(logger, "empty_corpus_vocabulary", {})
        return _empty_vocabulary(corpus, config)

    counters = count_terms(corpus.documents, config, threads=threads)
    tf = {DOMAIN_A: Counter(), DOMAIN_C: Counter()}
    df = {DOMAIN_A: Counter(), DOMAIN_C: Counter()}
    for doc, counter in zip(corpus.documents, counters):
        tf[doc.domain].update(counter)
        df[doc.domain].update(counter.keys())

    normalizer = get_normalizer(config)
    query_terms = tuple(corpus.query_terms_a) + tuple(corpus.query_terms_c)
    if exclude_query_terms and not query_terms:
        log_warning(logger, "no_query_terms", {"label_a": corpus.label_a, "label_c": corpus.label_c})
    exact, prefixes = normalizer.query_words(query_terms if exclude_query_terms else ())

    kept: List[str] = []
    excluded = 0
    for term in sorted(set(df[DOMAIN_A]) | set(df[DOMAIN_C])):
        if df[DOMAIN_A][term] + df[DOMAIN_C][term] < config.min_support:
            continue
        if is_query_term(term, exact, prefixes):
            excluded += 1
            continue
        kept.append(term)

    kept_set = set(kept)
    mean_terms: Dict[str, float] = {}
    for domain in (DOMAIN_A, DOMAIN_C):
        sizes = [
            sum(1 for term in counter if term in kept_set)
            for doc, counter in zip(corpus.documents, counters)
            if doc.domain == domain
        ]
        mean_terms[domain] = round(sum(sizes) / len(sizes), 4) if sizes else 0.0

    vocab = TermVocabulary(
        terms=tuple(kept),
        tf_a={t: tf[DOMAIN_A][t] for t in kept},
        tf_c={t: tf[DOMAIN_C][t] for t in kept},
        df_a={t: df[DOMAIN_A][t] for t in kept},
        df_c={t: df[DOMAIN_C][t] for t in kept},
        n_docs_a=corpus.count(DOMAIN_A),
        n_docs_c=corpus.count(DOMAIN_C),
        config=config,
        corpus_fingerprint=corpus_fingerprint(corpus.documents),
        mean_terms_a=mean_terms[DOMAIN_A],
        mean_terms_c=mean_terms[DOMAIN_C],
        excluded_query_terms=excluded,
    )
    log_event(
        logger,
        "vocabulary_built",
        {
            "terms": len(vocab),
            "unique_a": len(vocab.domain_terms(DOMAIN_A)),
            "unique_c": len(vocab.domain_terms(DOMAIN_C)),
            "excluded_query_terms": excluded,
        },
    )
    return vocab


def vocabulary_statistics(vocab: TermVocabulary) -> Dict[str, object]:
    unique_a = vocab.domain_terms(DOMAIN_A)
    unique_c = vocab.domain_terms(DOMAIN_C)
    common = [term for term in vocab.terms if vocab.df_a[term] > 0 and vocab.df_c[term] > 0]
    return {
        "mean_terms_c": vocab.mean_terms_c,
        "mean_terms_a": vocab.mean_terms_a,
        "unique_terms_c": len(unique_c),
        "unique_terms_a": len(unique_a),
        "common_terms": len(common),
        "excluded_query_terms": vocab.excluded_query_terms,
    }


def export_vocabulary(vocab: TermVocabulary, path: Path) -> Path:
    vocab.to_frame().to_csv(path, sep="|", index=False, lineterminator="\n")
    return path
