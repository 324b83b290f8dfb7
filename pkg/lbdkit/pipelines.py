"""One runner per CLI subcommand; each writes its artifacts into the staging area."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Callable, Dict, List

from lbdkit.choices import prompt_choices, term_slug, write_choice_lines
from lbdkit.closed_abc import check_gold_recovery, common_terms, write_common_terms
from lbdkit.config import PipelineConfig
from lbdkit.corpus import (
    DomainPairCorpus,
    exclude_shared_records,
    load_dataset,
    load_gold,
    load_psv,
    load_registry,
    save_rejections,
    shared_ids,
)
from lbdkit.crossbee import ENSEMBLE, HeuristicInputs, count_profile, evaluate_heuristics, export_roc, write_ranking
from lbdkit.errors import FixtureMissingError
from lbdkit.linkpred import build_network, co_citation_projection, evaluate_time_sliced, load_references, write_scored_pairs
from lbdkit.logging import get_logger, log_event
from lbdkit.open_concept import (
    SemanticTypeFilter,
    collect_headings,
    filter_semantic_types,
    load_choice_file,
    rank_b_concepts,
    run_open_discovery,
)
from lbdkit.outlier import export_outliers, export_scatter, run_outlier_detection
from lbdkit.rajolink import (
    STAGE_JO,
    STAGE_RA,
    ChoiceRecord,
    RaJoLinkSession,
    acquire_choices,
    link_closed,
    ra_rank_rare,
    run_jo,
)
from lbdkit.report import RunManifest, StagedOutput
from lbdkit.textprep import build_vocabulary, export_vocabulary, get_normalizer, vocabulary_statistics

Runner = Callable[[PipelineConfig, StagedOutput, RunManifest], None]
RUNNERS: Dict[str, Runner] = {}


def pipeline(name: str):
    def decorator(func: Runner) -> Runner:
        RUNNERS[name] = func
        return func

    return decorator


def _write_json(path: Path, payload: Any) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


def _load(config: PipelineConfig, manifest: RunManifest, apply_cutoff: bool = True) -> DomainPairCorpus:
    path = config.snapshot_path()
    if not path.exists():
        raise FixtureMissingError(path, f"{config.dataset} snapshot")
    manifest.record_input(path)
    return load_dataset(config.dataset, Path(config.data_dir), snapshot=path, apply_cutoff=apply_cutoff)


def _closed_corpus(config: PipelineConfig, manifest: RunManifest) -> DomainPairCorpus:
    corpus = _load(config, manifest)
    return exclude_shared_records(corpus) if config.closed.exclude_shared else corpus


@pipeline("ingest")
def run_ingest(config: PipelineConfig, staged: StagedOutput, manifest: RunManifest) -> None:
    corpus = _load(config, manifest)
    shared = shared_ids(corpus)
    corpus = exclude_shared_records(corpus)
    vocab = build_vocabulary(corpus, config.preprocess_config(), threads=config.threads)
    export_vocabulary(vocab, staged.path("vocabulary.psv"))
    save_rejections(corpus.rejections, staged.path("rejections.psv"))
    statistics = {**corpus.statistics(), **vocabulary_statistics(vocab), "shared_records": len(shared)}
    _write_json(staged.path("statistics.json"), statistics)
    manifest.metrics.update({"docs_a": statistics["docs_a"], "docs_c": statistics["docs_c"], "terms": len(vocab)})


@pipeline("closed")
def run_closed(config: PipelineConfig, staged: StagedOutput, manifest: RunManifest) -> None:
    corpus = _closed_corpus(config, manifest)
    preprocess = config.preprocess_config()
    vocab = build_vocabulary(corpus, preprocess, threads=config.threads)
    common = common_terms(vocab)
    gold = load_gold(config.dataset, get_normalizer(preprocess).normalize_phrase)
    recovery = check_gold_recovery(common, gold)
    write_common_terms(common, staged.path("common_terms.psv"), gold)
    _write_json(staged.path("gold_recovery.json"), recovery.to_dict())
    manifest.metrics.update({"common_terms": len(common), "recall": recovery.recall, "gold_hits": len(recovery.hits)})


def _restrict_to_candidates(corpus: DomainPairCorpus, path: Path, manifest: RunManifest) -> DomainPairCorpus:
    manifest.record_input(path)
    reduced = load_psv(path, label_a=corpus.label_a, label_c=corpus.label_c)
    keep = {(doc.id, doc.domain) for doc in reduced.documents}
    return corpus.with_documents(doc for doc in corpus.documents if (doc.id, doc.domain) in keep)


@pipeline("crossbee")
def run_crossbee(config: PipelineConfig, staged: StagedOutput, manifest: RunManifest) -> None:
    corpus = _closed_corpus(config, manifest)
    if config.crossbee.candidates_file:
        corpus = _restrict_to_candidates(corpus, Path(config.crossbee.candidates_file), manifest)
    preprocess = config.preprocess_config()
    vocab = build_vocabulary(corpus, preprocess, threads=config.threads)
    common = common_terms(vocab)
    gold = load_gold(config.dataset, get_normalizer(preprocess).normalize_phrase)
    evaluation = evaluate_heuristics(
        common,
        HeuristicInputs(vocab=vocab, profile=count_profile(vocab)),
        gold,
        heuristics=config.crossbee.heuristics,
        weights=config.crossbee.weights or None,
    )
    ensemble = evaluation.rankings[ENSEMBLE]
    write_ranking(ensemble, staged.path("ranking.psv"), gold)
    export_roc(ensemble, gold, staged.path("roc.csv"), staged.path("roc.svg") if config.crossbee.svg else None)
    _write_json(staged.path("heuristics.json"), evaluation.to_dict())
    best_name, best_auc = evaluation.best_elementary()
    manifest.metrics.update(
        {
            "candidates": len(common),
            "auc": evaluation.aucs[ENSEMBLE],
            "aucs": dict(sorted(evaluation.aucs.items())),
            "best_elementary": best_name,
            "best_elementary_auc": best_auc,
        }
    )


def _semantic_filter(config: PipelineConfig, section: str, types: List[str], manifest: RunManifest) -> SemanticTypeFilter:
    path = config.semantic_types_path(section)
    manifest.record_input(path)
    return SemanticTypeFilter.from_table(types, path)


@pipeline("open")
def run_open(config: PipelineConfig, staged: StagedOutput, manifest: RunManifest) -> None:
    corpus = _load(config, manifest)
    entry = config.dataset_entry()
    normalizer = get_normalizer(config.preprocess_config())
    b_filter = _semantic_filter(config, "open", config.open.b_types, manifest)
    a_filter = SemanticTypeFilter(allowed_types=frozenset(config.open.a_types), heading_to_types=b_filter.heading_to_types)

    if config.interactive:
        headings = [h for h in filter_semantic_types(collect_headings(corpus), b_filter) if h not in entry.exclude_headings]
        b_choices = prompt_choices(rank_b_concepts(headings, corpus), "b-concept")
    else:
        choices_path = config.choices_path("open")
        manifest.record_input(choices_path)
        b_choices = load_choice_file(choices_path)

    report, b_ranking, aggregated = run_open_discovery(
        corpus,
        b_choices,
        config.snapshot_dir("open"),
        normalizer,
        b_filter,
        a_filter,
        exclude_headings=entry.exclude_headings,
        threads=config.threads,
        dataset=entry.name,
    )
    for expansion in report.expansions:
        manifest.record_input(config.snapshot_dir("open") / str(expansion["source"]))
    write_ranking(b_ranking, staged.path("b_concepts.psv"))
    write_ranking(aggregated, staged.path("a_concepts.psv"))
    write_choice_lines([b["heading"] for b in report.b_concepts], staged.path("b_concepts.choices.txt"))
    report.save(staged.path("open_report.json"))
    manifest.metrics.update(
        {
            "headings": report.headings_total,
            "headings_filtered": report.headings_filtered,
            "candidates": len(report.candidates),
            "top": [c["heading"] for c in report.candidates[:2]],
            "novelty": {c["heading"]: c["novelty"] for c in report.candidates},
        }
    )


@pipeline("outlier")
def run_outlier(config: PipelineConfig, staged: StagedOutput, manifest: RunManifest) -> None:
    corpus = _closed_corpus(config, manifest)
    vocab = build_vocabulary(corpus, config.preprocess_config(), threads=config.threads)
    run = run_outlier_detection(
        corpus,
        vocab,
        k=config.outlier.k,
        seed=config.seed,
        min_df=config.outlier.min_df,
        space=config.outlier.space,
        threads=config.threads,
    )
    export_outliers(run.report, staged.path("outliers.psv.gz"))
    export_scatter(run.projection, run.assignment, corpus, staged.path("scatter.csv"))
    run.save_summary(staged.path("outlier_report.json"))
    summary = run.summary()
    manifest.metrics.update({"outliers_a": summary["outliers_a"], "outliers_c": summary["outliers_c"], "k": run.report.k})


def _pair_corpus(config: PipelineConfig, session: RaJoLinkSession, manifest: RunManifest) -> DomainPairCorpus:
    """The registered domain pair (start domain, Jo choice), else ``<start>--<jo>.psv.gz`` in the data directory."""
    jo = session.require_jo()
    start = session.start_corpus
    normalizer = get_normalizer(session.config)
    if config.rajolink.pair_dataset:
        key = config.rajolink.pair_dataset
    else:
        key = next(
            (
                entry.key
                for entry in load_registry().values()
                if entry.label_c.lower() == start.label_c.lower()
                and normalizer.normalize_phrase(entry.label_a) == normalizer.normalize_phrase(jo)
            ),
            None,
        )
    if key is not None:
        entry = next(e for e in load_registry().values() if key in (e.key, e.name))
        path = Path(config.data_dir) / entry.snapshot
        if not path.exists():
            raise FixtureMissingError(path, f"domain-pair corpus {start.label_c} / {jo}")
        manifest.record_input(path)
        return load_dataset(entry.key, Path(config.data_dir), snapshot=path)
    path = Path(config.data_dir) / f"{term_slug(start.label_c)}--{term_slug(jo)}.psv.gz"
    if not path.exists():
        raise FixtureMissingError(path, f"domain-pair corpus {start.label_c} / {jo}")
    manifest.record_input(path)
    return load_psv(
        path,
        label_a=jo,
        label_c=start.label_c,
        query_terms_a=(jo,),
        query_terms_c=start.query_terms_c,
    )


@pipeline("rajolink")
def run_rajolink(config: PipelineConfig, staged: StagedOutput, manifest: RunManifest) -> None:
    corpus = _load(config, manifest)
    term_filter = _semantic_filter(config, "rajolink", config.rajolink.ra_types, manifest)
    session = RaJoLinkSession(start_corpus=corpus, term_filter=term_filter, config=config.preprocess_config())
    session.ra_ranking = ra_rank_rare(corpus, term_filter)

    replay = None
    if not config.interactive:
        choices_path = config.choices_path("rajolink")
        manifest.record_input(choices_path)
        replay = ChoiceRecord.load(choices_path)
    acquire_choices(session, STAGE_RA, replay)
    run_jo(session, config.snapshot_dir("rajolink"), threads=config.threads)
    acquire_choices(session, STAGE_JO, replay)
    link_closed(session, _pair_corpus(config, session, manifest), threads=config.threads)

    manifest.inputs.update(session.fixture_hashes)
    write_ranking(session.ra_ranking, staged.path("ra_ranking.psv"))
    write_ranking(session.jo_ranking, staged.path("jo_ranking.psv"))
    write_ranking(session.link.ranking, staged.path("link_ranking.psv"))
    session.choices.save(staged.path("choices.txt"))
    session.save_report(staged.path("rajolink_report.json"))
    report = session.report()
    manifest.metrics.update(
        {
            "ra_candidates": report["ra"]["candidates"],
            "ra_positions": {item["term"]: item["position"] for item in report["ra"]["selected"]},
            "jo_candidates": report["jo"]["candidates"],
            "jo_position": (report["jo"]["selected"] or {}).get("position"),
            "link_common_terms": report["link"]["common_terms"],
        }
    )


@pipeline("linkpred")
def run_linkpred(config: PipelineConfig, staged: StagedOutput, manifest: RunManifest) -> None:
    corpus = _load(config, manifest, apply_cutoff=False)
    entry = config.dataset_entry()
    references_path = config.references_path()
    if not references_path.exists():
        raise FixtureMissingError(references_path, "reference snapshot")
    manifest.record_input(references_path)
    references, rejected = load_references(references_path)
    split = build_network(corpus.documents, references, entry.cutoff_date, test_size=config.linkpred.test_size)
    if config.linkpred.projection:
        split = co_citation_projection(split)
    evaluations = {}
    for measure in config.linkpred.measures:
        evaluation = evaluate_time_sliced(split, measure, seed=config.seed)
        write_scored_pairs(evaluation, split, staged.path(f"pairs_{measure}.psv"))
        evaluations[measure] = evaluation.to_dict()
    _write_json(
        staged.path("linkpred_report.json"),
        {
            "split": split.summary(),
            "unreadable_rows": len(rejected),
            "projection": config.linkpred.projection,
            "evaluations": evaluations,
        },
    )
    log_event(get_logger(), "linkpred_complete", {"measures": list(evaluations)})
    manifest.metrics.update(
        {"test_edges": len(split.test_edges), "aucs": {name: ev["auc"] for name, ev in evaluations.items()}}
    )
