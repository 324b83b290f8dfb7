import gzip
import json
import math
from datetime import date
from itertools import combinations

import networkx as nx
import numpy as np
import pytest

from conftest import make_doc
from lbdkit import cli
from lbdkit.corpus import DOMAIN_A, DOMAIN_C, save_psv
from lbdkit.errors import ConfigError, InsufficientNegativesError, UnknownNodeError
from lbdkit.linkpred import (
    CitationNetwork,
    Reference,
    TimeSlicedSplit,
    adamic_adar,
    build_network,
    co_citation_projection,
    common_neighbors,
    evaluate_time_sliced,
    get_measure,
    jaccard,
    load_references,
    pair_of,
    sample_negatives,
    score_pairs,
    write_scored_pairs,
)

CUTOFF = date(1985, 11, 30)

DOCS = (
    make_doc("d1", DOMAIN_C, "one", pub_date=date(1983, 1, 1)),
    make_doc("d2", DOMAIN_C, "two", pub_date=date(1984, 1, 1)),
    make_doc("d3", DOMAIN_A, "three", pub_date=date(1985, 1, 1)),
    make_doc("d4", DOMAIN_A, "four", pub_date=date(1985, 6, 1)),
    make_doc("d5", DOMAIN_A, "five", pub_date=date(1986, 6, 1)),
    make_doc("d6", DOMAIN_C, "six", pub_date=date(1985, 2, 1)),
)

REFERENCE_ROWS = [
    "citing_id|cited_id|cited_pub_date",
    "d2|d1|1983-01-01",
    "d3|d1|1983-01-01",
    "d3|d2|1984-01-01",
    "d3|d4|1985-12-15",
    "d5|d2|1986-06-01",
    "d2|d2|1984-01-01",
    "x9|d1|1983-01-01",
    "d4|d1|someday",
]


def write_references(path):
    with gzip.open(path, "wt", encoding="utf-8") as handle:
        handle.write("\n".join(REFERENCE_ROWS) + "\n")
    return path


def small_network():
    return CitationNetwork.from_edges([("u", "z"), ("v", "z"), ("v", "w"), ("z", "x")])


def test_measures_on_a_small_network():
    net = small_network()
    assert common_neighbors(net, "u", "v") == 1.0
    assert jaccard(net, "u", "v") == 0.5
    assert adamic_adar(net, "u", "v") == pytest.approx(1 / math.log(3))


def test_measures_reject_bad_input():
    net = small_network()
    with pytest.raises(ValueError):
        jaccard(net, "u", "u")
    with pytest.raises(UnknownNodeError):
        common_neighbors(net, "u", "nobody")
    with pytest.raises(ConfigError):
        get_measure("katz")


def test_isolated_pair_scores_zero():
    net = CitationNetwork.from_edges([("a", "b")], nodes=["c", "d"])
    assert jaccard(net, "c", "d") == 0.0
    assert adamic_adar(net, "c", "d") == 0.0


def test_measures_agree_with_networkx():
    graph = nx.gnp_random_graph(25, 0.2, seed=4)
    graph = nx.relabel_nodes(graph, {n: f"n{n:02d}" for n in graph.nodes})
    net = CitationNetwork.from_edges(graph.edges, nodes=graph.nodes)
    pairs = [pair for pair in combinations(sorted(graph.nodes), 2) if not graph.has_edge(*pair)]
    for u, v, expected in nx.jaccard_coefficient(graph, pairs):
        assert jaccard(net, u, v) == pytest.approx(expected)
    for u, v, expected in nx.adamic_adar_index(graph, pairs):
        assert adamic_adar(net, u, v) == pytest.approx(expected)
    for u, v in pairs:
        assert common_neighbors(net, u, v) == len(list(nx.common_neighbors(graph, u, v)))


def random_small_graph(seed):
    rng = np.random.default_rng(seed)
    nodes = [f"v{i}" for i in range(int(rng.integers(2, 9)))]
    density = rng.random()
    edges = [pair for pair in combinations(nodes, 2) if rng.random() < density]
    return nodes, edges


@pytest.mark.parametrize("seed", range(500))
def test_measures_match_set_arithmetic_on_random_small_graphs(seed):
    nodes, edges = random_small_graph(seed)
    net = CitationNetwork.from_edges(edges, nodes=nodes)
    adjacency = {node: set() for node in nodes}
    for u, v in edges:
        adjacency[u].add(v)
        adjacency[v].add(u)
    for u, v in combinations(nodes, 2):
        shared = adjacency[u] & adjacency[v]
        union = adjacency[u] | adjacency[v]
        assert common_neighbors(net, u, v) == len(shared)
        assert jaccard(net, u, v) == pytest.approx(len(shared) / len(union) if union else 0.0)
        assert adamic_adar(net, u, v) == pytest.approx(sum(1 / math.log(len(adjacency[z])) for z in shared))


def test_network_is_frozen_and_loop_free():
    net = small_network()
    with pytest.raises(nx.NetworkXError):
        net.graph.add_edge("p", "q")
    graph = nx.Graph()
    graph.add_edge("a", "a")
    with pytest.raises(ValueError):
        CitationNetwork(graph=graph)


def test_load_references_collects_bad_rows(tmp_path):
    references, rejected = load_references(write_references(tmp_path / "refs.psv.gz"))
    assert len(references) == 7
    assert references[0] == Reference("d2", "d1", date(1983, 1, 1))
    assert len(rejected) == 1 and "unparsable date" in rejected[0].reason


def test_time_sliced_split(tmp_path):
    references, _ = load_references(write_references(tmp_path / "refs.psv.gz"))
    split = build_network(DOCS, references, CUTOFF)
    assert split.summary() == {
        "train_nodes": 5,
        "train_edges": 3,
        "test_edges": 1,
        "rejected": 2,
        "unevaluable": 1,
    }
    assert split.test_edges == frozenset({("d3", "d4")})
    assert not split.train.has_edge("d3", "d4")


# Every cited_pub_date equals the cited work's publication date. e3 and e4
# appear after the cutoff but enter training through their references to
# older work, so e4 citing e3 is a later edge between two training nodes.
CONSISTENT_DOCS = (
    make_doc("e1", DOMAIN_C, "one", pub_date=date(1982, 3, 1)),
    make_doc("e2", DOMAIN_A, "two", pub_date=date(1984, 2, 1)),
    make_doc("e3", DOMAIN_C, "three", pub_date=date(1986, 1, 15)),
    make_doc("e4", DOMAIN_A, "four", pub_date=date(1986, 5, 1)),
    make_doc("e5", DOMAIN_A, "five", pub_date=date(1987, 2, 1)),
)

CONSISTENT_REFERENCES = (
    Reference("e2", "e1", date(1982, 3, 1)),
    Reference("e2", "r1", date(1980, 1, 1)),
    Reference("e3", "e1", date(1982, 3, 1)),
    Reference("e4", "e2", date(1984, 2, 1)),
    Reference("e4", "e3", date(1986, 1, 15)),
    Reference("e3", "r9", date(1986, 3, 1)),
    Reference("e5", "e4", date(1986, 5, 1)),
)


def test_split_keys_on_the_cited_work_date():
    published = {doc.id: doc.pub_date for doc in CONSISTENT_DOCS}
    for ref in CONSISTENT_REFERENCES:
        assert ref.cited_pub_date == published.get(ref.cited_id, ref.cited_pub_date)

    split = build_network(CONSISTENT_DOCS, CONSISTENT_REFERENCES, CUTOFF)
    assert split.summary() == {
        "train_nodes": 5,
        "train_edges": 4,
        "test_edges": 1,
        "rejected": 0,
        "unevaluable": 2,
    }
    assert split.train.nodes == frozenset({"e1", "e2", "e3", "e4", "r1"})
    assert split.test_edges == frozenset({("e3", "e4")})
    evaluation = evaluate_time_sliced(split, "common_neighbors", seed=2)
    assert evaluation.positives == evaluation.negatives == 1


def test_split_invariants_are_checked():
    net = small_network()
    with pytest.raises(ValueError):
        TimeSlicedSplit(train=net, test_edges=frozenset({pair_of("u", "z")}))
    with pytest.raises(ValueError):
        TimeSlicedSplit(train=net, test_edges=frozenset({pair_of("u", "elsewhere")}))


def community_split(seed=0):
    """Six dense communities; held-out edges close triangles inside a community."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for community in range(6):
        members = [f"c{community}n{i}" for i in range(10)]
        for pair in combinations(members, 2):
            (train if rng.random() < 0.6 else test).append(pair)
    net = CitationNetwork.from_edges(train)
    held_out = {pair_of(*pair) for pair in test if pair[0] in net.graph and pair[1] in net.graph}
    return TimeSlicedSplit(train=net, test_edges=frozenset(held_out))


def test_triangle_closing_measures_beat_chance():
    split = community_split()
    for measure in ("common_neighbors", "jaccard", "adamic_adar"):
        evaluation = evaluate_time_sliced(split, measure, seed=1)
        assert evaluation.auc > 0.7
        assert evaluation.positives == evaluation.negatives == len(split.test_edges)
        assert evaluation.precision_at_k[10] >= 0.5


def test_constant_scorer_is_a_coin_flip():
    evaluation = evaluate_time_sliced(community_split(), lambda net, u, v: 0.0, seed=1)
    assert evaluation.auc == pytest.approx(0.5)
    assert evaluation.measure == "<lambda>"


def seeded_random_scorer(seed):
    rng = np.random.default_rng(seed)
    return lambda net, u, v: float(rng.random())


def test_random_scorer_averages_to_chance():
    split = community_split()
    aucs = [evaluate_time_sliced(split, seeded_random_scorer(trial), seed=trial).auc for trial in range(1000)]
    assert 0.45 <= float(np.mean(aucs)) <= 0.55


def test_negative_sampling_is_seeded_and_disjoint():
    split = community_split()
    first = sample_negatives(split, 50, seed=9)
    assert first == sample_negatives(split, 50, seed=9)
    assert len(set(first)) == 50
    for pair in first:
        assert not split.train.has_edge(*pair)
        assert pair not in split.test_edges
    tiny = TimeSlicedSplit(train=CitationNetwork.from_edges([("a", "b")], nodes=["c"]), test_edges=frozenset({("a", "c")}))
    with pytest.raises(InsufficientNegativesError):
        sample_negatives(tiny, 2)


def test_score_pairs_and_export(tmp_path):
    split = community_split()
    evaluation = evaluate_time_sliced(split, "jaccard", seed=3)
    path = write_scored_pairs(evaluation, split, tmp_path / "pairs.psv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "u|v|score|label"
    assert sum(line.endswith("|1") for line in lines[1:]) == evaluation.positives
    scores = score_pairs(split.train, [("c0n0", "c0n1")], common_neighbors)
    assert list(scores) == [("c0n0", "c0n1")]


def test_co_citation_projection():
    net = CitationNetwork.from_edges(
        [("p1", "r1"), ("p1", "r2"), ("p2", "r2"), ("p2", "r3")],
        nodes=["r4"],
        citing=["p1", "p2"],
    )
    split = TimeSlicedSplit(train=net, test_edges=frozenset({pair_of("p1", "r4")}))
    projected = co_citation_projection(split)
    assert projected.train.edges == frozenset({("r1", "r2"), ("r2", "r3")})
    assert projected.train.graph["r1"]["r2"]["weight"] == 1
    assert projected.test_edges == frozenset({("r1", "r4"), ("r2", "r4")})


def test_linkpred_cli(tmp_path):
    snapshot = save_psv(DOCS, tmp_path / "docs.psv.gz")
    references = write_references(tmp_path / "refs.psv.gz")
    config = tmp_path / "linkpred.yaml"
    config.write_text(
        f"dataset: rs-dfo\nsnapshot: {snapshot}\nthreads: 1\nlinkpred:\n  references: {references}\n",
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert cli.main(["linkpred", "--config", str(config), "--out", str(out)]) == 0
    report = json.loads((out / "linkpred_report.json").read_text(encoding="utf-8"))
    assert report["split"]["test_edges"] == 1
    assert set(report["evaluations"]) == {"common_neighbors", "jaccard", "adamic_adar"}
    assert (out / "pairs_jaccard.psv").exists()
