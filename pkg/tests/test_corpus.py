import gzip
from datetime import date

import pytest

from conftest import TOY_DOCUMENTS, make_doc
from lbdkit.corpus import (
    DOMAIN_A,
    DOMAIN_C,
    DomainPairCorpus,
    exclude_shared_records,
    get_dataset,
    load_dataset,
    load_gold,
    load_psv,
    save_psv,
    shared_ids,
)
from lbdkit.errors import CorpusLoadError, FixtureMissingError


def write_raw(path, lines):
    with gzip.open(path, "wt", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    return path


def test_save_and_load_keeps_documents(tmp_path):
    path = save_psv(TOY_DOCUMENTS, tmp_path / "toy.psv.gz")
    corpus = load_psv(path)
    assert [doc.id for doc in corpus.documents] == [doc.id for doc in TOY_DOCUMENTS]
    first = corpus.documents[0]
    assert first.domain == DOMAIN_C
    assert first.mesh_headings == ("Raynaud Disease", "Blood Viscosity")
    assert first.pub_date == date(1984, 1, 1)
    assert corpus.rejections == ()


def test_save_psv_gzip_is_byte_stable(tmp_path):
    first = save_psv(TOY_DOCUMENTS, tmp_path / "one.psv.gz").read_bytes()
    second = save_psv(TOY_DOCUMENTS, tmp_path / "two.psv.gz").read_bytes()
    assert first == second


def test_bad_rows_are_rejected_not_fatal(tmp_path):
    path = write_raw(
        tmp_path / "bad.psv.gz",
        [
            "pmid|domain|pub_date|title|abstract|mesh",
            "1|C|1984-01-01|Good title||",
            "|C|1984-01-01|No id||",
            "2|X|1984-01-01|Unknown domain||",
            "3|A|not-a-date|Bad date||",
            "1|C|1984-02-01|Duplicate||",
            "1|A|1984-02-01|Same id other domain||",
        ],
    )
    corpus = load_psv(path)
    assert [(doc.id, doc.domain) for doc in corpus.documents] == [("1", DOMAIN_C), ("1", DOMAIN_A)]
    reasons = [r.reason for r in corpus.rejections]
    assert reasons[0] == "missing id"
    assert reasons[1].startswith("unknown domain")
    assert reasons[2].startswith("unparsable date")
    assert reasons[3].startswith("duplicate id")


def test_domain_labels_and_cutoff(tmp_path):
    path = write_raw(
        tmp_path / "labels.psv.gz",
        [
            "pmid|domain|pub_date|title|abstract|mesh",
            "1|migraine|1987-01-01|Early||",
            "2|Magnesium|1987-06-01|Early||",
            "3|migraine|1988-03-01|Late||",
        ],
    )
    corpus = load_psv(path, label_a="magnesium", label_c="migraine", cutoff_date=date(1987, 12, 31))
    assert [doc.id for doc in corpus.documents] == ["1", "2"]
    assert corpus.count(DOMAIN_C) == 1 and corpus.count(DOMAIN_A) == 1
    assert "after cutoff" in corpus.rejections[0].reason


def test_schema_maps_header_names(tmp_path):
    path = write_raw(
        tmp_path / "schema.psv.gz",
        ["PMID|Group|Date|TI|AB|MH", "7|C|1984-01-01|A title|An abstract|X;Y"],
    )
    schema = {"pmid": "PMID", "domain": "Group", "pub_date": "Date", "title": "TI", "abstract": "AB", "mesh": "MH"}
    corpus = load_psv(path, schema)
    assert corpus.documents[0].abstract == "An abstract"
    assert corpus.documents[0].mesh_headings == ("X", "Y")


def test_missing_file_and_missing_columns(tmp_path):
    with pytest.raises(FixtureMissingError) as info:
        load_psv(tmp_path / "absent.psv.gz")
    assert info.value.path.endswith("absent.psv.gz")

    path = write_raw(tmp_path / "cols.psv.gz", ["pmid|title", "1|x"])
    with pytest.raises(CorpusLoadError):
        load_psv(path)


def test_shared_records_are_dropped_from_both_sides(toy_corpus):
    shared = make_doc("c1", DOMAIN_A, "Fish oil and Raynaud")
    corpus = toy_corpus.with_documents(toy_corpus.documents + (shared,))
    assert shared_ids(corpus) == ["c1"]
    cleaned = exclude_shared_records(corpus)
    assert "c1" not in {doc.id for doc in cleaned.documents}
    assert len(cleaned) == len(TOY_DOCUMENTS) - 1


def test_statistics_counts_each_domain(toy_corpus):
    stats = toy_corpus.statistics()
    assert stats["docs_a"] == 4
    assert stats["docs_c"] == 4
    assert stats["mean_words_c"] > 0


def test_gold_standard_uses_given_normalizer():
    gold = load_gold("RS-DFO", normalizer=str.upper)
    assert "BLOOD VISCOSITY" in gold.term_set
    assert gold.dataset_name == "RS-DFO"
    with pytest.raises(LookupError):
        load_gold("no-such-pair")


def test_registry_lookup_by_key_or_name():
    entry = get_dataset("Mig-Mg")
    assert entry.key == "mig-mg"
    assert entry.label_a == "magnesium"
    assert entry.cutoff_date == date(1987, 12, 31)
    assert get_dataset("aut-can").preprocess["fields_used"] == "title_and_abstract"
    with pytest.raises(LookupError):
        get_dataset("unknown")


def test_load_dataset_applies_registry_metadata(tmp_path, toy_snapshot):
    corpus = load_dataset("rs-dfo", tmp_path, snapshot=toy_snapshot)
    assert isinstance(corpus, DomainPairCorpus)
    assert corpus.query_terms_c == ("raynaud*",)
    assert corpus.cutoff_date == date(1985, 11, 30)
    assert len(corpus) == len(TOY_DOCUMENTS)


def test_rejections_carry_the_physical_line_number(tmp_path):
    path = write_raw(
        tmp_path / "lines.psv.gz",
        [
            "pmid|domain|pub_date|title|abstract|mesh",
            "1|C|1984-01-01|Good title||",
            "9|C|1984-01-01|Too|many|fields|here",
            "",
            "|C|1984-01-01|No id||",
            "2|A|1984-01-01|Also good||",
        ],
    )
    corpus = load_psv(path)
    assert [doc.id for doc in corpus.documents] == ["1", "2"]
    assert [(r.line, r.pmid) for r in corpus.rejections] == [(3, "9"), (5, "")]
    assert corpus.rejections[0].reason == "malformed row with 7 fields"


def test_save_psv_folds_text_that_the_format_cannot_hold(tmp_path):
    doc = make_doc("7", DOMAIN_C, "Fish  oil | blood\nviscosity", abstract="Line one\r\nline two", mesh=("Fish Oils",))
    loaded = load_psv(save_psv([doc], tmp_path / "folded.psv.gz")).documents[0]
    assert loaded.title == "Fish oil blood viscosity"
    assert loaded.abstract == "Line one line two"
    assert loaded.mesh_headings == ("Fish Oils",)
