import os
import sys
from datetime import date
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from lbdkit.corpus import DOMAIN_A, DOMAIN_C, Document, DomainPairCorpus, save_psv  # noqa: E402


def make_doc(doc_id, domain, title, abstract="", mesh=(), pub_date=date(1984, 1, 1)):
    return Document(
        id=doc_id,
        title=title,
        abstract=abstract,
        mesh_headings=tuple(mesh),
        pub_date=pub_date,
        domain=domain,
    )


# Raynaud (C) / fish oil (A) in miniature: blood viscosity and platelet
# aggregation are the shared terms.
TOY_DOCUMENTS = (
    make_doc("c1", DOMAIN_C, "Raynaud phenomenon and blood viscosity", mesh=("Raynaud Disease", "Blood Viscosity")),
    make_doc("c2", DOMAIN_C, "Platelet aggregation in Raynaud disease", mesh=("Raynaud Disease", "Platelet Aggregation")),
    make_doc("c3", DOMAIN_C, "Blood viscosity elevated in Raynaud patients", mesh=("Blood Viscosity", "Vasoconstriction")),
    make_doc("c4", DOMAIN_C, "Cold exposure and vasospasm", mesh=("Vasoconstriction",)),
    make_doc("a1", DOMAIN_A, "Fish oil lowers blood viscosity", mesh=("Fish Oils", "Blood Viscosity")),
    make_doc("a2", DOMAIN_A, "Dietary fish oil inhibits platelet aggregation", mesh=("Fish Oils", "Platelet Aggregation")),
    make_doc("a3", DOMAIN_A, "Fish oil and platelet aggregation in volunteers", mesh=("Platelet Aggregation",)),
    make_doc("a4", DOMAIN_A, "Eicosapentaenoic acid content of marine oils", mesh=("Eicosapentaenoic Acid",)),
)


@pytest.fixture
def toy_corpus():
    return DomainPairCorpus(
        label_a="dietary fish oil",
        label_c="Raynaud's disease",
        documents=TOY_DOCUMENTS,
        query_terms_a=("fish oil",),
        query_terms_c=("raynaud*",),
    )


@pytest.fixture
def toy_snapshot(tmp_path):
    return save_psv(TOY_DOCUMENTS, tmp_path / "toy.psv.gz")


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in list(os.environ):
        if name.startswith("LBDKIT_"):
            monkeypatch.delenv(name, raising=False)
