import pytest

from lbdkit.choices import ChoiceMatcher, locate_snapshot, prompt_choices, read_choice_lines, term_slug, write_choice_lines
from lbdkit.config import CHOICES_DIR
from lbdkit.errors import ChoiceValidationError, FixtureMissingError
from lbdkit.evalkit import RankedList
from lbdkit.textprep import PreprocessConfig, get_normalizer

HEADINGS = RankedList.from_scores(
    {
        "Vasoconstriction": 9.0,
        "Platelet Aggregation": 8.0,
        "Cortical Spreading Depression": 7.0,
        "Calcium Channels": 6.0,
        "Calcium Channel Blockers": 5.0,
    }
)


def matcher():
    return ChoiceMatcher(HEADINGS, get_normalizer(PreprocessConfig()), "b-concept")


def test_slugs():
    assert term_slug("Proto-Oncogene Proteins c-bcl-2") == "proto-oncogene-proteins-c-bcl-2"
    assert term_slug("  Platelet Aggregation ") == "platelet-aggregation"


def test_choices_match_on_normalized_word_sets():
    resolve = matcher().resolve
    assert resolve("Vasoconstriction") == "Vasoconstriction"
    assert resolve("platelet aggregations") == "Platelet Aggregation"
    assert resolve("Spreading Cortical Depression") == "Cortical Spreading Depression"


def test_choice_absent_from_ranking_is_rejected_even_when_one_key_contains_it():
    with pytest.raises(ChoiceValidationError) as info:
        matcher().resolve("blockers")
    assert info.value.suggestions[0] == "Calcium Channel Blockers"
    with pytest.raises(ChoiceValidationError) as info:
        matcher().resolve("calcium channel blockers of the heart")
    assert "Calcium Channel Blockers" in info.value.suggestions


def test_ambiguous_or_unknown_choice_is_rejected_with_suggestions():
    with pytest.raises(ChoiceValidationError):
        matcher().resolve("calcium")
    with pytest.raises(ChoiceValidationError) as info:
        matcher().resolve("Vasoconstrictions of doom")
    assert info.value.stage == "b-concept"


def test_suggestions_name_close_keys():
    with pytest.raises(ChoiceValidationError) as info:
        matcher().resolve("Vasoconstrictoin")
    assert info.value.suggestions == ["Vasoconstriction"]


def test_resolve_all_drops_repeats():
    assert matcher().resolve_all(["Vasoconstriction", "vasoconstriction"]) == ["Vasoconstriction"]


def test_shipped_choice_file_resolves_against_its_headings():
    lines = read_choice_lines(CHOICES_DIR / "mig-mg.b_concepts.txt")
    assert matcher().resolve_all(lines) == [
        "Vasoconstriction",
        "Platelet Aggregation",
        "Cortical Spreading Depression",
    ]


def test_choice_files_round_trip_and_missing(tmp_path):
    path = write_choice_lines(["a", "b"], tmp_path / "c.txt", header="picked by hand")
    assert read_choice_lines(path) == ["a", "b"]
    with pytest.raises(FixtureMissingError):
        read_choice_lines(tmp_path / "absent.txt")


def test_locate_snapshot_tries_each_name(tmp_path):
    (tmp_path / "platelet-aggregation.psv.gz").write_bytes(b"")
    assert locate_snapshot(tmp_path, ["Blood Platelets", "Platelet Aggregation"]).name == "platelet-aggregation.psv.gz"
    with pytest.raises(FixtureMissingError) as info:
        locate_snapshot(tmp_path, ["Serotonin"])
    assert info.value.path.endswith("serotonin.psv.gz")


def test_prompt_pages_and_reads_positions():
    answers = iter(["n", "p", "oops", "9", "1, 3,3"])
    shown = []
    chosen = prompt_choices(HEADINGS, "b-concept", input_fn=lambda _: next(answers), output_fn=shown.append, page_size=2)
    assert chosen == ["Vasoconstriction", "Cortical Spreading Depression"]
    assert "[b-concept] page 2/3" in shown
    assert any("not a position list" in line for line in shown)


def test_single_choice_prompt_insists_on_one():
    answers = iter(["1,2", "2"])
    shown = []
    chosen = prompt_choices(HEADINGS, "jo", multiple=False, input_fn=lambda _: next(answers), output_fn=shown.append)
    assert chosen == ["Platelet Aggregation"]
    assert "choose exactly one position" in shown
