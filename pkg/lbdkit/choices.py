"""Expert choices: choice files, matching against rankings, terminal prompting."""

from __future__ import annotations

import difflib
import re
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence

from lbdkit.errors import ChoiceValidationError, FixtureMissingError
from lbdkit.evalkit import RankedList
from lbdkit.logging import get_logger, log_warning
from lbdkit.textprep import TermNormalizer, tokenize

PAGE_SIZE = 50
MAX_SUGGESTIONS = 5
SNAPSHOT_SUFFIX = ".psv.gz"

_SLUG_RE = re.compile(r"[^a-z0-9]+")


def term_slug(term: str) -> str:
    return _SLUG_RE.sub("-", term.lower()).strip("-")


def locate_snapshot(directory: Path, names: Sequence[str]) -> Path:
    """First existing ``<slug>.psv.gz`` among ``names``; the error names the first candidate."""
    candidates = [Path(directory) / f"{term_slug(name)}{SNAPSHOT_SUFFIX}" for name in names if name]
    for path in candidates:
        if path.exists():
            return path
    raise FixtureMissingError(candidates[0] if candidates else directory, "second-level snapshot")


def read_choice_lines(path: Path) -> List[str]:
    path = Path(path)
    if not path.exists():
        raise FixtureMissingError(path, "choice file")
    return [
        line.strip()
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]


class ChoiceMatcher:
    """Resolves free-text expert choices to keys of one ranking.

    Keys compare as sets of normalized words, so case, word order and
    inflection do not matter. Anything else is rejected; keys sharing words with
    the choice lead the suggestions.
    """

    def __init__(self, ranked: RankedList, normalizer: TermNormalizer, stage: str) -> None:
        self.ranked = ranked
        self.normalizer = normalizer
        self.stage = stage
        self._keys: Dict[str, FrozenSet[str]] = {key: self.words(key) for key in ranked.keys()}

    def words(self, text: str) -> FrozenSet[str]:
        normalized = self.normalizer.normalize(tokenize(text))
        return frozenset(normalized or tokenize(text))

    def resolve(self, choice: str) -> str:
        if choice in self.ranked:
            return choice
        wanted = self.words(choice)
        same = [key for key, words in self._keys.items() if words == wanted]
        if same:
            if len(same) > 1:
                log_warning(get_logger(), "ambiguous_choice", {"stage": self.stage, "choice": choice, "matches": same})
            return same[0]
        raise ChoiceValidationError(choice, self.stage, self.suggest(choice, wanted))

    def suggest(self, choice: str, wanted: FrozenSet[str], limit: int = MAX_SUGGESTIONS) -> List[str]:
        overlapping = [key for key, words in self._keys.items() if wanted and (wanted <= words or words <= wanted)]
        lookup = {key.lower(): key for key in self._keys}
        close = difflib.get_close_matches(choice.lower(), list(lookup), n=limit, cutoff=0.6)
        suggestions: List[str] = []
        for key in overlapping + [lookup[c] for c in close]:
            if key not in suggestions:
                suggestions.append(key)
        return suggestions[:limit]

    def resolve_all(self, choices: Iterable[str]) -> List[str]:
        resolved: List[str] = []
        for choice in choices:
            key = self.resolve(choice)
            if key not in resolved:
                resolved.append(key)
        return resolved


def prompt_choices(
    ranked: RankedList,
    stage: str,
    multiple: bool = True,
    input_fn: Callable[[str], str] = input,
    output_fn: Callable[[str], None] = print,
    page_size: int = PAGE_SIZE,
) -> List[str]:
    """Page through ``ranked`` and read positions (``12`` or ``3,37,377``).

    ``n``/``p`` move between pages. An empty answer on a page keeps paging.
    """
    if not len(ranked):
        raise ChoiceValidationError("", stage, [])
    keys = ranked.keys()
    scores = ranked.scores()
    pages = (len(keys) + page_size - 1) // page_size
    page = 0
    while True:
        start = page * page_size
        output_fn(f"[{stage}] page {page + 1}/{pages}")
        for index in range(start, min(start + page_size, len(keys))):
            output_fn(f"{index + 1:>6}  {keys[index]}  ({scores[index]:.4f})")
        answer = input_fn("positions, n(ext), p(rev): ").strip().lower()
        if answer in ("", "n"):
            page = (page + 1) % pages
            continue
        if answer == "p":
            page = (page - 1) % pages
            continue
        try:
            positions = [int(part) for part in answer.replace(" ", "").split(",") if part]
        except ValueError:
            output_fn(f"not a position list: {answer}")
            continue
        if not positions or any(p < 1 or p > len(keys) for p in positions):
            output_fn(f"positions must be between 1 and {len(keys)}")
            continue
        if not multiple and len(positions) != 1:
            output_fn("choose exactly one position")
            continue
        chosen: List[str] = []
        for position in positions:
            if keys[position - 1] not in chosen:
                chosen.append(keys[position - 1])
        return chosen


def write_choice_lines(lines: Sequence[str], path: Path, header: Optional[str] = None) -> Path:
    body = ([f"# {header}"] if header else []) + list(lines)
    Path(path).write_text("\n".join(body) + "\n", encoding="utf-8")
    return path
