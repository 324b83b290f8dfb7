from __future__ import annotations

from typing import List, Optional, Sequence


class LbdError(Exception):
    """Base class for every error raised by lbdkit."""


class ConfigError(LbdError):
    pass


class CorpusLoadError(LbdError):
    pass


class FixtureMissingError(LbdError):
    def __init__(self, path: object, purpose: Optional[str] = None) -> None:
        self.path = str(path)
        self.purpose = purpose
        detail = f" ({purpose})" if purpose else ""
        super().__init__(f"Required fixture not found: {self.path}{detail}")


class VocabularyMismatchError(LbdError):
    pass


class MatrixKindError(LbdError):
    pass


class NotACandidateError(LbdError):
    pass


class EmptyGoldError(LbdError):
    pass


class PipelineInapplicableError(LbdError):
    pass


class RankLookupError(LbdError, LookupError):
    pass


class UnknownNodeError(LbdError, LookupError):
    pass


class InsufficientNegativesError(LbdError):
    pass


class RankDeficientError(LbdError):
    pass


class ChoiceValidationError(LbdError):
    def __init__(self, choice: str, stage: str, suggestions: Sequence[str] = ()) -> None:
        self.choice = choice
        self.stage = stage
        self.suggestions: List[str] = list(suggestions)
        hint = f"; did you mean: {', '.join(self.suggestions)}" if self.suggestions else ""
        super().__init__(f"{stage} choice '{choice}' is not in the ranking{hint}")


class EmptyIntersectionError(LbdError):
    pass
