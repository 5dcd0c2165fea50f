"""Exception hierarchy for the fewtune framework."""

from __future__ import annotations


class FewtuneError(Exception):
    """Base class for all framework errors."""


class SignatureError(FewtuneError):
    """A signature, demo, or input map violates its contract."""


class ParseFailureError(FewtuneError):
    """A completion could not be parsed back into output fields."""

    def __init__(self, message: str, *, module_label: str = "", field: str = ""):
        super().__init__(message)
        self.module_label = module_label
        self.field = field

    def with_module(self, label: str) -> "ParseFailureError":
        err = ParseFailureError(f"{label}: {self.args[0]}", module_label=label, field=self.field)
        return err


class ToolUnavailableError(FewtuneError):
    """The program's control procedure named a tool the environment lacks."""


class EmptyProgramError(FewtuneError):
    """A program run completed without invoking any module."""


class EmptyDatasetError(FewtuneError):
    """An evaluation was requested over zero examples."""


class BudgetExceededError(FewtuneError):
    """The prompt alone consumes the whole token budget."""


class MockMissError(FewtuneError):
    """The mock script has no entry for a prompt and no default."""


class TransportError(FewtuneError):
    """An HTTP generation request failed after bounded retries."""


class InsufficientExamplesError(FewtuneError):
    """Not enough examples to form disjoint train/validation splits."""


class InsufficientDataError(FewtuneError):
    """Too few kept traces to build a fine-tuning dataset.

    Carries the counts so callers can report how close the run came.
    """

    def __init__(self, message: str, *, kept_traces: int, records: int, required: int):
        super().__init__(message)
        self.kept_traces = kept_traces
        self.records = records
        self.required = required


class TrainerFailedError(FewtuneError):
    """The trainer job reached the failed state."""


class UnknownStrategyError(FewtuneError):
    """A strategy name outside the supported menu."""


class DataError(FewtuneError):
    """Dataset files missing, malformed, or undersized."""


class ProgramRunError(FewtuneError):
    """Wraps a module-level failure; carries the partial trace for diagnostics."""

    def __init__(self, message: str, *, trace=None):
        super().__init__(message)
        self.trace = trace
