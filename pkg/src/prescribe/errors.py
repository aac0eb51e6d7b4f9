"""Exception hierarchy shared across the package.

Domain errors subclass PrescribeError so callers (CLI, server) can map them
to exit code 1 / HTTP 4xx uniformly; programming errors stay as builtins.
"""

from __future__ import annotations


class PrescribeError(Exception):
    """Base class for all domain errors raised by this package."""


# --- metadata / dataset -----------------------------------------------------

class MissingField(PrescribeError):
    pass


class UnknownDtype(PrescribeError):
    pass


class ActionEqualsOutcome(PrescribeError):
    pass


class DuplicateColumn(PrescribeError):
    pass


class HeaderMismatch(PrescribeError):
    pass


class EmptyTable(PrescribeError):
    pass


class UnknownColumn(PrescribeError):
    pass


# --- estimation -------------------------------------------------------------

class TooFewRows(PrescribeError):
    pass


class NoCovariates(PrescribeError):
    pass


class NoMatchingRows(PrescribeError):
    pass


# --- policy optimization ----------------------------------------------------

class InfeasibleBudget(PrescribeError):
    pass


class NonNumericActionWithoutCosts(PrescribeError):
    pass


class TooFewRules(PrescribeError):
    pass


# --- tool dispatch ----------------------------------------------------------

class MissingParam(PrescribeError):
    """Required tool parameters absent from the merged call/memory set."""

    def __init__(self, params: list[str]):
        self.params = list(params)
        super().__init__(f"missing required parameters: {self.params}")


class BadParamType(PrescribeError):
    def __init__(self, name: str, detail: str = ""):
        self.name = name
        msg = f"parameter {name!r} has invalid type"
        super().__init__(msg + (f": {detail}" if detail else ""))


# --- NLU / providers --------------------------------------------------------

class ProviderUnavailable(PrescribeError):
    pass


class ProviderTimeout(ProviderUnavailable):
    pass


class ProviderHttpError(ProviderUnavailable):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"provider returned HTTP {status}" + (f": {detail}" if detail else ""))


class ScriptExhausted(PrescribeError):
    pass


class MalformedCompletion(PrescribeError):
    pass


# --- generation pipeline / reports -------------------------------------------

class NoSupportedColumns(PrescribeError):
    pass


class UnsupportedFormat(PrescribeError):
    pass
