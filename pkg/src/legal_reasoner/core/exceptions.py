"""Custom exceptions for the legal reasoning engine.

Every error carries the exit code the CLI maps it to:
0 success, 1 usage, 2 backend failure, 3 data error.
"""

from typing import Any, Dict, List, Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BACKEND = 2
EXIT_DATA = 3


class ReasonerError(Exception):
    """Base exception for legal reasoning operations."""

    def __init__(
        self,
        message: str,
        exit_code: int = EXIT_DATA,
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


# Data errors

class DataError(ReasonerError):
    """Exception raised for malformed or inconsistent input data."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message=message, exit_code=EXIT_DATA, details=details)


class ConfigurationError(DataError):
    """Exception raised when configuration is invalid or incomplete."""


class CaseValidationError(DataError):
    """Exception raised when loaded case records violate their invariants."""

    def __init__(self, violations: List[str], details: Optional[Dict[str, Any]] = None):
        self.violations = violations
        preview = "; ".join(violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"Case validation failed: {preview}{more}", details=details)


class UnknownChargeError(DataError):
    """Exception raised when a charge name is absent from the rule KB."""

    def __init__(self, charge_name: str, details: Optional[Dict[str, Any]] = None):
        self.charge_name = charge_name
        super().__init__(f"Unknown charge: {charge_name}", details=details)


class TemplateError(DataError):
    """Exception raised for unusable prompt templates."""


class MissingSlotError(TemplateError):
    """Exception raised when a required template slot is not bound."""

    def __init__(self, template_name: str, slot: str):
        self.template_name = template_name
        self.slot = slot
        super().__init__(f"Template '{template_name}' is missing a binding for slot '{slot}'")


class PlanningError(DataError):
    """Exception raised when sub-task planning cannot proceed."""


class KnowledgeBaseError(DataError):
    """Exception raised for knowledge base failures."""


class DuplicateInsightError(KnowledgeBaseError):
    """Exception raised when an insight id is already present in the KB."""

    def __init__(self, insight_id: str):
        self.insight_id = insight_id
        super().__init__(f"Duplicate insight id: {insight_id}")


class KnowledgeBaseParseError(KnowledgeBaseError):
    """Exception raised when a knowledge base file cannot be parsed."""


class KnowledgeBaseWriteError(KnowledgeBaseError):
    """Exception raised when a knowledge base file cannot be written."""


class PreconditionError(DataError):
    """Exception raised when an operation is called outside its precondition."""


class TrialBudgetExceededError(DataError):
    """Exception raised when a retry would exceed the trial budget L."""

    def __init__(self, trial_index: int, max_trials: int):
        super().__init__(
            f"Trial budget exhausted: trial {trial_index} of at most {max_trials}",
            details={"trial_index": trial_index, "max_trials": max_trials}
        )


# Model output errors

class ModelOutputError(ReasonerError):
    """Exception raised when model output violates its expected format."""

    def __init__(self, message: str, raw: str = "", details: Optional[Dict[str, Any]] = None):
        self.raw = raw
        super().__init__(message=message, exit_code=EXIT_DATA, details=details)


class ParseError(ModelOutputError):
    """Exception raised when model output cannot be parsed."""


class ReflectionError(ModelOutputError):
    """Exception raised when a self-reflection report is unusable."""


class InsightFormatError(ModelOutputError):
    """Exception raised when a drawn insight is not in if-then form."""


class FilterError(ModelOutputError):
    """Exception raised when the insight filter references unknown ids."""


# Backend errors

class BackendError(ReasonerError):
    """Exception raised when a model backend fails."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message=message, exit_code=EXIT_BACKEND, details=details)


class BackendUnreachableError(BackendError):
    """Exception raised when a backend stays unreachable after retries."""


class MalformedResponseError(BackendError):
    """Exception raised when a backend returns a non-parseable payload."""

    def __init__(self, message: str, raw_payload: Any = None):
        self.raw_payload = raw_payload
        super().__init__(message, details={"raw_payload": str(raw_payload)[:2000]})


class EmbeddingError(BackendError):
    """Exception raised when text cannot be embedded."""


class OracleError(BackendError):
    """Exception raised when the knowledge-feedback expert fails."""


class OracleUnreachableError(OracleError):
    """Exception raised when the expert endpoint stays unreachable."""


class OracleEndOfInputError(OracleError):
    """Exception raised when the console expert reaches end of input."""


class JudgmentAbortedError(ReasonerError):
    """Exception raised when a charge judgment aborts mid-trajectory."""

    def __init__(self, charge_name: str, cause: ReasonerError, partial_answers: Optional[list] = None):
        self.charge_name = charge_name
        self.cause = cause
        self.partial_answers = partial_answers or []
        super().__init__(
            message=f"Judgment of '{charge_name}' aborted: {cause.message}",
            exit_code=cause.exit_code,
            details={"answered": len(self.partial_answers)}
        )
