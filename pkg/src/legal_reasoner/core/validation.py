"""Data validation functions for case records."""

import re
from typing import TYPE_CHECKING, List

from pydantic import BaseModel, Field

from .models import CaseRecord

if TYPE_CHECKING:
    from ..knowledge.rule_kb import RuleKB


class ValidationResult(BaseModel):
    """Result of validating one record."""
    is_valid: bool
    errors: List[str] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.is_valid


class CaseValidator:
    """Validator for case records against a rule knowledge base."""

    @classmethod
    def validate_case(cls, record: CaseRecord, rules: "RuleKB") -> ValidationResult:
        """
        Check a record's semantic invariants.

        Args:
            record: Case record built from external input
            rules: Rule KB the record's charges must resolve against

        Returns:
            ValidationResult listing every violation found
        """
        errors: List[str] = []
        warnings: List[str] = []

        if not record.fact.text.strip():
            errors.append("empty fact")
        if not record.fact.case_id.strip():
            errors.append("empty case id")

        seen = set()
        for query in record.queries:
            name = query.charge_name
            if name in seen:
                errors.append(f"duplicate charge: {name}")
            seen.add(name)
            if name not in rules:
                errors.append(f"unknown charge: {name}")

        expected_guilty = [q for q in record.queries if q.expected_guilty]
        if len(expected_guilty) > 1:
            warnings.append("more than one query is expected guilty")
        if len(record.queries) == 1 and expected_guilty:
            warnings.append("single-query record expects a guilty verdict")

        return ValidationResult(is_valid=not errors, errors=errors, warnings=warnings)


def validate_case(record: CaseRecord, rules: "RuleKB") -> ValidationResult:
    """Validate one case record; returns violations rather than raising."""
    return CaseValidator.validate_case(record, rules)


def validate_corpus(records: List[CaseRecord], rules: "RuleKB") -> List[str]:
    """Validate every record plus corpus-wide case-id uniqueness."""
    violations: List[str] = []
    seen_ids = set()
    for index, record in enumerate(records, start=1):
        result = validate_case(record, rules)
        violations.extend(f"record {index} ({record.case_id}): {e}" for e in result.errors)
        if record.case_id in seen_ids:
            violations.append(f"record {index}: duplicate case id {record.case_id}")
        seen_ids.add(record.case_id)
    return violations


IF_PATTERN = re.compile(r"\bif\b", re.IGNORECASE)
THEN_PATTERN = re.compile(r"\bthen\b", re.IGNORECASE)


def has_if_then(text: str) -> bool:
    """True when an insight text contains both an 'if' and a 'then' token."""
    return bool(IF_PATTERN.search(text)) and bool(THEN_PATTERN.search(text))
