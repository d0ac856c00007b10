"""Parsers for structured lines in model output."""

import logging
import re
from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict

from ..core.exceptions import ParseError
from ..core.models import Finding

logger = logging.getLogger(__name__)

ANSWER_LINE = re.compile(r"^\s*\**ANSWER\**\s*:\s*\**\s*(YES|NO|UNCERTAIN)\b", re.IGNORECASE | re.MULTILINE)
ENUMERATED_LINE = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+(.+?)\s*$", re.MULTILINE)
MAPPING_LINE = re.compile(r"^\s*(.+?)\s*(?:=>|->)\s*(.+?)\s*$", re.MULTILINE)
ASPECT_LINE = re.compile(r"^\s*ASPECT\s+([\w\-]+)\s*:\s*(.+?)\s*$", re.MULTILINE)
ERROR_LINE = re.compile(r"^\s*ERROR\s+([\w\-]+)\s*:\s*(.+?)\s*$", re.MULTILINE)
ELEMENT_LINE = re.compile(r"^\s*ELEMENT\s+([\w\-]+)\s*:\s*(YES|NO|UNCERTAIN)\b", re.IGNORECASE | re.MULTILINE)

UNCERTAIN_WORDS = re.compile(r"\b(uncertain|unclear|undetermined|cannot (?:be )?determined?|insufficient)\b")
NEGATIVE_WORDS = re.compile(r"\b(no|not|never|fails?|unsatisfied)\b")
POSITIVE_WORDS = re.compile(r"\b(yes|satisfied|satisfies|met|meets|established)\b")

_ANSWER_FINDINGS = {
    "YES": Finding.SATISFIED,
    "NO": Finding.NOT_SATISFIED,
    "UNCERTAIN": Finding.UNCERTAIN,
}


class ParsedFinding(BaseModel):
    """Finding extracted from a completion."""
    model_config = ConfigDict(frozen=True)

    finding: Finding
    rationale: str
    flagged: bool = False


def _last_sentence(text: str) -> str:
    sentences = [s.strip() for s in re.split(r"[.!?\n]+", text) if s.strip()]
    return sentences[-1] if sentences else ""


def parse_finding(raw: str) -> ParsedFinding:
    """
    Extract a tri-state finding from a completion. Never raises.

    The final ``ANSWER: YES|NO|UNCERTAIN`` line wins. Without one, the last
    sentence is scanned for keywords. Without those, the finding is
    uncertain and flagged.

    Args:
        raw: Completion text

    Returns:
        ParsedFinding with the rationale text
    """
    matches = list(ANSWER_LINE.finditer(raw))
    if matches:
        last = matches[-1]
        rationale = raw[:last.start()].strip()
        return ParsedFinding(finding=_ANSWER_FINDINGS[last.group(1).upper()], rationale=rationale)

    sentence = _last_sentence(raw).lower()
    if UNCERTAIN_WORDS.search(sentence):
        finding = Finding.UNCERTAIN
    elif NEGATIVE_WORDS.search(sentence):
        finding = Finding.NOT_SATISFIED
    elif POSITIVE_WORDS.search(sentence):
        finding = Finding.SATISFIED
    else:
        logger.warning("Completion has no answer line and no verdict keyword; treating as uncertain")
        return ParsedFinding(finding=Finding.UNCERTAIN, rationale=raw.strip(), flagged=True)

    logger.debug(f"No answer line; keyword scan gave {finding.value}")
    return ParsedFinding(finding=finding, rationale=raw.strip())


def parse_enumerated_list(raw: str) -> List[Tuple[str, str]]:
    """Numbered or bulleted ``Label: description`` items, in output order."""
    items: List[Tuple[str, str]] = []
    for match in ENUMERATED_LINE.finditer(raw):
        body = match.group(1)
        label, _, description = body.partition(":")
        label = label.strip().strip("*").strip()
        if label:
            items.append((label, description.strip()))
    if not items:
        raise ParseError("No enumerated list found in model output", raw=raw)
    return items


def parse_mapping(raw: str) -> Dict[str, str]:
    """``raw => canonical`` lines as a dict."""
    mapping: Dict[str, str] = {}
    for match in MAPPING_LINE.finditer(raw):
        source = match.group(1).strip().lstrip("-*").strip()
        target = match.group(2).strip()
        if source and target:
            mapping[source] = target
    return mapping


def parse_id_list(raw: str, keyword: str) -> List[str]:
    """
    Ids from the last ``KEYWORD: a, b`` line; ``none`` means no ids.

    Raises ParseError when no such line exists.
    """
    pattern = re.compile(rf"^\s*{re.escape(keyword)}\s*:\s*(.*?)\s*$", re.IGNORECASE | re.MULTILINE)
    matches = list(pattern.finditer(raw))
    if not matches:
        raise ParseError(f"No '{keyword}:' line found in model output", raw=raw)
    value = matches[-1].group(1)
    if value.strip().lower() in ("", "none"):
        return []
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_aspect_lines(raw: str) -> List[Tuple[str, str]]:
    """``ASPECT <id>: <text>`` lines."""
    return [(m.group(1), m.group(2)) for m in ASPECT_LINE.finditer(raw)]


def parse_error_lines(raw: str) -> List[Tuple[str, str]]:
    """``ERROR <id>: <reason>`` lines."""
    return [(m.group(1), m.group(2)) for m in ERROR_LINE.finditer(raw)]


def parse_element_lines(raw: str) -> List[Tuple[str, Finding]]:
    """``ELEMENT <key>: YES|NO|UNCERTAIN`` lines."""
    return [(m.group(1), _ANSWER_FINDINGS[m.group(2).upper()]) for m in ELEMENT_LINE.finditer(raw)]


def single_line(text: str) -> str:
    """Collapse whitespace so a text fits on one prompt line."""
    return " ".join(text.split())
