"""Prompt templates with named ``{slot}`` placeholders."""

import logging
import re
from pathlib import Path
from typing import Dict, FrozenSet, Mapping, Optional

from pydantic import BaseModel, ConfigDict, model_validator

from ..core.exceptions import MissingSlotError, TemplateError

logger = logging.getLogger(__name__)

SLOT_PATTERN = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class PromptTemplate(BaseModel):
    """A named prompt body with declared slots."""
    model_config = ConfigDict(frozen=True)

    name: str
    body: str
    required_slots: FrozenSet[str] = frozenset()

    @model_validator(mode="after")
    def validate_slots(self):
        """Every required slot must occur in the body."""
        present = self.slots
        absent = sorted(self.required_slots - present)
        if absent:
            raise ValueError(f"Template '{self.name}' declares slots absent from its body: {absent}")
        return self

    @property
    def slots(self) -> FrozenSet[str]:
        return frozenset(SLOT_PATTERN.findall(self.body))

    @classmethod
    def from_body(cls, name: str, body: str) -> "PromptTemplate":
        """Build a template whose body slots are all required."""
        return cls(name=name, body=body, required_slots=frozenset(SLOT_PATTERN.findall(body)))


def render(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """
    Substitute every slot occurrence in a template body.

    Values are inserted verbatim and never re-scanned, so bound text may
    itself contain braces.

    Args:
        template: Template to render
        bindings: Slot name to text

    Returns:
        Rendered prompt text
    """
    for slot in sorted(template.required_slots):
        if slot not in bindings:
            raise MissingSlotError(template.name, slot)

    def substitute(match: "re.Match[str]") -> str:
        slot = match.group(1)
        if slot in bindings:
            return str(bindings[slot])
        # Optional slot left unbound
        return ""

    return SLOT_PATTERN.sub(substitute, template.body)


class TemplateLibrary:
    """Templates loaded from a directory of ``<name>.txt`` assets."""

    OPTIONAL_SLOTS: Dict[str, FrozenSet[str]] = {
        "subtask_agent": frozenset({"insights", "feedback", "reflection"}),
    }

    def __init__(self, templates: Optional[Dict[str, PromptTemplate]] = None):
        self._templates: Dict[str, PromptTemplate] = dict(templates or {})

    @classmethod
    def load(cls, directory: Path) -> "TemplateLibrary":
        """
        Load every ``*.txt`` template in a directory.

        Args:
            directory: Templates directory

        Returns:
            TemplateLibrary keyed by file stem
        """
        directory = Path(directory)
        if not directory.is_dir():
            raise TemplateError(f"Templates directory not found: {directory}")

        templates: Dict[str, PromptTemplate] = {}
        for path in sorted(directory.glob("*.txt")):
            try:
                body = path.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as e:
                raise TemplateError(f"Cannot read template {path}: {e}")
            name = path.stem
            slots = frozenset(SLOT_PATTERN.findall(body))
            optional = cls.OPTIONAL_SLOTS.get(name, frozenset())
            templates[name] = PromptTemplate(name=name, body=body, required_slots=slots - optional)

        logger.debug(f"Loaded {len(templates)} templates from {directory}")
        return cls(templates)

    def get(self, name: str) -> PromptTemplate:
        try:
            return self._templates[name]
        except KeyError:
            raise TemplateError(f"Template not found: {name}")

    def add(self, template: PromptTemplate) -> None:
        self._templates[template.name] = template

    def render(self, name: str, bindings: Mapping[str, str]) -> str:
        return render(self.get(name), bindings)

    def __contains__(self, name: object) -> bool:
        return name in self._templates

    def names(self):
        return sorted(self._templates)
