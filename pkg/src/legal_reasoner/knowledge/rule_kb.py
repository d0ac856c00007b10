"""Legal rule knowledge base keyed by charge name."""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional

from pydantic import ValidationError

from ..core.exceptions import KnowledgeBaseError, KnowledgeBaseParseError, KnowledgeBaseWriteError, UnknownChargeError
from ..core.models import LegalRule

logger = logging.getLogger(__name__)


class RuleKB:
    """Exact-match lookup of charge definitions."""

    def __init__(self, rules: Optional[Iterable[LegalRule]] = None):
        self._rules: Dict[str, LegalRule] = {}
        for rule in rules or ():
            self.add(rule)

    def add(self, rule: LegalRule) -> None:
        if rule.charge_name in self._rules:
            raise KnowledgeBaseError(f"Duplicate charge in rule KB: {rule.charge_name}")
        self._rules[rule.charge_name] = rule

    def get_rule(self, charge_name: str) -> LegalRule:
        """
        Look up a charge definition.

        Args:
            charge_name: Exact charge name

        Returns:
            The charge's LegalRule
        """
        try:
            return self._rules[charge_name]
        except KeyError:
            raise UnknownChargeError(charge_name)

    def names(self) -> List[str]:
        return list(self._rules)

    def rules(self) -> List[LegalRule]:
        return list(self._rules.values())

    def __contains__(self, charge_name: object) -> bool:
        return charge_name in self._rules

    def __len__(self) -> int:
        return len(self._rules)

    def __iter__(self) -> Iterator[LegalRule]:
        return iter(self._rules.values())

    def to_document(self) -> List[Dict[str, Optional[str]]]:
        return [
            {"name": r.charge_name, "rule": r.text, "article_ref": r.article_ref}
            for r in self._rules.values()
        ]

    def save(self, path: Path) -> None:
        path = Path(path)
        try:
            path.write_text(json.dumps(self.to_document(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        except OSError as e:
            raise KnowledgeBaseWriteError(f"Cannot write rule KB to {path}: {e}")

    @classmethod
    def load(cls, path: Path) -> "RuleKB":
        """
        Load a rule KB document: a list of ``{name, rule, article_ref}``.

        Args:
            path: JSON file

        Returns:
            RuleKB in file order
        """
        path = Path(path)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise KnowledgeBaseError(f"Cannot read rule KB {path}: {e}")
        except UnicodeDecodeError as e:
            raise KnowledgeBaseParseError(f"Rule KB {path} is not UTF-8 text: {e}")
        except json.JSONDecodeError as e:
            raise KnowledgeBaseParseError(f"Rule KB {path} is not valid JSON: {e}")

        if not isinstance(document, list):
            raise KnowledgeBaseParseError(f"Rule KB {path} must contain a list of rules")

        kb = cls()
        for index, record in enumerate(document):
            try:
                rule = LegalRule(
                    charge_name=record["name"],
                    text=record["rule"],
                    article_ref=record.get("article_ref")
                )
            except (KeyError, TypeError, AttributeError, ValidationError) as e:
                raise KnowledgeBaseParseError(f"Rule KB {path}: record {index} is malformed: {e}")
            kb.add(rule)

        logger.debug(f"Loaded {len(kb)} rules from {path}")
        return kb
