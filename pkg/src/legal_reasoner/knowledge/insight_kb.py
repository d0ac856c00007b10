"""Rule-insight knowledge base: I[charge][sub-task] -> ordered insights."""

import json
import logging
import threading
from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple

from pydantic import ValidationError

from ..core.exceptions import DuplicateInsightError, KnowledgeBaseError, KnowledgeBaseParseError, KnowledgeBaseWriteError
from ..core.models import Insight, InsightSource

logger = logging.getLogger(__name__)

DOCUMENT_VERSION = 1


class InsightKB:
    """Insights bucketed by charge, then by sub-task, in insertion order."""

    def __init__(self):
        self._buckets: Dict[str, Dict[str, List[Insight]]] = {}
        self._ids = set()
        self._lock = threading.Lock()
        self.reads = 0

    def put_insight(self, insight: Insight) -> None:
        """Append an insight to its bucket; ids are unique KB-wide."""
        with self._lock:
            self._put(insight)

    def _put(self, insight: Insight) -> None:
        if insight.id in self._ids:
            raise DuplicateInsightError(insight.id)
        self._ids.add(insight.id)
        self._buckets.setdefault(insight.charge_name, {}).setdefault(insight.subtask_id, []).append(insight)

    def get_insights(self, charge_name: str, subtask_id: str) -> List[Insight]:
        with self._lock:
            self.reads += 1
            return list(self._buckets.get(charge_name, {}).get(subtask_id, []))

    def buckets_for(self, charge_name: str) -> Dict[str, Tuple[Insight, ...]]:
        """All sub-task buckets of one charge."""
        with self._lock:
            self.reads += 1
            return {sid: tuple(items) for sid, items in self._buckets.get(charge_name, {}).items()}

    def commit(self, drafts: Iterable[Insight]) -> List[Insight]:
        """
        Write drafted insights under final ids ``<charge>/<sub-task>/<n>``.

        Drafts carry provisional ids; this is the single writer used by
        training, so numbering follows commit order.

        Args:
            drafts: Insights with provisional ids

        Returns:
            The committed insights with their final ids
        """
        committed: List[Insight] = []
        with self._lock:
            for draft in drafts:
                bucket = self._buckets.get(draft.charge_name, {}).get(draft.subtask_id, [])
                n = len(bucket) + 1
                final_id = f"{draft.charge_name}/{draft.subtask_id}/{n}"
                while final_id in self._ids:
                    n += 1
                    final_id = f"{draft.charge_name}/{draft.subtask_id}/{n}"
                insight = draft.model_copy(update={"id": final_id})
                self._put(insight)
                committed.append(insight)
        logger.debug(f"Committed {len(committed)} insights")
        return committed

    def has_charge(self, charge_name: str) -> bool:
        return any(self._buckets.get(charge_name, {}).values())

    def charges(self) -> List[str]:
        return [c for c, buckets in self._buckets.items() if any(buckets.values())]

    def subtask_counts(self) -> Dict[str, Dict[str, int]]:
        return {
            charge: {sid: len(items) for sid, items in buckets.items()}
            for charge, buckets in self._buckets.items()
        }

    def all_insights(self) -> List[Insight]:
        return [i for buckets in self._buckets.values() for items in buckets.values() for i in items]

    def __len__(self) -> int:
        return len(self._ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InsightKB):
            return NotImplemented
        return self.to_document() == other.to_document()

    def to_document(self) -> Dict[str, Any]:
        return {
            "version": DOCUMENT_VERSION,
            "charges": {
                charge: {
                    sid: [
                        {
                            "id": i.id,
                            "text": i.text,
                            "source": i.source.value,
                            "origin_charge": i.origin_charge,
                        }
                        for i in items
                    ]
                    for sid, items in buckets.items()
                }
                for charge, buckets in self._buckets.items()
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, ensure_ascii=False) + "\n"

    def save(self, path: Path) -> None:
        path = Path(path)
        try:
            path.write_text(self.dumps(), encoding="utf-8")
        except OSError as e:
            raise KnowledgeBaseWriteError(f"Cannot write insight KB to {path}: {e}")
        logger.info(f"Saved {len(self)} insights to {path}")

    @classmethod
    def from_document(cls, document: Any, source: str = "<document>") -> "InsightKB":
        if not isinstance(document, dict) or not isinstance(document.get("charges"), dict):
            raise KnowledgeBaseParseError(f"Insight KB {source} must be an object with a 'charges' mapping")

        kb = cls()
        for charge, buckets in document["charges"].items():
            if not isinstance(buckets, dict):
                raise KnowledgeBaseParseError(f"Insight KB {source}: charge '{charge}' must map sub-tasks to lists")
            for sid, records in buckets.items():
                if not isinstance(records, list):
                    raise KnowledgeBaseParseError(f"Insight KB {source}: bucket {charge}/{sid} must be a list")
                # Empty buckets survive the round trip
                kb._buckets.setdefault(charge, {}).setdefault(sid, [])
                for index, record in enumerate(records):
                    try:
                        insight = Insight(
                            id=record["id"],
                            charge_name=charge,
                            subtask_id=sid,
                            text=record["text"],
                            source=InsightSource(record["source"]),
                            origin_charge=record.get("origin_charge")
                        )
                    except (KeyError, TypeError, AttributeError, ValueError, ValidationError) as e:
                        raise KnowledgeBaseParseError(
                            f"Insight KB {source}: record {charge}/{sid}[{index}] is malformed: {e}"
                        )
                    try:
                        kb._put(insight)
                    except DuplicateInsightError as e:
                        raise KnowledgeBaseParseError(f"Insight KB {source}: {e.message}")
        return kb

    @classmethod
    def load(cls, path: Path) -> "InsightKB":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise KnowledgeBaseError(f"Cannot read insight KB {path}: {e}")
        except UnicodeDecodeError as e:
            raise KnowledgeBaseParseError(f"Insight KB {path} is not UTF-8 text: {e}")
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise KnowledgeBaseParseError(f"Insight KB {path} is not valid JSON: {e}")
        kb = cls.from_document(document, source=str(path))
        logger.debug(f"Loaded {len(kb)} insights from {path}")
        return kb
