"""Nearest-rule insight transfer for charges without trained insights."""

import logging
import threading
from typing import Dict, List, Optional, Sequence, Tuple

from ..core.exceptions import InsightFormatError, KnowledgeBaseError
from ..core.models import Insight, InsightSource, LegalRule
from ..core.validation import has_if_then
from ..gateway.embeddings import EmbeddingVector, cosine_similarity
from ..gateway.gateway import ModelGateway
from ..judgment.parsing import parse_aspect_lines, single_line
from .insight_kb import InsightKB
from .rule_kb import RuleKB

logger = logging.getLogger(__name__)


class InsightTransfer:
    """Adapts the insights of the most similar trained rule to an unseen rule."""

    def __init__(
        self,
        gateway: ModelGateway,
        rules: RuleKB,
        insights: InsightKB,
        subtask_ids: Optional[Sequence[str]] = None,
        template_name: str = "insight_transfer"
    ):
        """
        Initialize the transfer component.

        Args:
            gateway: Model gateway for embeddings and the adaptation call
            rules: Rule KB holding the trained charges' definitions
            insights: Trained insight KB
            subtask_ids: Active sub-task ids; adapted lines for other ids are dropped
            template_name: Adaptation template
        """
        self.gateway = gateway
        self.rules = rules
        self.insights = insights
        self.subtask_ids = list(subtask_ids) if subtask_ids is not None else None
        self.template_name = template_name
        self._embeddings: Dict[str, EmbeddingVector] = {}
        self._lock = threading.Lock()

    def _embedding(self, key: str, text: str) -> EmbeddingVector:
        with self._lock:
            cached = self._embeddings.get(key)
        if cached is not None:
            return cached
        vector = self.gateway.embed(text)
        with self._lock:
            self._embeddings.setdefault(key, vector)
        return vector

    def candidates(self, exclude: Optional[str] = None) -> List[LegalRule]:
        """Trained charges with a known rule, sorted by charge name."""
        names = sorted(c for c in self.insights.charges() if c in self.rules and c != exclude)
        return [self.rules.get_rule(name) for name in names]

    def nearest_neighbor(self, unseen_rule: LegalRule) -> Tuple[LegalRule, float]:
        """
        Top-1 trained rule by cosine similarity of rule texts.

        Ties go to the lexicographically smallest charge name.

        Args:
            unseen_rule: Rule of the charge without insights

        Returns:
            (neighbor rule, similarity)
        """
        candidates = self.candidates(exclude=unseen_rule.charge_name)
        if not candidates:
            raise KnowledgeBaseError("Insight KB holds no trained charge to transfer from")

        target = self.gateway.embed(unseen_rule.text)
        best: Optional[LegalRule] = None
        best_score = float("-inf")
        for rule in candidates:
            score = cosine_similarity(target, self._embedding(rule.charge_name, rule.text))
            if score > best_score:
                best, best_score = rule, score
        logger.debug(f"Nearest trained rule to '{unseen_rule.charge_name}': '{best.charge_name}' ({best_score:.3f})")
        return best, best_score

    def transfer_insights(self, unseen_rule: LegalRule) -> List[Insight]:
        """
        Generate insights for an unseen charge from its nearest trained rule.

        The neighbor's whole insight bucket serves as the few-shot material.

        Args:
            unseen_rule: Rule of the charge without insights

        Returns:
            Insights keyed to the unseen charge with source=transfer
        """
        neighbor, score = self.nearest_neighbor(unseen_rule)
        buckets = self.insights.buckets_for(neighbor.charge_name)
        neighbor_lines = [
            f"ASPECT {sid}: {single_line(insight.text)}"
            for sid, items in buckets.items() for insight in items
        ]
        allowed = self.subtask_ids if self.subtask_ids is not None else list(buckets)

        result = self.gateway.complete_template(self.template_name, {
            "charge": unseen_rule.charge_name,
            "rule": unseen_rule.text,
            "neighbor_charge": neighbor.charge_name,
            "neighbor_rule": neighbor.text,
            "neighbor_insights": "\n".join(neighbor_lines),
            "subtask_ids": ", ".join(allowed),
        })

        transferred: List[Insight] = []
        counters: Dict[str, int] = {}
        for sid, text in parse_aspect_lines(result.text):
            if sid not in allowed:
                logger.warning(f"Transfer output names unknown sub-task '{sid}'; line dropped")
                continue
            if not has_if_then(text):
                logger.warning(f"Transfer output for '{sid}' is not in if-then form; line dropped")
                continue
            counters[sid] = counters.get(sid, 0) + 1
            transferred.append(Insight(
                id=f"{unseen_rule.charge_name}/{sid}/transfer-{counters[sid]}",
                charge_name=unseen_rule.charge_name,
                subtask_id=sid,
                text=text,
                source=InsightSource.TRANSFER,
                origin_charge=neighbor.charge_name
            ))

        if neighbor_lines and not transferred:
            raise InsightFormatError("Transfer produced no usable if-then insight", raw=result.text)
        logger.info(f"Transferred {len(transferred)} insights from '{neighbor.charge_name}' "
                    f"to '{unseen_rule.charge_name}' (similarity {score:.3f})")
        return transferred
