"""Resolves the insights a judgment may use for one charge."""

import logging
import threading
from typing import Callable, Dict, List, Optional, Tuple

from ..core.exceptions import KnowledgeBaseError
from ..core.models import Insight, InsightMode, LegalRule
from .insight_kb import InsightKB
from .transfer import InsightTransfer

logger = logging.getLogger(__name__)

Buckets = Dict[str, Tuple[Insight, ...]]


def group_by_subtask(insights: List[Insight]) -> Buckets:
    grouped: Dict[str, List[Insight]] = {}
    for insight in insights:
        grouped.setdefault(insight.subtask_id, []).append(insight)
    return {sid: tuple(items) for sid, items in grouped.items()}


class InsightRetriever:
    """Trained bucket, nearest-rule transfer or direct generation, per mode.

    Transferred and directly generated insights are cached per charge.
    """

    def __init__(
        self,
        insights: Optional[InsightKB] = None,
        transfer: Optional[InsightTransfer] = None,
        direct_generator: Optional[Callable[[LegalRule], List[Insight]]] = None
    ):
        self.insights = insights or InsightKB()
        self.transfer = transfer
        self.direct_generator = direct_generator
        self._transferred: Dict[str, Buckets] = {}
        self._direct: Dict[str, Buckets] = {}
        self._pending: Dict[Tuple[int, str], threading.Lock] = {}
        self._lock = threading.Lock()

    def insights_for(self, rule: LegalRule, mode: InsightMode) -> Buckets:
        """
        Insight buckets for one charge.

        Args:
            rule: Rule of the judged charge
            mode: trained, direct or none

        Returns:
            sub-task id -> insights
        """
        if mode == InsightMode.NONE:
            return {}
        if mode == InsightMode.DIRECT:
            return self._cached(self._direct, rule, self._generate_direct)

        if self.insights.has_charge(rule.charge_name):
            return self.insights.buckets_for(rule.charge_name)
        if self.transfer is None:
            logger.warning(f"No trained insights for '{rule.charge_name}' and no transfer configured")
            return {}
        return self._cached(self._transferred, rule, self._transfer)

    def _cached(self, cache: Dict[str, Buckets], rule: LegalRule, produce: Callable[[LegalRule], Buckets]) -> Buckets:
        with self._lock:
            pending = self._pending.setdefault((id(cache), rule.charge_name), threading.Lock())
        with pending:
            if rule.charge_name not in cache:
                cache[rule.charge_name] = produce(rule)
            return cache[rule.charge_name]

    def _transfer(self, rule: LegalRule) -> Buckets:
        try:
            return group_by_subtask(self.transfer.transfer_insights(rule))
        except KnowledgeBaseError as e:
            logger.warning(f"Insight transfer for '{rule.charge_name}' unavailable: {e.message}")
            return {}

    def _generate_direct(self, rule: LegalRule) -> Buckets:
        if self.direct_generator is None:
            raise KnowledgeBaseError("Direct insight mode requires a direct insight generator")
        return group_by_subtask(self.direct_generator(rule))
