"""Knowledge feedback: pick aspects to fact-check, ask key questions, cache answers."""

import hashlib
import logging
import threading
from typing import Collection, Dict, List, Mapping, Sequence, Tuple

from ..core.exceptions import ParseError, PreconditionError
from ..core.models import FactDescription, Insight, KnowledgeFeedback, LegalRule, SubTask, SubTaskSet
from ..gateway.gateway import ModelGateway
from ..judgment.parsing import parse_id_list, single_line
from .experts import ExpertAdapter

logger = logging.getLogger(__name__)


def feedback_id(question: str) -> str:
    return "kf-" + hashlib.blake2b(question.encode("utf-8"), digest_size=5).hexdigest()


class FeedbackOracle:
    """Consults an expert adapter for the aspects that hinge on outside knowledge."""

    def __init__(
        self,
        gateway: ModelGateway,
        adapter: ExpertAdapter,
        selector_template: str = "fact_check_selector",
        question_template: str = "key_question"
    ):
        """
        Initialize the oracle.

        Args:
            gateway: Gateway for the selector and question-generation calls
            adapter: Expert that answers the questions
            selector_template: Template choosing aspects to fact-check
            question_template: Few-shot key-question template
        """
        self.gateway = gateway
        self.adapter = adapter
        self.selector_template = selector_template
        self.question_template = question_template
        self.consultations = 0
        self._cache: Dict[str, str] = {}
        self._pending: Dict[str, threading.Lock] = {}
        self._issued: Dict[str, KnowledgeFeedback] = {}
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        """Adapter invocations so far."""
        return self.adapter.calls

    def select_fact_check_subtasks(
        self,
        subtask_ids: Sequence[str],
        insights: Mapping[str, Sequence[Insight]],
        fact: FactDescription
    ) -> List[str]:
        """
        Ask the model which aspects need external fact-checking.

        Args:
            subtask_ids: Active sub-task ids, in set order
            insights: sub-task id -> insights
            fact: Case fact

        Returns:
            Selected ids in set order
        """
        lines = [
            f"ASPECT {sid}: {single_line(insight.text)}"
            for sid in subtask_ids for insight in insights.get(sid, ())
        ]
        if not lines:
            return []

        result = self.gateway.complete_template(self.selector_template, {
            "subtask_ids": ", ".join(subtask_ids),
            "fact": fact.text,
            "insights": "\n".join(lines),
        })
        selected = parse_id_list(result.text, "CHECK")
        unknown = [sid for sid in selected if sid not in subtask_ids]
        if unknown:
            raise ParseError(f"Fact-check selection names unknown sub-tasks: {unknown}", raw=result.text)
        return [sid for sid in subtask_ids if sid in selected]

    def generate_question(
        self,
        subtask: SubTask,
        rule: LegalRule,
        fact: FactDescription,
        insights: Sequence[Insight],
        selected: Collection[str]
    ) -> str:
        """One key question grounded in the fact, for a selected aspect."""
        if subtask.id not in selected:
            raise PreconditionError(f"Sub-task '{subtask.id}' was not selected for fact-checking")

        result = self.gateway.complete_template(self.question_template, {
            "subtask": subtask.label,
            "rule": rule.text,
            "fact": fact.text,
            "insights": "\n".join(f"- {single_line(i.text)}" for i in insights),
        })
        lines = [line.strip() for line in result.text.splitlines() if line.strip()]
        if not lines:
            raise ParseError(f"Empty key question for sub-task '{subtask.id}'", raw=result.text)
        return lines[0]

    def ask(self, question: str, subtask_id: str) -> KnowledgeFeedback:
        """
        Ask the expert, answering repeated identical questions from the cache.

        Args:
            question: Exact question text; the cache key
            subtask_id: Aspect the answer informs

        Returns:
            KnowledgeFeedback from the adapter or the cache
        """
        with self._lock:
            answer = self._cache.get(question)
            if answer is None:
                pending = self._pending.setdefault(question, threading.Lock())
        if answer is None:
            with pending:
                with self._lock:
                    answer = self._cache.get(question)
                if answer is None:
                    try:
                        answer = self.adapter.answer(question)
                        with self._lock:
                            self._cache[question] = answer
                    finally:
                        with self._lock:
                            self._pending.pop(question, None)
                    logger.debug(f"Expert answered: {question!r}")

        feedback = KnowledgeFeedback(
            id=feedback_id(question),
            subtask_id=subtask_id,
            question=question,
            answer=answer,
            source=self.adapter.source
        )
        with self._lock:
            self._issued[feedback.id] = feedback
        return feedback

    def issued(self, feedback_ids: Sequence[str]) -> List[KnowledgeFeedback]:
        """Feedback handed out so far, for the given ids that are known."""
        with self._lock:
            return [self._issued[fid] for fid in feedback_ids if fid in self._issued]

    def gather(
        self,
        subtasks: SubTaskSet,
        rule: LegalRule,
        fact: FactDescription,
        insights: Mapping[str, Sequence[Insight]]
    ) -> Dict[str, Tuple[KnowledgeFeedback, ...]]:
        """Select, question and ask for every aspect that needs fact-checking."""
        with self._lock:
            self.consultations += 1
        selected = self.select_fact_check_subtasks(subtasks.ids(), insights, fact)
        feedback: Dict[str, Tuple[KnowledgeFeedback, ...]] = {}
        for sid in selected:
            subtask = subtasks.get(sid)
            question = self.generate_question(subtask, rule, fact, insights.get(sid, ()), selected)
            feedback[sid] = (self.ask(question, sid),)
        if selected:
            logger.debug(f"Knowledge feedback for '{rule.charge_name}' on {selected}")
        return feedback
