"""Insight drawing from experiences and per-charge insight filtering."""

import itertools
import logging
import threading
from typing import List, Sequence

from ..core.exceptions import FilterError, InsightFormatError, ParseError, PreconditionError
from ..core.models import (
    ErrorSuccessPair, Experience, ExperienceKind, FactDescription, Insight, InsightSource,
    LegalRule, SubAnswer, SubTaskSet, Trajectory
)
from ..core.validation import has_if_then
from ..gateway.gateway import ModelGateway
from ..judgment.parsing import parse_aspect_lines, parse_id_list, single_line

logger = logging.getLogger(__name__)


def build_pairs(failed: Trajectory, corrected: Trajectory) -> List[ErrorSuccessPair]:
    """Error-success pairs for the sub-tasks whose finding changed between two trials."""
    if failed.charge_name != corrected.charge_name:
        raise PreconditionError(
            f"Cannot pair trajectories of '{failed.charge_name}' and '{corrected.charge_name}'"
        )
    pairs = []
    for error_answer in failed.answers:
        success_answer = corrected.answer_for(error_answer.subtask_id)
        if error_answer.finding != success_answer.finding:
            pairs.append(ErrorSuccessPair(
                subtask_id=error_answer.subtask_id,
                charge_name=failed.charge_name,
                error_answer=error_answer,
                success_answer=success_answer
            ))
    return pairs


def render_trajectory(trajectory: Trajectory) -> str:
    return "\n".join(f"- {a.subtask_id}: {a.finding.value}" for a in trajectory.answers)


def _render_answer(answer: SubAnswer) -> str:
    rationale = single_line(answer.rationale)
    return f"{answer.finding.value}: {rationale}" if rationale else answer.finding.value


class InsightDrawer:
    """Turns experiences into if-then insights and filters them per charge.

    Drawn insights carry provisional ``draft/...`` ids until
    ``InsightKB.commit`` assigns the final ones.
    """

    def __init__(
        self,
        gateway: ModelGateway,
        subtasks: SubTaskSet,
        pair_template: str = "insight_pair",
        success_template: str = "insight_success",
        direct_template: str = "insight_direct",
        filter_template: str = "insight_filter"
    ):
        self.gateway = gateway
        self.subtasks = subtasks
        self.pair_template = pair_template
        self.success_template = success_template
        self.direct_template = direct_template
        self.filter_template = filter_template
        self._counter = itertools.count(1)
        self._lock = threading.Lock()

    def _draft_id(self, charge_name: str, subtask_id: str) -> str:
        with self._lock:
            n = next(self._counter)
        return f"draft/{charge_name}/{subtask_id}/{n}"

    def draw_insight_from_pair(self, pair: ErrorSuccessPair, rule: LegalRule, fact: FactDescription) -> Insight:
        """
        Contrast a wrong and a corrected answer into one insight.

        Args:
            pair: Sub-task answers before and after correction
            rule: Rule of the pair's charge
            fact: Fact the answers were given on

        Returns:
            Draft insight with source=error_success_pair
        """
        if pair.charge_name != rule.charge_name:
            raise PreconditionError(f"Pair of '{pair.charge_name}' drawn against the rule of '{rule.charge_name}'")

        result = self.gateway.complete_template(self.pair_template, {
            "charge": rule.charge_name,
            "subtask": pair.subtask_id,
            "rule": rule.text,
            "fact": fact.text,
            "error_answer": _render_answer(pair.error_answer),
            "success_answer": _render_answer(pair.success_answer),
        })
        text = single_line(result.text)
        if not text or not has_if_then(text):
            raise InsightFormatError(
                f"Pair insight for '{rule.charge_name}/{pair.subtask_id}' is not in if-then form",
                raw=result.text
            )
        return Insight(
            id=self._draft_id(rule.charge_name, pair.subtask_id),
            charge_name=rule.charge_name,
            subtask_id=pair.subtask_id,
            text=text,
            source=InsightSource.ERROR_SUCCESS_PAIR
        )

    def _aspect_insights(self, raw: str, rule: LegalRule, source: InsightSource) -> List[Insight]:
        insights = []
        for sid, text in parse_aspect_lines(raw):
            if sid not in self.subtasks:
                logger.warning(f"Insight names unknown sub-task '{sid}'; dropped")
                continue
            if not has_if_then(text):
                logger.warning(f"Insight for '{rule.charge_name}/{sid}' is not in if-then form; dropped")
                continue
            insights.append(Insight(
                id=self._draft_id(rule.charge_name, sid),
                charge_name=rule.charge_name,
                subtask_id=sid,
                text=text,
                source=source
            ))
        return insights

    def draw_insight_from_trajectory(self, trajectory: Trajectory, rule: LegalRule, fact: FactDescription) -> List[Insight]:
        """Best-practice insights from one correct trajectory."""
        result = self.gateway.complete_template(self.success_template, {
            "charge": rule.charge_name,
            "rule": rule.text,
            "fact": fact.text,
            "trajectory": render_trajectory(trajectory),
        })
        insights = self._aspect_insights(result.text, rule, InsightSource.SUCCESS)
        if not insights:
            raise InsightFormatError(f"No usable success insight for '{rule.charge_name}'", raw=result.text)
        return insights

    def draw_insight_from_success(
        self,
        experience: Experience,
        golden_rule: LegalRule,
        confusing_rule: LegalRule,
        fact: FactDescription
    ) -> List[Insight]:
        """
        Whole-trajectory insights from a first-trial success.

        Args:
            experience: Experience of kind success
            golden_rule: Rule of the golden charge
            confusing_rule: Rule of the confusing charge
            fact: Fact the experience was gained on

        Returns:
            Draft insights for both charges, source=success
        """
        if experience.kind != ExperienceKind.SUCCESS:
            raise PreconditionError(f"Expected a success experience, got {experience.kind.value}")

        golden, confusing = experience.success_trajectories
        insights = self.draw_insight_from_trajectory(golden, golden_rule, fact)
        insights.extend(self.draw_insight_from_trajectory(confusing, confusing_rule, fact))
        return insights

    def draw_direct_insights(self, rule: LegalRule) -> List[Insight]:
        """
        Insights generated from the rule text alone, without experience.

        Args:
            rule: Rule of the charge

        Returns:
            Insights with source=direct and ids ``<charge>/<sub-task>/direct-<n>``
        """
        result = self.gateway.complete_template(self.direct_template, {
            "charge": rule.charge_name,
            "rule": rule.text,
            "subtask_ids": ", ".join(self.subtasks.ids()),
        })
        drafts = self._aspect_insights(result.text, rule, InsightSource.DIRECT)

        counters = {}
        insights = []
        for draft in drafts:
            counters[draft.subtask_id] = counters.get(draft.subtask_id, 0) + 1
            insights.append(draft.model_copy(
                update={"id": f"{rule.charge_name}/{draft.subtask_id}/direct-{counters[draft.subtask_id]}"}
            ))
        logger.info(f"Generated {len(insights)} direct insights for '{rule.charge_name}'")
        return insights

    def filter_insights(self, charge_name: str, bucket: Sequence[Insight]) -> List[Insight]:
        """
        Drop redundant and malformed insights from one charge's bucket.

        Args:
            charge_name: Charge the bucket belongs to
            bucket: Insights to filter

        Returns:
            Kept insights, a subset of the input in input order
        """
        if not bucket:
            return []

        result = self.gateway.complete_template(self.filter_template, {
            "charge": charge_name,
            "insights": "\n".join(f"[{i.id}] {single_line(i.text)}" for i in bucket),
        })
        try:
            keep = parse_id_list(result.text, "KEEP")
        except ParseError as e:
            raise FilterError(f"Filter output for '{charge_name}' has no KEEP line", raw=result.text) from e

        known = {i.id for i in bucket}
        foreign = [insight_id for insight_id in keep if insight_id not in known]
        if foreign:
            raise FilterError(f"Filter output for '{charge_name}' names unknown ids {foreign}", raw=result.text)

        kept = set(keep)
        filtered = [i for i in bucket if i.id in kept]
        logger.debug(f"Filter kept {len(filtered)} of {len(bucket)} insights for '{charge_name}'")
        return filtered
