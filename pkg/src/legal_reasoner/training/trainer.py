"""Insight training: experience gaining, then drawing, filtering and committing insights."""

import logging
from typing import Dict, List, Optional, Sequence

from ..core.exceptions import FilterError, InsightFormatError
from ..core.models import (
    AgentSpec, ExperienceKind, Insight, SubTaskSet, TrainerConfig, TrainingEntry, TrainingReport
)
from ..gateway.gateway import ModelGateway
from ..judgment.engine import JudgmentEngine
from ..knowledge.insight_kb import InsightKB
from ..knowledge.rule_kb import RuleKB
from .experience import ExperienceGainer, PairOutcome
from .insight_drawer import InsightDrawer, build_pairs

logger = logging.getLogger(__name__)


class InsightTrainer:
    """Builds the insight KB from training pairs."""

    def __init__(
        self,
        gateway: ModelGateway,
        rules: RuleKB,
        subtasks: SubTaskSet,
        agents: Optional[Sequence[AgentSpec]] = None,
        max_workers: int = 1
    ):
        """
        Initialize the trainer.

        Args:
            gateway: Model gateway
            rules: Rule KB resolving training charges
            subtasks: Planned sub-task set
            agents: Role-configured agents; generic roles when omitted
            max_workers: Training pairs processed concurrently
        """
        self.rules = rules
        self.engine = JudgmentEngine(gateway, subtasks, agents=agents, rules=rules)
        self.gainer = ExperienceGainer(self.engine, rules, max_workers=max_workers)
        self.drawer = InsightDrawer(gateway, subtasks)
        self.outcomes: List[PairOutcome] = []

    def _draw(self, outcome: PairOutcome, config: TrainerConfig) -> List[Insight]:
        experience = outcome.experience
        pair = outcome.pair
        drafts: List[Insight] = []

        if experience.kind == ExperienceKind.ERROR_SUCCESS_PAIR and config.enable_esp_experience:
            for failed, corrected in zip(experience.failed_trajectories, experience.success_trajectories):
                rule = self.rules.get_rule(corrected.charge_name)
                for esp in build_pairs(failed, corrected):
                    try:
                        drafts.append(self.drawer.draw_insight_from_pair(esp, rule, pair.fact))
                    except InsightFormatError as e:
                        logger.warning(f"Skipping pair insight for '{rule.charge_name}/{esp.subtask_id}': {e.message}")

        if experience.kind == ExperienceKind.SUCCESS and config.enable_success_experience:
            try:
                drafts.extend(self.drawer.draw_insight_from_success(
                    experience, self.rules.get_rule(pair.golden), self.rules.get_rule(pair.confusing), pair.fact
                ))
            except InsightFormatError as e:
                logger.warning(f"Skipping success insights for '{pair.golden}': {e.message}")

        return drafts

    def run_training(self, config: TrainerConfig, insight_kb: Optional[InsightKB] = None) -> TrainingReport:
        """
        Gain experience, draw insights, filter them per charge and commit the survivors.

        Args:
            config: Trainer configuration with its ablation switches
            insight_kb: KB receiving the insights; a fresh one when omitted

        Returns:
            TrainingReport with one entry per training pair
        """
        self.insight_kb = insight_kb if insight_kb is not None else InsightKB()
        logger.info(f"Training on {len(config.charges)} pairs (L={config.max_trials})")

        self.outcomes = self.gainer.collect(config)

        drafts_by_outcome: List[List[Insight]] = []
        by_charge: Dict[str, List[Insight]] = {}
        for outcome in self.outcomes:
            drafts = self._draw(outcome, config) if outcome.experience is not None else []
            drafts_by_outcome.append(drafts)
            for draft in drafts:
                by_charge.setdefault(draft.charge_name, []).append(draft)

        survivors: List[Insight] = []
        filter_failures: Dict[str, str] = {}
        for charge_name in sorted(by_charge):
            bucket = by_charge[charge_name]
            if config.enable_filtering:
                try:
                    bucket = self.drawer.filter_insights(charge_name, bucket)
                except FilterError as e:
                    logger.error(f"Filtering '{charge_name}' failed, keeping {len(bucket)} unfiltered insights: {e.message}")
                    filter_failures[charge_name] = e.message
            survivors.extend(bucket)

        committed = self.insight_kb.commit(survivors)
        surviving_ids = {draft.id for draft in survivors}

        insights_per_charge: Dict[str, int] = {}
        for insight in committed:
            insights_per_charge[insight.charge_name] = insights_per_charge.get(insight.charge_name, 0) + 1

        entries = []
        for outcome, drafts in zip(self.outcomes, drafts_by_outcome):
            experience = outcome.experience
            entries.append(TrainingEntry(
                golden=outcome.pair.golden,
                confusing=outcome.pair.confusing,
                case_id=outcome.pair.fact.case_id,
                resolved_at_trial=outcome.trials if experience is not None else None,
                experience_kind=experience.kind if experience is not None else None,
                insights_written=sum(1 for d in drafts if d.id in surviving_ids),
                unresolved=outcome.unresolved,
                error=outcome.error
            ))

        report = TrainingReport(entries=tuple(entries), insights_per_charge=insights_per_charge,
                                filter_failures=filter_failures)
        logger.info(f"Training wrote {len(committed)} insights for {len(insights_per_charge)} charges; "
                    f"{len(report.unresolved)} pairs unresolved")
        return report

    @property
    def experiences(self):
        return [o.experience for o in self.outcomes if o.experience is not None]
