"""Trial-and-error experience gaining with aspect-level self-reflection."""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from ..core.exceptions import ModelOutputError, ReasonerError, ReflectionError, TrialBudgetExceededError
from ..core.models import (
    Experience, ExperienceKind, FactDescription, JudgmentContext, LegalRule, ReasoningMode,
    ReflectionReport, Role, TrainerConfig, TrainingPair, Trajectory, TrialEvaluation
)
from ..judgment.engine import JudgmentEngine, combine
from ..judgment.parsing import parse_error_lines, single_line
from ..knowledge.rule_kb import RuleKB
from .insight_drawer import render_trajectory

logger = logging.getLogger(__name__)


class PairOutcome(BaseModel):
    """What the trial loop produced for one training pair."""
    model_config = ConfigDict(frozen=True)

    pair: TrainingPair
    experience: Optional[Experience] = None
    trials: int = 0
    error: Optional[str] = None

    @property
    def unresolved(self) -> bool:
        return self.experience is None


class ExperienceGainer:
    """Runs the evaluate, reflect and retry loop over training pairs."""

    def __init__(
        self,
        engine: JudgmentEngine,
        rules: RuleKB,
        max_trials: int = 2,
        reflector_template: str = "reflector",
        max_workers: int = 1
    ):
        """
        Initialize the gainer.

        Args:
            engine: Judgment engine holding the sub-task agents
            rules: Rule KB resolving training charges
            max_trials: Trial budget L per pair
            reflector_template: Template of the aspect-level self-reflector
            max_workers: Training pairs processed concurrently
        """
        self.engine = engine
        self.rules = rules
        self.max_trials = max_trials
        self.reflector_template = reflector_template
        self.max_workers = max_workers
        self.evaluations = 0
        self._lock = threading.Lock()

    def evaluate_trial(self, golden: Trajectory, confusing: Trajectory) -> TrialEvaluation:
        """
        Compare a trial's verdicts with the ground truth.

        Args:
            golden: Trajectory on the golden charge
            confusing: Trajectory on the confusing charge

        Returns:
            Success iff the golden charge is guilty and the confusing one is not
        """
        with self._lock:
            self.evaluations += 1

        wrong = []
        if not combine(golden.answers, self.engine.subtasks).guilty:
            wrong.append(Role.GOLDEN)
        if combine(confusing.answers, self.engine.subtasks).guilty:
            wrong.append(Role.CONFUSING)
        return TrialEvaluation(success=not wrong, wrong_roles=tuple(wrong))

    def reflect(
        self,
        failed: Trajectory,
        rule: LegalRule,
        fact: FactDescription,
        expected_guilty: bool
    ) -> ReflectionReport:
        """
        Ask the self-reflector which sub-task agents erred.

        Args:
            failed: Trajectory whose verdict was wrong
            rule: Rule of the trajectory's charge
            fact: Training fact
            expected_guilty: Ground-truth verdict for this role

        Returns:
            ReflectionReport with a reason per erroneous sub-task
        """
        result = self.engine.gateway.complete_template(self.reflector_template, {
            "charge": rule.charge_name,
            "expected": "guilty" if expected_guilty else "not guilty",
            "rule": rule.text,
            "fact": fact.text,
            "trajectory": render_trajectory(failed),
            "subtask_ids": ", ".join(self.engine.subtasks.ids()),
        })

        reasons: Dict[str, str] = {}
        for sid, reason in parse_error_lines(result.text):
            reasons.setdefault(sid, single_line(reason))
        if not reasons:
            raise ReflectionError(f"Self-reflection on '{rule.charge_name}' named no erroneous aspect", raw=result.text)

        unknown = [sid for sid in reasons if sid not in self.engine.subtasks]
        if unknown:
            raise ReflectionError(f"Self-reflection on '{rule.charge_name}' names unknown aspects {unknown}",
                                  raw=result.text)

        return ReflectionReport(error_subtask_ids=tuple(reasons), reasons=reasons, target_role=failed.role)

    def retry_subtasks(
        self,
        trajectory: Trajectory,
        report: ReflectionReport,
        rule: LegalRule,
        fact: FactDescription
    ) -> Trajectory:
        """
        Re-answer only the sub-tasks named by the reflection.

        Args:
            trajectory: Failed trajectory
            report: Reflection on that trajectory
            rule: Rule of the trajectory's charge
            fact: Training fact

        Returns:
            Trajectory of the next trial; unnamed answers are carried over
        """
        if trajectory.trial_index >= self.max_trials:
            raise TrialBudgetExceededError(trajectory.trial_index + 1, self.max_trials)

        ctx = JudgmentContext.for_mode(ReasoningMode.bare())
        retried = {
            sid: self.engine.answer_subtask(self.engine.agent_for(sid), rule, fact, ctx, reflection=report.reasons[sid])
            for sid in report.error_subtask_ids
        }
        answers = tuple(retried.get(a.subtask_id, a) for a in trajectory.answers)
        return trajectory.model_copy(update={"answers": answers, "trial_index": trajectory.trial_index + 1})

    def gain_for_pair(self, pair: TrainingPair) -> PairOutcome:
        """
        Trial loop for one pair: judge both charges, then reflect and retry up to L rounds.

        Model output errors leave the pair unresolved; backend errors propagate
        with the pair attached to the error details.
        """
        golden_rule = self.rules.get_rule(pair.golden)
        confusing_rule = self.rules.get_rule(pair.confusing)
        fact = pair.fact
        ctx = JudgmentContext.for_mode(ReasoningMode.bare())

        trials = 0
        try:
            _, golden = self.engine.judge_charge(fact, golden_rule, ctx, role=Role.GOLDEN)
            _, confusing = self.engine.judge_charge(fact, confusing_rule, ctx, role=Role.CONFUSING)
            initial = (golden, confusing)
            reflections: List[ReflectionReport] = []

            while True:
                trials += 1
                evaluation = self.evaluate_trial(golden, confusing)
                if evaluation.success:
                    experience = self._experience(pair, golden, confusing, initial, reflections)
                    logger.info(f"{pair.golden} vs {pair.confusing} ({fact.case_id}): "
                                f"{experience.kind.value} at trial {trials}")
                    return PairOutcome(pair=pair, experience=experience, trials=trials)
                if trials >= self.max_trials:
                    logger.warning(f"{pair.golden} vs {pair.confusing} ({fact.case_id}): "
                                   f"unresolved after {trials} trials")
                    return PairOutcome(pair=pair, trials=trials)

                if Role.GOLDEN in evaluation.wrong_roles:
                    report = self.reflect(golden, golden_rule, fact, expected_guilty=True)
                    reflections.append(report)
                    golden = self.retry_subtasks(golden, report, golden_rule, fact)
                else:
                    golden = golden.advanced()
                if Role.CONFUSING in evaluation.wrong_roles:
                    report = self.reflect(confusing, confusing_rule, fact, expected_guilty=False)
                    reflections.append(report)
                    confusing = self.retry_subtasks(confusing, report, confusing_rule, fact)
                else:
                    confusing = confusing.advanced()
        except ModelOutputError as e:
            logger.warning(f"{pair.golden} vs {pair.confusing} ({fact.case_id}) left unresolved: {e.message}")
            return PairOutcome(pair=pair, trials=trials, error=e.message)
        except ReasonerError as e:
            e.details.update({"golden": pair.golden, "confusing": pair.confusing, "case_id": fact.case_id})
            raise

    @staticmethod
    def _experience(
        pair: TrainingPair,
        golden: Trajectory,
        confusing: Trajectory,
        initial: Tuple[Trajectory, Trajectory],
        reflections: List[ReflectionReport]
    ) -> Experience:
        if golden.trial_index == 1:
            return Experience(
                kind=ExperienceKind.SUCCESS,
                charge_name=pair.golden,
                confusing_charge=pair.confusing,
                success_trajectories=(golden, confusing)
            )
        return Experience(
            kind=ExperienceKind.ERROR_SUCCESS_PAIR,
            charge_name=pair.golden,
            confusing_charge=pair.confusing,
            success_trajectories=(golden, confusing),
            failed_trajectories=initial,
            reflections=tuple(reflections)
        )

    def collect(self, config: TrainerConfig) -> List[PairOutcome]:
        """Per-pair outcomes in config order."""
        self.max_trials = config.max_trials
        if self.max_workers <= 1:
            return [self.gain_for_pair(pair) for pair in config.charges]
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            return list(executor.map(self.gain_for_pair, config.charges))

    def gain_experience(self, config: TrainerConfig) -> Tuple[List[Experience], List[TrainingPair]]:
        """
        Experience gaining over every training pair.

        Args:
            config: Trainer configuration

        Returns:
            (experiences, unresolved pairs)
        """
        outcomes = self.collect(config)
        experiences = [o.experience for o in outcomes if o.experience is not None]
        unresolved = [o.pair for o in outcomes if o.unresolved]
        return experiences, unresolved
