"""Evaluation harness: strategies over a case set, metrics and ablations."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..core.exceptions import PreconditionError, ReasonerError
from ..core.models import (
    AgentSpec, CaseOutcome, CaseRecord, CostLedger, EvalReport, PairResult, ReasoningMode,
    StrategyName, StrategySpec, SubTaskSet, TrainerConfig
)
from ..feedback.oracle import FeedbackOracle
from ..gateway.gateway import ModelGateway
from ..judgment.engine import JudgmentEngine
from ..knowledge.insight_kb import InsightKB
from ..knowledge.retrieval import InsightRetriever
from ..knowledge.rule_kb import RuleKB
from ..knowledge.transfer import InsightTransfer
from ..training.insight_drawer import InsightDrawer
from ..training.trainer import InsightTrainer
from .baselines import BaselineJudge

logger = logging.getLogger(__name__)

MODE_LABELS: Tuple[Tuple[str, ReasoningMode], ...] = (
    ("w/o insight", ReasoningMode.bare()),
    ("w/o ask", ReasoningMode.insight_only()),
    ("directly generate", ReasoningMode.direct()),
    ("full", ReasoningMode.full()),
)

TRAINER_ABLATIONS: Tuple[Tuple[str, str], ...] = (
    ("w/o E_success", "enable_success_experience"),
    ("w/o E_esp", "enable_esp_experience"),
    ("w/o M_filtering", "enable_filtering"),
)


def mode_label(mode: ReasoningMode) -> str:
    for label, preset in MODE_LABELS:
        if preset == mode:
            return label
    return f"insights={mode.insight_mode.value},feedback={'on' if mode.use_feedback else 'off'}"


def build_retriever(gateway: ModelGateway, rules: RuleKB, subtasks: SubTaskSet, insight_kb: InsightKB) -> InsightRetriever:
    """Retriever over a trained KB with nearest-rule transfer and direct generation."""
    transfer = InsightTransfer(gateway, rules, insight_kb, subtask_ids=subtasks.ids())
    drawer = InsightDrawer(gateway, subtasks)
    return InsightRetriever(insight_kb, transfer=transfer, direct_generator=drawer.draw_direct_insights)


def _rate(matches: List[bool]) -> float:
    return sum(matches) / len(matches) if matches else 0.0


def compute_report(
    outcomes: Sequence[CaseOutcome],
    strategy: StrategyName,
    dataset_id: str,
    cost: CostLedger,
    mode: Optional[str] = None
) -> EvalReport:
    """
    Reduce per-case outcomes to the report metrics.

    Outcomes are sorted by case id first so the result does not depend on
    completion order.
    """
    ordered = tuple(sorted(outcomes, key=lambda o: o.case_id))
    queries = [qv for outcome in ordered for qv in outcome.per_query_verdicts]

    per_pair: Dict[str, PairResult] = {}
    tags = sorted({o.pair_tag for o in ordered if o.pair_tag is not None})
    for tag in tags:
        tagged = [o for o in ordered if o.pair_tag == tag]
        correct = sum(1 for o in tagged if o.y_correct)
        per_pair[tag] = PairResult(cases=len(tagged), correct=correct, accuracy=correct / len(tagged))

    return EvalReport(
        strategy=strategy,
        mode=mode,
        dataset_id=dataset_id,
        case_count=len(ordered),
        joint_accuracy=_rate([o.y_correct for o in ordered]),
        golden_accept_rate=_rate([qv.matches for qv in queries if qv.expected_guilty]),
        confusing_reject_rate=_rate([qv.matches for qv in queries if not qv.expected_guilty]),
        flagged_count=sum(1 for qv in queries if qv.verdict.parse_flagged),
        per_pair=per_pair,
        cost=cost,
        per_case_outcomes=ordered
    )


class EvaluationHarness:
    """Runs a strategy over a case set with a bounded worker pool."""

    def __init__(
        self,
        gateway: ModelGateway,
        rules: RuleKB,
        subtasks: Optional[SubTaskSet] = None,
        agents: Optional[Sequence[AgentSpec]] = None,
        retriever: Optional[InsightRetriever] = None,
        oracle: Optional[FeedbackOracle] = None,
        max_workers: int = 4,
        deterministic: bool = False
    ):
        """
        Initialize the harness.

        Args:
            gateway: Model gateway shared by every strategy
            rules: Rule KB resolving query charges
            subtasks: Planned sub-task set, required for malr
            agents: Role-configured sub-task agents
            retriever: Insight source for malr modes with insights
            oracle: Knowledge feedback for the full malr mode
            max_workers: Cases judged concurrently
            deterministic: Report a zero wall time so reports are reproducible
        """
        self.gateway = gateway
        self.rules = rules
        self.subtasks = subtasks
        self.agents = agents
        self.retriever = retriever
        self.oracle = oracle
        self.max_workers = max_workers
        self.deterministic = deterministic

    def _predictor(self, strategy: StrategySpec, retriever: Optional[InsightRetriever]) -> Callable[[CaseRecord], CaseOutcome]:
        if strategy.name != StrategyName.MALR:
            judge = BaselineJudge(self.gateway, self.rules)
            return lambda case: judge.predict_case(case, strategy)

        if self.subtasks is None:
            raise PreconditionError("The malr strategy needs a planned sub-task set")
        mode = strategy.effective_mode
        if mode.use_insights and retriever is None:
            raise PreconditionError(f"Mode '{mode_label(mode)}' needs an insight retriever")
        if mode.use_feedback and self.oracle is None:
            raise PreconditionError(f"Mode '{mode_label(mode)}' needs a feedback oracle")

        engine = JudgmentEngine(
            self.gateway,
            self.subtasks,
            agents=self.agents,
            rules=self.rules,
            retriever=retriever if mode.use_insights else None,
            oracle=self.oracle if mode.use_feedback else None
        )
        return lambda case: engine.predict_case(case, mode)

    def evaluate(
        self,
        cases: Sequence[CaseRecord],
        strategy: StrategySpec,
        dataset_id: str = "dataset",
        retriever: Optional[InsightRetriever] = None,
        label: Optional[str] = None
    ) -> EvalReport:
        """
        Evaluate one strategy over a case set.

        Args:
            cases: Validated case records
            strategy: Strategy to run
            dataset_id: Name recorded in the report
            retriever: Overrides the harness retriever for this run
            label: Mode label recorded in the report; derived for malr when omitted

        Returns:
            EvalReport with rates, per-pair accuracy and the cost ledger
        """
        predict = self._predictor(strategy, retriever or self.retriever)
        if label is None and strategy.name == StrategyName.MALR:
            label = mode_label(strategy.effective_mode)
        logger.info(f"Evaluating {strategy.name.value}{f' [{label}]' if label else ''} on {len(cases)} cases")

        before = self.gateway.ledger.snapshot()
        started = time.perf_counter()

        def run(case: CaseRecord):
            try:
                return case.case_id, predict(case), None
            except ReasonerError as e:
                return case.case_id, None, e

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            results = list(executor.map(run, cases))

        failures = [(case_id, error) for case_id, _, error in results if error is not None]
        if failures:
            case_id, error = failures[0]
            for failed_id, failed in failures:
                logger.error(f"Case {failed_id} failed: {failed.message}")
            error.details["failed_cases"] = [failed_id for failed_id, _ in failures]
            error.details.setdefault("case_id", case_id)
            raise error

        elapsed = 0.0 if self.deterministic else time.perf_counter() - started
        usage = self.gateway.ledger.snapshot().since(before)
        total = usage.prompt_tokens + usage.output_tokens
        cost = CostLedger(
            total_prompt_tokens=usage.prompt_tokens,
            total_output_tokens=usage.output_tokens,
            completions=usage.completions,
            wall_time_seconds=elapsed,
            per_case_mean_tokens=total / len(cases) if cases else 0.0
        )

        report = compute_report([outcome for _, outcome, _ in results], strategy.name, dataset_id, cost, label)
        logger.info(f"{strategy.name.value}{f' [{label}]' if label else ''}: joint accuracy "
                    f"{report.joint_accuracy:.3f} over {report.case_count} cases")
        return report

    def compare_ablations(
        self,
        cases: Sequence[CaseRecord],
        dataset_id: str = "dataset",
        training: Optional[TrainerConfig] = None
    ) -> Dict[str, EvalReport]:
        """
        Run malr under every reasoning mode, plus retrained trainer ablations.

        Args:
            cases: Validated case records
            dataset_id: Name recorded in the reports
            training: Training inputs; when given, each trainer switch is turned
                off in turn, retrained into a fresh KB and evaluated without feedback

        Returns:
            Ordered mapping from ablation label to report
        """
        reports: Dict[str, EvalReport] = {}
        for label, mode in MODE_LABELS:
            reports[label] = self.evaluate(cases, StrategySpec(name=StrategyName.MALR, mode=mode), dataset_id, label=label)

        if training is not None:
            if self.subtasks is None:
                raise PreconditionError("Trainer ablations need a planned sub-task set")
            for label, switch in TRAINER_ABLATIONS:
                logger.info(f"Retraining for ablation '{label}'")
                insight_kb = InsightKB()
                trainer = InsightTrainer(self.gateway, self.rules, self.subtasks, agents=self.agents,
                                         max_workers=self.max_workers)
                trainer.run_training(training.model_copy(update={switch: False}), insight_kb)
                retriever = build_retriever(self.gateway, self.rules, self.subtasks, insight_kb)
                strategy = StrategySpec(name=StrategyName.MALR, mode=ReasoningMode.insight_only())
                reports[label] = self.evaluate(cases, strategy, dataset_id, retriever=retriever, label=label)
        return reports
