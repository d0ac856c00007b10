"""Sub-task agents, the presumption-of-innocence combiner and case prediction."""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

from ..core.exceptions import BackendError, JudgmentAbortedError, PreconditionError
from ..core.models import (
    AgentSpec, CaseOutcome, CaseRecord, FactDescription, Finding, JudgmentContext, LegalRule,
    ReasoningMode, Role, SubAnswer, SubTaskSet, Trajectory, Verdict, build_outcome
)
from ..gateway.gateway import ModelGateway
from .parsing import parse_finding, single_line

if TYPE_CHECKING:
    from ..feedback.oracle import FeedbackOracle
    from ..knowledge.retrieval import InsightRetriever
    from ..knowledge.rule_kb import RuleKB

logger = logging.getLogger(__name__)

NO_ENTRIES = "(none)"


def default_agent(subtask_id: str, label: str) -> AgentSpec:
    return AgentSpec(
        subtask_id=subtask_id,
        role_preamble=f"You are the {label} agent. Judge only the {label} aspect of the legal rule."
    )


def combine(answers: Sequence[SubAnswer], subtasks: Optional[SubTaskSet] = None) -> Verdict:
    """
    Guilty iff every finding is satisfied; not_satisfied and uncertain both defeat guilt.

    Args:
        answers: One answer per sub-task, in set order
        subtasks: When given, the answers must cover exactly this set

    Returns:
        Verdict naming the first aspect that is not satisfied
    """
    if not answers:
        raise PreconditionError("Cannot combine an empty answer set")
    if subtasks is not None:
        answered = [a.subtask_id for a in answers]
        if sorted(answered) != sorted(subtasks.ids()):
            raise PreconditionError(f"Answers {answered} do not cover the sub-task set {subtasks.ids()}")

    for answer in answers:
        if answer.finding != Finding.SATISFIED:
            state = "not satisfied" if answer.finding == Finding.NOT_SATISFIED else "uncertain"
            # Only the deciding answer can flag the verdict.
            return Verdict(
                guilty=False,
                rationale=f"Aspect '{answer.subtask_id}' is {state}.",
                failed_subtask_id=answer.subtask_id,
                parse_flagged=answer.parse_flagged
            )
    return Verdict(guilty=True, rationale="Every aspect of the rule is satisfied.")


class JudgmentEngine:
    """Judges charges through one agent per sub-task."""

    def __init__(
        self,
        gateway: ModelGateway,
        subtasks: SubTaskSet,
        agents: Optional[Sequence[AgentSpec]] = None,
        rules: Optional["RuleKB"] = None,
        retriever: Optional["InsightRetriever"] = None,
        oracle: Optional["FeedbackOracle"] = None,
        max_workers: int = 1
    ):
        """
        Initialize the engine.

        Args:
            gateway: Model gateway
            subtasks: Active sub-task set
            agents: Role-configured agents; generic roles when omitted
            rules: Rule KB for case prediction
            retriever: Insight source for modes that use insights
            oracle: Knowledge feedback for modes that use feedback
            max_workers: Parallel sub-task agents per charge
        """
        self.gateway = gateway
        self.subtasks = subtasks
        self.rules = rules
        self.retriever = retriever
        self.oracle = oracle
        self.max_workers = max_workers

        by_id = {agent.subtask_id: agent for agent in agents or ()}
        self.agents: List[AgentSpec] = [
            by_id.get(st.id) or default_agent(st.id, st.label) for st in subtasks.subtasks
        ]

    def agent_for(self, subtask_id: str) -> AgentSpec:
        for agent in self.agents:
            if agent.subtask_id == subtask_id:
                return agent
        raise KeyError(subtask_id)

    def answer_subtask(
        self,
        agent: AgentSpec,
        rule: LegalRule,
        fact: FactDescription,
        ctx: JudgmentContext,
        reflection: Optional[str] = None
    ) -> SubAnswer:
        """
        Run one sub-task agent.

        Args:
            agent: The aspect's agent
            rule: Rule of the judged charge
            fact: Case fact
            ctx: Insights and feedback available to the agent
            reflection: Reason text from aspect-level self-reflection

        Returns:
            SubAnswer; unparseable output gives uncertain with parse_flagged set
        """
        subtask = self.subtasks.get(agent.subtask_id)
        bindings = {
            "role": agent.role_preamble,
            "subtask": subtask.label,
            "description": subtask.description or subtask.label,
            "charge": rule.charge_name,
            "rule": rule.text,
            "fact": fact.text,
        }

        insights = ctx.insights_for(subtask.id) if ctx.use_insights else ()
        feedback = ctx.feedback_for(subtask.id) if ctx.use_feedback else ()
        if ctx.use_insights:
            bindings["insights"] = "\n".join(f"- {single_line(i.text)}" for i in insights) or NO_ENTRIES
        if ctx.use_feedback:
            bindings["feedback"] = "\n".join(
                f"- Q: {single_line(f.question)} A: {single_line(f.answer)}" for f in feedback
            ) or NO_ENTRIES
        if reflection:
            bindings["reflection"] = reflection

        result = self.gateway.complete_template(agent.template_name, bindings)
        parsed = parse_finding(result.text)
        return SubAnswer(
            subtask_id=subtask.id,
            finding=parsed.finding,
            rationale=parsed.rationale,
            used_insight_ids=tuple(i.id for i in insights),
            used_feedback_ids=tuple(f.id for f in feedback),
            parse_flagged=parsed.flagged
        )

    def context_for(self, rule: LegalRule, mode: ReasoningMode) -> JudgmentContext:
        """Resolve the insights a mode allows for one charge."""
        insights = {}
        if mode.use_insights and self.retriever is not None:
            buckets = self.retriever.insights_for(rule, mode.insight_mode)
            insights = {sid: items for sid, items in buckets.items() if sid in self.subtasks}
        return JudgmentContext.for_mode(mode, insights)

    def judge_charge(
        self,
        fact: FactDescription,
        rule: LegalRule,
        ctx: Optional[JudgmentContext] = None,
        role: Role = Role.GOLDEN,
        trial_index: int = 1
    ) -> Tuple[Verdict, Trajectory]:
        """
        Judge one charge: feedback first when enabled, every agent, then combine.

        Args:
            fact: Case fact
            rule: Rule of the judged charge
            ctx: Judgment context; bare decomposition when omitted
            role: Role of the charge, recorded on the trajectory
            trial_index: Trial index recorded on the trajectory

        Returns:
            (Verdict, Trajectory)
        """
        ctx = ctx or JudgmentContext.for_mode(ReasoningMode.bare())
        if ctx.use_feedback and self.oracle is not None and not any(ctx.feedback.values()):
            feedback = self.oracle.gather(self.subtasks, rule, fact, ctx.insights)
            ctx = ctx.model_copy(update={"feedback": feedback})

        answers = self._run_agents(fact, rule, ctx)
        trajectory = Trajectory.assemble(self.subtasks, rule.charge_name, role, answers, trial_index)
        verdict = combine(trajectory.answers, self.subtasks)
        logger.debug(f"{fact.case_id} / {rule.charge_name}: {'guilty' if verdict.guilty else 'not guilty'}")
        return verdict, trajectory

    def _run_agents(self, fact: FactDescription, rule: LegalRule, ctx: JudgmentContext) -> List[SubAnswer]:
        answers: List[SubAnswer] = []
        if self.max_workers <= 1:
            for agent in self.agents:
                try:
                    answers.append(self.answer_subtask(agent, rule, fact, ctx))
                except BackendError as e:
                    raise JudgmentAbortedError(rule.charge_name, e, answers)
            return answers

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            futures = {executor.submit(self.answer_subtask, agent, rule, fact, ctx): agent for agent in self.agents}
            failure: Optional[BackendError] = None
            for future in as_completed(futures):
                try:
                    answers.append(future.result())
                except BackendError as e:
                    failure = failure or e
        if failure is not None:
            order = {sid: i for i, sid in enumerate(self.subtasks.ids())}
            answers.sort(key=lambda a: order[a.subtask_id])
            raise JudgmentAbortedError(rule.charge_name, failure, answers)
        return answers

    def predict_case(self, case: CaseRecord, mode: Optional[ReasoningMode] = None) -> CaseOutcome:
        """
        Judge every query of a case and derive y_correct.

        Args:
            case: Case record
            mode: Reasoning mode; full MALR when omitted

        Returns:
            CaseOutcome
        """
        if self.rules is None:
            raise PreconditionError("Case prediction needs a rule KB")
        mode = mode or ReasoningMode.full()

        verdicts: List[Verdict] = []
        for query in case.queries:
            rule = self.rules.get_rule(query.charge_name)
            role = Role.GOLDEN if query.expected_guilty else Role.CONFUSING
            verdict, _ = self.judge_charge(case.fact, rule, self.context_for(rule, mode), role=role)
            verdicts.append(verdict)
        return build_outcome(case, verdicts)


def findings_by_subtask(trajectory: Trajectory) -> Dict[str, Finding]:
    return {a.subtask_id: a.finding for a in trajectory.answers}
