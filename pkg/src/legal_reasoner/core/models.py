"""Pydantic models shared by every stage of the reasoning pipeline."""

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic.types import confloat, conint


class Finding(str, Enum):
    """Tri-state result of one sub-task agent."""
    SATISFIED = "satisfied"
    NOT_SATISFIED = "not_satisfied"
    UNCERTAIN = "uncertain"


class Role(str, Enum):
    """Role of a charge within a confusing-charge pair."""
    GOLDEN = "golden"
    CONFUSING = "confusing"


class InsightSource(str, Enum):
    """Provenance of a rule insight."""
    SUCCESS = "success"
    ERROR_SUCCESS_PAIR = "error_success_pair"
    TRANSFER = "transfer"
    DIRECT = "direct"


class InsightMode(str, Enum):
    """Where insights come from at reasoning time."""
    TRAINED = "trained"
    DIRECT = "direct"
    NONE = "none"


class ExperienceKind(str, Enum):
    """Kind of harvested training experience."""
    SUCCESS = "success"
    ERROR_SUCCESS_PAIR = "error_success_pair"


class StrategyName(str, Enum):
    """Prediction strategies the harness can evaluate."""
    ZS_COT = "zs_cot"
    LRP = "lrp"
    FS_PROMPT = "fs_prompt"
    FS_COT = "fs_cot"
    CHAIN_OF_LOGIC = "chain_of_logic"
    MALR = "malr"


FEW_SHOT_STRATEGIES = (StrategyName.FS_PROMPT, StrategyName.FS_COT)


class FrozenModel(BaseModel):
    """Base model for immutable value types."""
    model_config = ConfigDict(frozen=True)


# Case and rule models

class FactDescription(FrozenModel):
    """Natural-language description of a legal case."""
    case_id: str
    text: str


class LegalRule(FrozenModel):
    """Definition of one criminal charge."""
    charge_name: str = Field(..., min_length=1)
    text: str = Field(..., min_length=1)
    article_ref: Optional[str] = None

    @field_validator("charge_name", "text")
    @classmethod
    def validate_not_blank(cls, v):
        """Reject whitespace-only names and rule texts."""
        if not v.strip():
            raise ValueError("must not be blank")
        return v


class ChargeQuery(FrozenModel):
    """One charge to judge against a fact, with its expected verdict."""
    charge_name: str
    expected_guilty: bool


class CaseRecord(FrozenModel):
    """A fact plus the charge queries asked about it.

    Semantic invariants (non-empty fact, known and distinct charges) are
    checked by ``validate_case`` so that malformed input can be reported
    rather than rejected outright.
    """
    fact: FactDescription
    queries: Tuple[ChargeQuery, ...] = Field(..., min_length=1)
    pair_tag: Optional[str] = None

    @property
    def case_id(self) -> str:
        return self.fact.case_id


# Sub-task models

class SubTask(FrozenModel):
    """One aspect of a legal rule, assigned to its own agent."""
    id: str = Field(..., min_length=1)
    label: str = Field(..., min_length=1)
    description: str = ""
    probability: confloat(ge=0.0, le=1.0) = 1.0


class DroppedSubTask(FrozenModel):
    """A canonical sub-task label that fell below the planner threshold."""
    label: str
    probability: confloat(ge=0.0, le=1.0)


class SubTaskSet(FrozenModel):
    """Ordered sub-task set produced by the auto-planner."""
    subtasks: Tuple[SubTask, ...] = Field(..., min_length=1)
    zeta: confloat(gt=0.0, le=1.0) = 0.8
    sample_count: conint(ge=1) = 1
    dropped: Tuple[DroppedSubTask, ...] = ()

    @model_validator(mode="after")
    def validate_unique_ids(self):
        """Sub-task ids must be unique within the set."""
        ids = [st.id for st in self.subtasks]
        if len(ids) != len(set(ids)):
            raise ValueError(f"Duplicate sub-task ids: {ids}")
        return self

    def ids(self) -> List[str]:
        return [st.id for st in self.subtasks]

    def labels(self) -> List[str]:
        return [st.label for st in self.subtasks]

    def get(self, subtask_id: str) -> SubTask:
        for subtask in self.subtasks:
            if subtask.id == subtask_id:
                return subtask
        raise KeyError(subtask_id)

    def __contains__(self, subtask_id: object) -> bool:
        return any(st.id == subtask_id for st in self.subtasks)

    def __len__(self) -> int:
        return len(self.subtasks)


class SubTaskProposal(FrozenModel):
    """A raw sub-task label proposed by the planner for one sample."""
    raw_label: str = Field(..., min_length=1)
    description: str = ""
    source_sample_id: str

    @field_validator("raw_label")
    @classmethod
    def validate_label(cls, v):
        """Strip labels and reject blank ones."""
        v = v.strip()
        if not v:
            raise ValueError("raw_label must not be blank")
        return v


class SubAnswer(FrozenModel):
    """Finding of one sub-task agent."""
    subtask_id: str
    finding: Finding
    rationale: str = ""
    used_insight_ids: Tuple[str, ...] = ()
    used_feedback_ids: Tuple[str, ...] = ()
    parse_flagged: bool = False


class Trajectory(FrozenModel):
    """Ordered per-aspect findings for one charge at one trial."""
    charge_name: str
    role: Role
    trial_index: conint(ge=1) = 1
    answers: Tuple[SubAnswer, ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def validate_distinct_answers(self):
        """At most one answer per sub-task."""
        ids = [a.subtask_id for a in self.answers]
        if len(ids) != len(set(ids)):
            raise ValueError(f"Duplicated sub-task answers in trajectory: {ids}")
        return self

    @classmethod
    def assemble(
        cls,
        subtasks: SubTaskSet,
        charge_name: str,
        role: Role,
        answers: List[SubAnswer],
        trial_index: int = 1
    ) -> "Trajectory":
        """Build a trajectory holding exactly one answer per sub-task, in set order."""
        by_id = {}
        for answer in answers:
            if answer.subtask_id in by_id:
                raise ValueError(f"Duplicated answer for sub-task '{answer.subtask_id}'")
            by_id[answer.subtask_id] = answer
        missing = [sid for sid in subtasks.ids() if sid not in by_id]
        extra = [sid for sid in by_id if sid not in subtasks]
        if missing or extra:
            raise ValueError(f"Trajectory does not cover the sub-task set (missing={missing}, extra={extra})")
        return cls(
            charge_name=charge_name,
            role=role,
            trial_index=trial_index,
            answers=tuple(by_id[sid] for sid in subtasks.ids())
        )

    def answer_for(self, subtask_id: str) -> SubAnswer:
        for answer in self.answers:
            if answer.subtask_id == subtask_id:
                return answer
        raise KeyError(subtask_id)

    def advanced(self) -> "Trajectory":
        """Same answers carried into the next trial."""
        return self.model_copy(update={"trial_index": self.trial_index + 1})


class Verdict(FrozenModel):
    """Output of the rule-application function for one charge."""
    guilty: bool
    rationale: str = ""
    failed_subtask_id: Optional[str] = None
    parse_flagged: bool = False


class QueryVerdict(FrozenModel):
    """Verdict for one charge query, next to its expectation."""
    charge_name: str
    expected_guilty: bool
    verdict: Verdict

    @property
    def matches(self) -> bool:
        """A verdict decided by unparseable output never counts as a match."""
        return not self.verdict.parse_flagged and self.verdict.guilty == self.expected_guilty


class CaseOutcome(FrozenModel):
    """Task outcome for one case record."""
    case_id: str
    pair_tag: Optional[str] = None
    per_query_verdicts: Tuple[QueryVerdict, ...] = Field(..., min_length=1)
    y_correct: bool

    @model_validator(mode="after")
    def validate_y_correct(self):
        """y_correct is the conjunction of per-query matches."""
        expected = all(qv.matches for qv in self.per_query_verdicts)
        if self.y_correct != expected:
            raise ValueError("y_correct must equal the conjunction of per-query matches")
        return self


def build_outcome(case: CaseRecord, verdicts: List[Verdict]) -> CaseOutcome:
    """Pair each query with its verdict and derive y_correct."""
    if len(verdicts) != len(case.queries):
        raise ValueError(f"Expected {len(case.queries)} verdicts, got {len(verdicts)}")
    per_query = tuple(
        QueryVerdict(charge_name=q.charge_name, expected_guilty=q.expected_guilty, verdict=v)
        for q, v in zip(case.queries, verdicts)
    )
    return CaseOutcome(
        case_id=case.case_id,
        pair_tag=case.pair_tag,
        per_query_verdicts=per_query,
        y_correct=all(qv.matches for qv in per_query)
    )


# Knowledge models

class Insight(FrozenModel):
    """If-then note about one rule aspect."""
    id: str = Field(..., min_length=1)
    charge_name: str = Field(..., min_length=1)
    subtask_id: str = Field(..., min_length=1)
    text: str = Field(..., min_length=1)
    source: InsightSource
    origin_charge: Optional[str] = None

    @field_validator("text")
    @classmethod
    def validate_text(cls, v):
        """Insight texts are stored stripped and must not be blank."""
        v = v.strip()
        if not v:
            raise ValueError("insight text must not be blank")
        return v

    @model_validator(mode="after")
    def validate_provenance(self):
        """Transferred insights record the charge they were adapted from."""
        if self.source == InsightSource.TRANSFER and not self.origin_charge:
            raise ValueError("transferred insights require origin_charge")
        return self


class KnowledgeFeedback(FrozenModel):
    """An external expert's answer to a key question."""
    id: str
    subtask_id: str
    question: str = Field(..., min_length=1)
    answer: str = Field(..., min_length=1)
    source: str


# Judgment models

class AgentSpec(FrozenModel):
    """Role-configured sub-task agent."""
    subtask_id: str
    role_preamble: str
    template_name: str = "subtask_agent"


class ReasoningMode(FrozenModel):
    """Which optional knowledge sources a judgment may consult."""
    use_insights: bool = True
    use_feedback: bool = True
    insight_mode: InsightMode = InsightMode.TRAINED

    @model_validator(mode="after")
    def validate_consistency(self):
        """insight_mode=none implies no insights and no feedback."""
        if self.insight_mode == InsightMode.NONE and self.use_insights:
            raise ValueError("insight_mode=none requires use_insights=false")
        if not self.use_insights and self.insight_mode != InsightMode.NONE:
            raise ValueError("use_insights=false requires insight_mode=none")
        if self.use_feedback and not self.use_insights:
            raise ValueError("feedback is selected from insights and requires use_insights=true")
        return self

    @classmethod
    def bare(cls) -> "ReasoningMode":
        """Decomposition only: the 'w/o insight' mode."""
        return cls(use_insights=False, use_feedback=False, insight_mode=InsightMode.NONE)

    @classmethod
    def insight_only(cls) -> "ReasoningMode":
        """Trained insights without knowledge feedback: the 'w/o ask' mode."""
        return cls(use_insights=True, use_feedback=False, insight_mode=InsightMode.TRAINED)

    @classmethod
    def direct(cls) -> "ReasoningMode":
        """Insights generated directly from the rule text."""
        return cls(use_insights=True, use_feedback=False, insight_mode=InsightMode.DIRECT)

    @classmethod
    def full(cls) -> "ReasoningMode":
        return cls(use_insights=True, use_feedback=True, insight_mode=InsightMode.TRAINED)


class JudgmentContext(FrozenModel):
    """Insights and feedback available to the agents judging one charge."""
    use_insights: bool = False
    use_feedback: bool = False
    insight_mode: InsightMode = InsightMode.NONE
    insights: Dict[str, Tuple[Insight, ...]] = Field(default_factory=dict)
    feedback: Dict[str, Tuple[KnowledgeFeedback, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_flags(self):
        """Buckets stay empty when their flag is off."""
        if not self.use_insights and any(self.insights.values()):
            raise ValueError("insights supplied while use_insights=false")
        if not self.use_feedback and any(self.feedback.values()):
            raise ValueError("feedback supplied while use_feedback=false")
        if self.insight_mode == InsightMode.NONE and self.use_insights:
            raise ValueError("insight_mode=none implies use_insights=false")
        return self

    @classmethod
    def for_mode(cls, mode: ReasoningMode, insights: Optional[Dict[str, Tuple[Insight, ...]]] = None) -> "JudgmentContext":
        return cls(
            use_insights=mode.use_insights,
            use_feedback=mode.use_feedback,
            insight_mode=mode.insight_mode,
            insights=(insights or {}) if mode.use_insights else {}
        )

    def insights_for(self, subtask_id: str) -> Tuple[Insight, ...]:
        return self.insights.get(subtask_id, ())

    def feedback_for(self, subtask_id: str) -> Tuple[KnowledgeFeedback, ...]:
        return self.feedback.get(subtask_id, ())


# Training models

class PlannerConfig(FrozenModel):
    """Inputs of an auto-planner run."""
    zeta: confloat(gt=0.0, le=1.0) = 0.8
    question: str = "Does the fact description satisfy the legal rule of the charge?"
    training_samples: Tuple[Tuple[CaseRecord, str], ...] = ()
    planner_template: str = "planner"
    canonicalizer_template: str = "canonicalizer"


class TrainingPair(FrozenModel):
    """A golden/confusing charge pair with the fact it is trained on."""
    fact: FactDescription
    golden: str
    confusing: str
    pair_tag: Optional[str] = None


class TrainerConfig(FrozenModel):
    """Inputs and ablation switches of an insight-training run."""
    max_trials: conint(ge=1) = 2
    charges: Tuple[TrainingPair, ...] = Field(..., min_length=1)
    enable_success_experience: bool = True
    enable_esp_experience: bool = True
    enable_filtering: bool = True


class ReflectionReport(FrozenModel):
    """Which sub-task agents erred on a role, and why."""
    error_subtask_ids: Tuple[str, ...] = Field(..., min_length=1)
    reasons: Dict[str, str]
    target_role: Role


class TrialEvaluation(FrozenModel):
    """Outcome of comparing a trial's verdicts to the ground truth."""
    success: bool
    wrong_roles: Tuple[Role, ...] = ()


class Experience(FrozenModel):
    """A successful trajectory pair, optionally with its failed predecessor."""
    kind: ExperienceKind
    charge_name: str
    confusing_charge: str
    success_trajectories: Tuple[Trajectory, Trajectory]
    failed_trajectories: Optional[Tuple[Trajectory, Trajectory]] = None
    reflections: Tuple[ReflectionReport, ...] = ()

    @model_validator(mode="after")
    def validate_kind(self):
        """success is a first-trial success; pairs carry the failed trial."""
        trial = self.success_trajectories[0].trial_index
        if self.kind == ExperienceKind.SUCCESS:
            if trial != 1 or self.failed_trajectories is not None:
                raise ValueError("success experiences come from trial 1 with no failed trajectories")
        else:
            if trial <= 1 or self.failed_trajectories is None:
                raise ValueError("error-success pairs need failed trajectories and a later successful trial")
        return self


class ErrorSuccessPair(FrozenModel):
    """A sub-task answer before and after correction."""
    subtask_id: str
    charge_name: str
    error_answer: SubAnswer
    success_answer: SubAnswer

    @model_validator(mode="after")
    def validate_pair(self):
        if self.error_answer.subtask_id != self.subtask_id or self.success_answer.subtask_id != self.subtask_id:
            raise ValueError("both answers must belong to the pair's sub-task")
        if self.error_answer.finding == self.success_answer.finding:
            raise ValueError("error and success findings must differ")
        return self


class TrainingEntry(FrozenModel):
    """Per charge-pair line of the training report."""
    golden: str
    confusing: str
    case_id: str
    resolved_at_trial: Optional[int] = None
    experience_kind: Optional[ExperienceKind] = None
    insights_written: int = 0
    unresolved: bool = False
    error: Optional[str] = None


class TrainingReport(FrozenModel):
    """Structured summary of an insight-training run."""
    entries: Tuple[TrainingEntry, ...] = ()
    insights_per_charge: Dict[str, int] = Field(default_factory=dict)
    # charge -> filter error; that bucket was committed unfiltered
    filter_failures: Dict[str, str] = Field(default_factory=dict)

    @property
    def unresolved(self) -> List[TrainingEntry]:
        return [e for e in self.entries if e.unresolved]


# Evaluation models

class Exemplar(FrozenModel):
    """Few-shot demonstration."""
    charge_name: str
    rule: str
    fact: str
    reasoning: str
    answer: bool


class StrategySpec(FrozenModel):
    """A prediction strategy with its options."""
    name: StrategyName
    mode: Optional[ReasoningMode] = None
    exemplars: Tuple[Exemplar, ...] = ()

    @model_validator(mode="after")
    def validate_strategy(self):
        """Exemplars exist exactly for the few-shot strategies."""
        if self.name in FEW_SHOT_STRATEGIES:
            if len(self.exemplars) != 2 or {e.answer for e in self.exemplars} != {True, False}:
                raise ValueError("few-shot strategies need one positive and one negative exemplar")
        elif self.exemplars:
            raise ValueError(f"strategy {self.name.value} takes no exemplars")
        if self.name != StrategyName.MALR and self.mode is not None:
            raise ValueError("reasoning modes apply to malr only")
        return self

    @property
    def effective_mode(self) -> ReasoningMode:
        return self.mode or ReasoningMode.full()


class CostLedger(FrozenModel):
    """Token and time accounting of one evaluation run."""
    total_prompt_tokens: conint(ge=0) = 0
    total_output_tokens: conint(ge=0) = 0
    completions: conint(ge=0) = 0
    wall_time_seconds: confloat(ge=0.0) = 0.0
    per_case_mean_tokens: confloat(ge=0.0) = 0.0


class PairResult(FrozenModel):
    """Accuracy of one confusing-charge pair."""
    cases: int
    correct: int
    accuracy: confloat(ge=0.0, le=1.0)


class EvalReport(FrozenModel):
    """Metrics of one strategy over one dataset."""
    strategy: StrategyName
    mode: Optional[str] = None
    dataset_id: str
    case_count: int
    joint_accuracy: confloat(ge=0.0, le=1.0)
    golden_accept_rate: confloat(ge=0.0, le=1.0)
    confusing_reject_rate: confloat(ge=0.0, le=1.0)
    flagged_count: int = 0
    per_pair: Dict[str, PairResult] = Field(default_factory=dict)
    cost: CostLedger = Field(default_factory=CostLedger)
    per_case_outcomes: Tuple[CaseOutcome, ...] = ()
