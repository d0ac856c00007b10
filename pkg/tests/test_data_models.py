"""
Tests for the domain models, validation, parsing and configuration.

Covers the presumption-of-innocence combiner and the confusing-charge task
formula exhaustively.
"""

import itertools

import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from legal_reasoner.core.config import BackendKind, ScriptedMode, load_settings
from legal_reasoner.core.exceptions import (
    EXIT_BACKEND, EXIT_DATA, BackendUnreachableError, CaseValidationError, ConfigurationError,
    JudgmentAbortedError, ParseError, PreconditionError, TrialBudgetExceededError
)
from legal_reasoner.core.models import (
    CaseRecord, ChargeQuery, CostLedger, Exemplar, Experience, ExperienceKind, FactDescription,
    Finding, Insight, InsightMode, InsightSource, JudgmentContext, LegalRule, ReasoningMode, Role, StrategyName,
    StrategySpec, SubAnswer, SubTask, SubTaskSet, Trajectory, Verdict, build_outcome
)
from legal_reasoner.core.validation import has_if_then, validate_case, validate_corpus
from legal_reasoner.judgment.engine import combine
from legal_reasoner.judgment.parsing import parse_finding, parse_id_list
from legal_reasoner.knowledge.rule_kb import RuleKB

FOUR_IDS = ("subject", "mental", "object", "conduct")


def answers_for(findings):
    return [SubAnswer(subtask_id=sid, finding=f) for sid, f in zip(FOUR_IDS, findings)]


def two_query_case(pair_tag="A / B") -> CaseRecord:
    return CaseRecord(
        fact=FactDescription(case_id="c-1", text="The defendant took the goods."),
        queries=(ChargeQuery(charge_name="A", expected_guilty=True),
                 ChargeQuery(charge_name="B", expected_guilty=False)),
        pair_tag=pair_tag
    )


class TestCombine:
    """Presumption-of-innocence combination of sub-task findings."""

    def test_matches_brute_force_conjunction_on_all_assignments(self):
        """Every one of the 81 tri-state assignments over four aspects."""
        assignments = list(itertools.product(list(Finding), repeat=4))
        assert len(assignments) == 81
        for findings in assignments:
            verdict = combine(answers_for(findings))
            expected = all(f == Finding.SATISFIED for f in findings)
            assert verdict.guilty == expected, findings

    def test_names_first_failed_aspect(self):
        findings = (Finding.SATISFIED, Finding.UNCERTAIN, Finding.NOT_SATISFIED, Finding.SATISFIED)
        verdict = combine(answers_for(findings))
        assert verdict.failed_subtask_id == "mental"
        assert "uncertain" in verdict.rationale

    def test_guilty_verdict_has_no_failed_aspect(self):
        verdict = combine(answers_for([Finding.SATISFIED] * 4))
        assert verdict.guilty
        assert verdict.failed_subtask_id is None

    def test_empty_answers_rejected(self):
        with pytest.raises(PreconditionError):
            combine([])

    def test_answers_must_cover_subtask_set(self, subtasks):
        partial = [SubAnswer(subtask_id="subject", finding=Finding.SATISFIED)]
        with pytest.raises(PreconditionError):
            combine(partial, subtasks)

    def test_flagged_answer_flags_verdict(self):
        answers = answers_for([Finding.SATISFIED] * 4)
        answers[2] = answers[2].model_copy(update={"parse_flagged": True, "finding": Finding.UNCERTAIN})
        verdict = combine(answers)
        assert not verdict.guilty
        assert verdict.parse_flagged

    def test_flag_after_deciding_answer_is_ignored(self):
        answers = answers_for([Finding.NOT_SATISFIED] + [Finding.SATISFIED] * 3)
        answers[1] = answers[1].model_copy(update={"parse_flagged": True, "finding": Finding.UNCERTAIN})
        verdict = combine(answers)
        assert verdict.failed_subtask_id == "subject"
        assert not verdict.parse_flagged

        innocent = CaseRecord(
            fact=FactDescription(case_id="i-2", text="The clerk kept the receipt."),
            queries=(ChargeQuery(charge_name="A", expected_guilty=False),)
        )
        assert build_outcome(innocent, [verdict]).y_correct


class TestTaskFormula:
    """y_correct of the confusing-charge prediction task."""

    def test_two_query_records_exhaustive(self):
        case = two_query_case()
        for golden_guilty, confusing_guilty in itertools.product([True, False], repeat=2):
            outcome = build_outcome(case, [Verdict(guilty=golden_guilty), Verdict(guilty=confusing_guilty)])
            assert outcome.y_correct == (golden_guilty and not confusing_guilty)

    def test_innocent_records_exhaustive(self):
        case = CaseRecord(
            fact=FactDescription(case_id="i-1", text="Nothing happened."),
            queries=(ChargeQuery(charge_name="A", expected_guilty=False),)
        )
        for guilty in (True, False):
            outcome = build_outcome(case, [Verdict(guilty=guilty)])
            assert outcome.y_correct == (not guilty)

    def test_flagged_verdict_never_matches(self):
        case = two_query_case()
        outcome = build_outcome(case, [Verdict(guilty=True), Verdict(guilty=False, parse_flagged=True)])
        assert not outcome.y_correct

    def test_verdict_count_must_match_queries(self):
        with pytest.raises(ValueError):
            build_outcome(two_query_case(), [Verdict(guilty=True)])

    def test_inconsistent_y_correct_rejected(self):
        outcome = build_outcome(two_query_case(), [Verdict(guilty=True), Verdict(guilty=False)])
        with pytest.raises(ValidationError):
            type(outcome)(case_id=outcome.case_id, per_query_verdicts=outcome.per_query_verdicts, y_correct=False)


class TestModelInvariants:
    """Validators on the frozen domain models."""

    def test_subtask_ids_unique(self):
        with pytest.raises(ValidationError):
            SubTaskSet(subtasks=(SubTask(id="a", label="A"), SubTask(id="a", label="B")))

    def test_trajectory_assemble_orders_by_set(self, subtasks):
        answers = [SubAnswer(subtask_id=sid, finding=Finding.SATISFIED) for sid in reversed(subtasks.ids())]
        trajectory = Trajectory.assemble(subtasks, "A", Role.GOLDEN, answers)
        assert [a.subtask_id for a in trajectory.answers] == subtasks.ids()

    def test_trajectory_assemble_rejects_missing_answers(self, subtasks):
        with pytest.raises(ValueError):
            Trajectory.assemble(subtasks, "A", Role.GOLDEN, [SubAnswer(subtask_id="subject", finding=Finding.SATISFIED)])

    def test_transferred_insight_needs_origin(self):
        with pytest.raises(ValidationError):
            Insight(id="x", charge_name="A", subtask_id="subject", text="If a then b",
                    source=InsightSource.TRANSFER)

    def test_insight_text_stripped(self):
        insight = Insight(id="x", charge_name="A", subtask_id="s", text="  If a, then b.  ",
                          source=InsightSource.DIRECT)
        assert insight.text == "If a, then b."

    def test_reasoning_mode_presets(self):
        assert ReasoningMode.bare().insight_mode == InsightMode.NONE
        assert not ReasoningMode.insight_only().use_feedback
        assert ReasoningMode.direct().insight_mode == InsightMode.DIRECT
        assert ReasoningMode.full().use_feedback

    def test_feedback_requires_insights(self):
        with pytest.raises(ValidationError):
            ReasoningMode(use_insights=False, use_feedback=True, insight_mode=InsightMode.NONE)

    def test_context_rejects_insights_when_disabled(self):
        insight = Insight(id="x", charge_name="A", subtask_id="s", text="If a then b", source=InsightSource.DIRECT)
        with pytest.raises(ValidationError):
            JudgmentContext(use_insights=False, insights={"s": (insight,)})

    def test_context_for_bare_mode_drops_insights(self):
        insight = Insight(id="x", charge_name="A", subtask_id="s", text="If a then b", source=InsightSource.DIRECT)
        ctx = JudgmentContext.for_mode(ReasoningMode.bare(), {"s": (insight,)})
        assert ctx.insights == {}

    def test_success_experience_must_come_from_first_trial(self, subtasks):
        answers = [SubAnswer(subtask_id=sid, finding=Finding.SATISFIED) for sid in subtasks.ids()]
        golden = Trajectory.assemble(subtasks, "A", Role.GOLDEN, answers, trial_index=2)
        confusing = Trajectory.assemble(subtasks, "B", Role.CONFUSING, answers, trial_index=2)
        with pytest.raises(ValidationError):
            Experience(kind=ExperienceKind.SUCCESS, charge_name="A", confusing_charge="B",
                       success_trajectories=(golden, confusing))

    def test_few_shot_strategy_needs_both_exemplars(self):
        positive = Exemplar(charge_name="A", rule="r", fact="f", reasoning="x", answer=True)
        negative = positive.model_copy(update={"answer": False})
        with pytest.raises(ValidationError):
            StrategySpec(name=StrategyName.FS_PROMPT, exemplars=(positive, positive))
        spec = StrategySpec(name=StrategyName.FS_COT, exemplars=(positive, negative))
        assert len(spec.exemplars) == 2

    def test_modes_apply_to_malr_only(self):
        with pytest.raises(ValidationError):
            StrategySpec(name=StrategyName.ZS_COT, mode=ReasoningMode.bare())
        assert StrategySpec(name=StrategyName.MALR).effective_mode == ReasoningMode.full()

    def test_cost_ledger_non_negative(self):
        with pytest.raises(ValidationError):
            CostLedger(total_prompt_tokens=-1)


class TestCaseValidation:
    """Semantic validation of case records against the rule KB."""

    @pytest.fixture
    def rules(self):
        return RuleKB([LegalRule(charge_name="A", text="Rule A"), LegalRule(charge_name="B", text="Rule B")])

    def test_valid_record(self, rules):
        result = validate_case(two_query_case(), rules)
        assert result.is_valid
        assert result.errors == []

    def test_unknown_and_duplicate_charges(self, rules):
        record = CaseRecord(
            fact=FactDescription(case_id="c", text="fact"),
            queries=(ChargeQuery(charge_name="Z", expected_guilty=True),
                     ChargeQuery(charge_name="Z", expected_guilty=False))
        )
        result = validate_case(record, rules)
        assert not result.is_valid
        assert "unknown charge: Z" in result.errors
        assert "duplicate charge: Z" in result.errors

    def test_empty_fact(self, rules):
        record = two_query_case().model_copy(update={"fact": FactDescription(case_id="c", text="   ")})
        assert "empty fact" in validate_case(record, rules).errors

    def test_corpus_duplicate_ids(self, rules):
        violations = validate_corpus([two_query_case(), two_query_case()], rules)
        assert any("duplicate case id" in v for v in violations)


class TestParsing:
    """Parsers for structured model output."""

    def test_final_answer_line_wins(self):
        parsed = parse_finding("ANSWER: NO\nOn reflection it holds.\nANSWER: YES")
        assert parsed.finding == Finding.SATISFIED
        assert not parsed.flagged

    def test_uncertain_answer(self):
        assert parse_finding("The fact is silent.\nANSWER: UNCERTAIN").finding == Finding.UNCERTAIN

    def test_keyword_fallback(self):
        assert parse_finding("The subject element is not met.").finding == Finding.NOT_SATISFIED
        assert parse_finding("The element is clearly established.").finding == Finding.SATISFIED

    def test_unparseable_output_is_flagged_uncertain(self):
        parsed = parse_finding("Hmm.")
        assert parsed.finding == Finding.UNCERTAIN
        assert parsed.flagged

    @given(st.text(max_size=200))
    @settings(max_examples=100)
    def test_parse_finding_never_raises(self, raw):
        assert parse_finding(raw).finding in set(Finding)

    def test_id_list(self):
        assert parse_id_list("KEEP: a, b", "KEEP") == ["a", "b"]
        assert parse_id_list("KEEP: none", "KEEP") == []
        with pytest.raises(ParseError):
            parse_id_list("nothing here", "KEEP")

    def test_has_if_then(self):
        assert has_if_then("If the offender is a clerk, then the subject is met.")
        assert not has_if_then("The offender is a clerk.")
        assert not has_if_then("Iffy thenceforth")


class TestExceptions:
    """Exit codes carried by the error tree."""

    def test_exit_codes(self):
        assert CaseValidationError(["line 1: bad"]).exit_code == EXIT_DATA
        assert BackendUnreachableError("down").exit_code == EXIT_BACKEND
        assert TrialBudgetExceededError(3, 2).details == {"trial_index": 3, "max_trials": 2}

    def test_aborted_judgment_takes_cause_exit_code(self):
        error = JudgmentAbortedError("A", BackendUnreachableError("down"), partial_answers=[1, 2])
        assert error.exit_code == EXIT_BACKEND
        assert error.details["answered"] == 2


class TestSettings:
    """Layered configuration: file < environment < flags."""

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("MALR_ZETA", raising=False)
        loaded = load_settings()
        assert loaded.zeta == 0.8
        assert loaded.max_trials == 2
        assert loaded.backend.kind == BackendKind.SCRIPTED
        assert loaded.backend.credential_env == "MALR_API_KEY"

    def test_precedence(self, tmp_path, monkeypatch):
        config = tmp_path / "malr.yaml"
        config.write_text("zeta: 0.9\nmax_trials: 3\nbackend:\n  scripted_mode: flawed\n", encoding="utf-8")
        monkeypatch.setenv("MALR_ZETA", "0.5")

        loaded = load_settings(str(config))
        assert loaded.zeta == 0.5
        assert loaded.max_trials == 3
        assert loaded.backend.scripted_mode == ScriptedMode.FLAWED

        overridden = load_settings(str(config), {"zeta": 0.7, "max_trials": None})
        assert overridden.zeta == 0.7
        assert overridden.max_trials == 3

    def test_invalid_values_raise_configuration_error(self, monkeypatch):
        monkeypatch.delenv("MALR_ZETA", raising=False)
        with pytest.raises(ConfigurationError):
            load_settings(overrides={"zeta": 1.5})
        with pytest.raises(ConfigurationError):
            load_settings(overrides={"templates_dir": "/does/not/exist"})

    def test_unreadable_config_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_settings(str(tmp_path / "missing.yaml"))

    def test_config_must_be_mapping(self, tmp_path):
        config = tmp_path / "list.yaml"
        config.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_settings(str(config))
