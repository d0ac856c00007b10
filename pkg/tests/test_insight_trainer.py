"""
Tests for experience gaining, insight drawing, filtering and training.

The flawed scripted backend misjudges the subject element until guidance
carrying its hint reaches the agent, so every training pair fails its first
trial and recovers after aspect-level reflection.
"""

import pytest
from hypothesis import given, settings, strategies as st

from legal_reasoner.core.config import DEFAULT_TEMPLATES_DIR, ScriptedMode
from legal_reasoner.core.exceptions import (
    BackendUnreachableError, FilterError, InsightFormatError, JudgmentAbortedError, PreconditionError,
    ReflectionError, TrialBudgetExceededError
)
from legal_reasoner.core.models import (
    ExperienceKind, Finding, Insight, InsightSource, Role, SubAnswer, TrainerConfig, Trajectory
)
from legal_reasoner.evaluation.datasets import training_pairs
from legal_reasoner.gateway.backends import CompletionResult, ModelBackend
from legal_reasoner.gateway.gateway import ModelGateway
from legal_reasoner.gateway.scripted import ScriptedBackend
from legal_reasoner.gateway.templates import TemplateLibrary
from legal_reasoner.judgment.engine import JudgmentEngine
from legal_reasoner.knowledge.insight_kb import InsightKB
from legal_reasoner.training.experience import ExperienceGainer
from legal_reasoner.training.insight_drawer import InsightDrawer, build_pairs
from legal_reasoner.training.trainer import InsightTrainer

from .conftest import planned_subtasks, scripted_gateway

TEXT_POOL = (
    "If the offender is a clerk, then the subject is met.",
    "If the act was secret, then the conduct is met.",
    "If the harm is public, then the object is met.",
    "The offender is a clerk.",
    "Check the intent carefully.",
)


class FixedBackend(ModelBackend):
    """Returns the same text for every prompt."""

    backend_id = "fixed"

    def __init__(self, text: str):
        self.text = text

    def complete(self, request):
        if self.text is None:
            raise BackendUnreachableError("backend down")
        return CompletionResult(text=self.text, backend_id=self.backend_id)


def fixed_gateway(text) -> ModelGateway:
    return ModelGateway(backend=FixedBackend(text), templates=TemplateLibrary.load(DEFAULT_TEMPLATES_DIR))


class UnfilteringBackend(ModelBackend):
    """Flawed scripted backend whose filter answers cannot be parsed."""

    backend_id = "unfiltering"

    def __init__(self):
        self.inner = ScriptedBackend(mode=ScriptedMode.FLAWED)

    def complete(self, request):
        if "### task: insight_filter" in request.rendered_prompt:
            return CompletionResult(text="I would keep them all.", backend_id=self.backend_id)
        return self.inner.complete(request)


def trajectory(charge, findings, trial_index=1, role=Role.GOLDEN):
    subtasks = planned_subtasks()
    answers = [SubAnswer(subtask_id=sid, finding=f) for sid, f in zip(subtasks.ids(), findings)]
    return Trajectory.assemble(subtasks, charge, role, answers, trial_index)


def config_for(world, **switches) -> TrainerConfig:
    return TrainerConfig(charges=tuple(training_pairs(world.training_cases)), **switches)


def gainer_for(gateway, world, max_trials=2) -> ExperienceGainer:
    rules = world.rule_kb()
    engine = JudgmentEngine(gateway, planned_subtasks(), rules=rules)
    return ExperienceGainer(engine, rules, max_trials=max_trials)


S, N = Finding.SATISFIED, Finding.NOT_SATISFIED


class TestBuildPairs:
    """Error-success pairs from a failed and a corrected trajectory."""

    def test_only_changed_findings(self):
        failed = trajectory("A", [S, S, S, N])
        corrected = trajectory("A", [S, S, S, S], trial_index=2)
        pairs = build_pairs(failed, corrected)
        assert [p.subtask_id for p in pairs] == ["subject"]
        assert pairs[0].error_answer.finding == N
        assert pairs[0].success_answer.finding == S

    def test_unchanged_trajectory_gives_no_pairs(self):
        failed = trajectory("A", [S, S, N, S])
        assert build_pairs(failed, failed.advanced()) == []

    def test_charges_must_match(self):
        with pytest.raises(PreconditionError):
            build_pairs(trajectory("A", [S] * 4), trajectory("B", [S] * 4))


class TestExperienceGainer:
    """The evaluate, reflect and retry loop."""

    def test_flawed_pairs_recover_on_second_trial(self, small_world):
        gainer = gainer_for(scripted_gateway(ScriptedMode.FLAWED), small_world)
        outcomes = gainer.collect(config_for(small_world))

        assert len(outcomes) == 4
        for outcome in outcomes:
            assert outcome.trials == 2
            assert outcome.experience.kind == ExperienceKind.ERROR_SUCCESS_PAIR
            golden, confusing = outcome.experience.success_trajectories
            assert golden.trial_index == confusing.trial_index == 2
            assert outcome.experience.failed_trajectories[0].trial_index == 1
            assert "subject" in outcome.experience.reflections[0].error_subtask_ids
        assert gainer.evaluations == 2 * len(outcomes)

    def test_perfect_pairs_succeed_first_time(self, small_world):
        gainer = gainer_for(scripted_gateway(ScriptedMode.PERFECT), small_world)
        experiences, unresolved = gainer.gain_experience(config_for(small_world))
        assert unresolved == []
        assert all(e.kind == ExperienceKind.SUCCESS for e in experiences)
        assert all(e.failed_trajectories is None for e in experiences)
        assert gainer.evaluations == len(experiences)

    def test_misdirected_reflection_stops_at_budget(self, small_world):
        gateway = scripted_gateway(ScriptedMode.FLAWED, misdirect_reflection=True)
        gainer = gainer_for(gateway, small_world)
        experiences, unresolved = gainer.gain_experience(config_for(small_world, max_trials=2))
        assert experiences == []
        assert len(unresolved) == 4
        assert gainer.evaluations == 8

    def test_larger_budget_allows_more_trials(self, small_world):
        gateway = scripted_gateway(ScriptedMode.FLAWED, misdirect_reflection=True)
        gainer = gainer_for(gateway, small_world)
        outcomes = gainer.collect(config_for(small_world, max_trials=3))
        assert all(o.trials == 3 and o.unresolved for o in outcomes)
        assert gainer.evaluations == 12

    def test_retry_respects_budget(self, small_world):
        gainer = gainer_for(scripted_gateway(ScriptedMode.FLAWED), small_world)
        rule = small_world.rules[0]
        report_source = trajectory(rule.charge_name, [S, S, S, N], trial_index=2)
        fact = small_world.training_cases[0].fact
        report = gainer.reflect(report_source, rule, fact, expected_guilty=True)
        with pytest.raises(TrialBudgetExceededError):
            gainer.retry_subtasks(report_source, report, rule, fact)

    def test_retry_reanswers_named_subtasks_only(self, small_world):
        gainer = gainer_for(scripted_gateway(ScriptedMode.FLAWED), small_world)
        rule = small_world.rules[0]
        fact = small_world.training_cases[0].fact
        failed = trajectory(rule.charge_name, [S, S, S, N])
        report = gainer.reflect(failed, rule, fact, expected_guilty=True)
        assert report.error_subtask_ids == ("subject",)
        retried = gainer.retry_subtasks(failed, report, rule, fact)
        assert retried.trial_index == 2
        assert retried.answer_for("subject").finding == S
        assert retried.answer_for("conduct") == failed.answer_for("conduct")

    def test_reflection_without_errors_is_rejected(self, small_world):
        gainer = gainer_for(scripted_gateway(ScriptedMode.PERFECT), small_world)
        rule = small_world.rules[0]
        with pytest.raises(ReflectionError):
            gainer.reflect(trajectory(rule.charge_name, [S] * 4), rule, small_world.training_cases[0].fact, True)

    def test_reflection_naming_unknown_aspect(self, small_world):
        rules = small_world.rule_kb()
        engine = JudgmentEngine(fixed_gateway("ERROR motive: wrong"), planned_subtasks(), rules=rules)
        gainer = ExperienceGainer(engine, rules)
        rule = small_world.rules[0]
        with pytest.raises(ReflectionError):
            gainer.reflect(trajectory(rule.charge_name, [S] * 4), rule, small_world.training_cases[0].fact, True)

    def test_backend_error_names_the_pair(self, small_world):
        rules = small_world.rule_kb()
        engine = JudgmentEngine(fixed_gateway(None), planned_subtasks(), rules=rules)
        pair = training_pairs(small_world.training_cases)[0]
        with pytest.raises(JudgmentAbortedError) as excinfo:
            ExperienceGainer(engine, rules).gain_for_pair(pair)
        assert excinfo.value.details["case_id"] == pair.fact.case_id
        assert excinfo.value.details["golden"] == pair.golden


class TestInsightDrawer:
    """Drawing and filtering insights."""

    def test_pair_insight_carries_the_hint(self, small_world):
        rule = small_world.rules[0]
        fact = small_world.training_cases[0].fact
        esp = build_pairs(trajectory(rule.charge_name, [S, S, S, N]),
                          trajectory(rule.charge_name, [S, S, S, S], trial_index=2))[0]
        insight = InsightDrawer(scripted_gateway(), planned_subtasks()).draw_insight_from_pair(esp, rule, fact)
        assert insight.source == InsightSource.ERROR_SUCCESS_PAIR
        assert insight.id.startswith(f"draft/{rule.charge_name}/subject/")
        assert insight.text.startswith("If the fact shows state functionary")
        assert "[HINT element=subject]" in insight.text

    def test_pair_insight_must_be_conditional(self, small_world):
        rule = small_world.rules[0]
        esp = build_pairs(trajectory(rule.charge_name, [S, S, S, N]),
                          trajectory(rule.charge_name, [S] * 4, trial_index=2))[0]
        drawer = InsightDrawer(fixed_gateway("The subject matters."), planned_subtasks())
        with pytest.raises(InsightFormatError):
            drawer.draw_insight_from_pair(esp, rule, small_world.training_cases[0].fact)

    def test_direct_insights(self, small_world):
        rule = small_world.rules[0]
        insights = InsightDrawer(scripted_gateway(), planned_subtasks()).draw_direct_insights(rule)
        assert [i.subtask_id for i in insights] == planned_subtasks().ids()
        assert all(i.source == InsightSource.DIRECT for i in insights)
        assert insights[0].id == f"{rule.charge_name}/conduct/direct-1"
        assert all("[HINT" not in i.text for i in insights)

    def test_filter_preserves_order_and_drops_duplicates(self):
        bucket = [
            Insight(id=f"d{n}", charge_name="A", subtask_id="subject", text=text, source=InsightSource.SUCCESS)
            for n, text in enumerate([TEXT_POOL[1], TEXT_POOL[0], TEXT_POOL[1], TEXT_POOL[3]])
        ]
        kept = InsightDrawer(scripted_gateway(), planned_subtasks()).filter_insights("A", bucket)
        assert [i.id for i in kept] == ["d0", "d1"]

    def test_filter_empty_bucket_makes_no_call(self, perfect_gateway):
        assert InsightDrawer(perfect_gateway, planned_subtasks()).filter_insights("A", []) == []
        assert perfect_gateway.ledger.snapshot().completions == 0

    @pytest.mark.parametrize("output", ["KEEP: ghost", "I would keep them all."])
    def test_filter_rejects_bad_output(self, output):
        bucket = [Insight(id="d1", charge_name="A", subtask_id="s", text=TEXT_POOL[0], source=InsightSource.SUCCESS)]
        with pytest.raises(FilterError):
            InsightDrawer(fixed_gateway(output), planned_subtasks()).filter_insights("A", bucket)

    @given(st.lists(st.sampled_from(TEXT_POOL), min_size=1, max_size=12))
    @settings(max_examples=50, deadline=None)
    def test_filter_is_idempotent(self, texts):
        drawer = InsightDrawer(scripted_gateway(), planned_subtasks())
        bucket = [
            Insight(id=f"d{n}", charge_name="A", subtask_id="subject", text=text, source=InsightSource.SUCCESS)
            for n, text in enumerate(texts)
        ]
        once = drawer.filter_insights("A", bucket)
        assert drawer.filter_insights("A", once) == once
        assert set(i.id for i in once) <= set(i.id for i in bucket)


class TestInsightTrainer:
    """Training runs and their ablation switches."""

    def test_flawed_training_writes_pair_insights(self, small_world):
        trainer = InsightTrainer(scripted_gateway(ScriptedMode.FLAWED), small_world.rule_kb(), planned_subtasks())
        kb = InsightKB()
        report = trainer.run_training(config_for(small_world), kb)

        assert [e.insights_written for e in report.entries] == [2, 2, 1, 1]
        assert all(e.experience_kind == ExperienceKind.ERROR_SUCCESS_PAIR for e in report.entries)
        assert all(e.resolved_at_trial == 2 for e in report.entries)
        assert report.insights_per_charge == {
            "Offence 01A": 2, "Offence 01B": 2, "Offence 02A": 1, "Offence 02B": 1,
        }
        assert len(kb) == 6
        for insight in kb.all_insights():
            assert insight.subtask_id == "subject"
            assert insight.source == InsightSource.ERROR_SUCCESS_PAIR
            assert insight.id.startswith(f"{insight.charge_name}/subject/")
        assert len(trainer.experiences) == 4

    def test_perfect_training_writes_success_insights(self, small_world):
        trainer = InsightTrainer(scripted_gateway(ScriptedMode.PERFECT), small_world.rule_kb(), planned_subtasks())
        report = trainer.run_training(config_for(small_world))
        assert all(e.experience_kind == ExperienceKind.SUCCESS for e in report.entries)
        assert all(e.resolved_at_trial == 1 for e in report.entries)
        assert all(i.source == InsightSource.SUCCESS for i in trainer.insight_kb.all_insights())
        assert len(trainer.insight_kb) == 20

    def test_filtering_removes_cross_case_duplicates(self, world):
        def run(**switches):
            trainer = InsightTrainer(scripted_gateway(ScriptedMode.FLAWED), world.rule_kb(), planned_subtasks())
            trainer.run_training(config_for(world, **switches))
            return len(trainer.insight_kb)

        assert run() == 20
        assert run(enable_filtering=False) == 40

    def test_filter_failure_is_reported(self, small_world):
        gateway = ModelGateway(backend=UnfilteringBackend(), templates=TemplateLibrary.load(DEFAULT_TEMPLATES_DIR))
        trainer = InsightTrainer(gateway, small_world.rule_kb(), planned_subtasks())
        report = trainer.run_training(config_for(small_world))

        unfiltered = InsightTrainer(scripted_gateway(ScriptedMode.FLAWED), small_world.rule_kb(), planned_subtasks())
        unfiltered.run_training(config_for(small_world, enable_filtering=False))

        assert sorted(report.filter_failures) == ["Offence 01A", "Offence 01B", "Offence 02A", "Offence 02B"]
        assert len(trainer.insight_kb) == len(unfiltered.insight_kb)

    def test_clean_run_reports_no_filter_failures(self, small_world):
        trainer = InsightTrainer(scripted_gateway(ScriptedMode.FLAWED), small_world.rule_kb(), planned_subtasks())
        assert trainer.run_training(config_for(small_world)).filter_failures == {}

    def test_esp_switch(self, small_world):
        trainer = InsightTrainer(scripted_gateway(ScriptedMode.FLAWED), small_world.rule_kb(), planned_subtasks())
        report = trainer.run_training(config_for(small_world, enable_esp_experience=False))
        assert len(trainer.insight_kb) == 0
        assert all(e.insights_written == 0 for e in report.entries)

    def test_success_switch(self, small_world):
        trainer = InsightTrainer(scripted_gateway(ScriptedMode.PERFECT), small_world.rule_kb(), planned_subtasks())
        trainer.run_training(config_for(small_world, enable_success_experience=False))
        assert len(trainer.insight_kb) == 0

    def test_unresolved_pairs_reported(self, small_world):
        gateway = scripted_gateway(ScriptedMode.FLAWED, misdirect_reflection=True)
        trainer = InsightTrainer(gateway, small_world.rule_kb(), planned_subtasks())
        report = trainer.run_training(config_for(small_world))
        assert len(report.unresolved) == 4
        assert all(e.resolved_at_trial is None and e.experience_kind is None for e in report.entries)
        assert len(trainer.insight_kb) == 0

    def test_parallel_training_matches_sequential(self, small_world):
        def run(workers):
            trainer = InsightTrainer(scripted_gateway(ScriptedMode.FLAWED), small_world.rule_kb(),
                                     planned_subtasks(), max_workers=workers)
            kb = InsightKB()
            report = trainer.run_training(config_for(small_world), kb)
            return report, kb

        sequential_report, sequential_kb = run(1)
        parallel_report, parallel_kb = run(4)
        assert sequential_report == parallel_report
        assert [i.text for i in sequential_kb.all_insights()] == [i.text for i in parallel_kb.all_insights()]
