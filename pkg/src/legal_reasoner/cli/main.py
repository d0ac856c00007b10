"""Command-line interface for the legal reasoning engine."""

import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..core.config import BackendKind, OracleKind, ScriptedMode, Settings, load_settings
from ..core.exceptions import EXIT_USAGE, DataError, ReasonerError
from ..core.log_setup import configure_logging
from ..core.models import (
    AgentSpec, FactDescription, Finding, JudgmentContext, PlannerConfig, ReasoningMode, StrategyName, StrategySpec,
    SubTaskSet, TrainerConfig, Trajectory, Verdict, FEW_SHOT_STRATEGIES
)
from ..evaluation.baselines import load_exemplars
from ..evaluation.datasets import load_cases, planner_samples, training_pairs
from ..evaluation.harness import EvaluationHarness, build_retriever, mode_label
from ..evaluation.report_manager import ReportManager
from ..feedback.experts import build_expert
from ..feedback.oracle import FeedbackOracle
from ..gateway.gateway import ModelGateway, build_gateway
from ..judgment.engine import JudgmentEngine
from ..knowledge.insight_kb import InsightKB
from ..knowledge.rule_kb import RuleKB
from ..planning.auto_planner import AutoPlanner, load_subtasks, save_subtasks
from ..synthetic.rule_world import generate_rule_world, write_corpus
from ..training.trainer import InsightTrainer


console = Console()
err_console = Console(stderr=True)

FINDING_STYLES = {
    Finding.SATISFIED: "green",
    Finding.NOT_SATISFIED: "red",
    Finding.UNCERTAIN: "yellow",
}


class MalrGroup(click.Group):
    """Click group mapping library errors and usage errors to the exit-code contract."""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise
        except ReasonerError as e:
            err_console.print(f"[red]Error:[/red] {e.message}", markup=True, highlight=False)
            ctx.exit(e.exit_code)


class AppContext:
    """Settings plus lazily built shared components."""

    def __init__(self, settings: Settings):
        self.settings = settings
        self._gateway: Optional[ModelGateway] = None

    @property
    def gateway(self) -> ModelGateway:
        if self._gateway is None:
            self._gateway = build_gateway(self.settings)
        return self._gateway

    def oracle(self) -> FeedbackOracle:
        return FeedbackOracle(self.gateway, build_expert(self.settings, self.gateway))

    def agents(self, subtasks: SubTaskSet) -> List[AgentSpec]:
        return AutoPlanner(self.gateway).assign_roles(subtasks)

    def close(self) -> None:
        if self._gateway is not None:
            self._gateway.close()


def resolve_mode(no_insight: bool, no_ask: bool, direct: bool) -> ReasoningMode:
    if no_insight:
        return ReasoningMode.bare()
    if direct:
        return ReasoningMode.direct()
    if no_ask:
        return ReasoningMode.insight_only()
    return ReasoningMode.full()


def load_insight_kb(path: Optional[str]) -> InsightKB:
    return InsightKB.load(Path(path)) if path else InsightKB()


# CLI Commands
@click.group(cls=MalrGroup)
@click.option('--config', 'config_path', default=None, help='YAML config file')
@click.option('--backend', type=click.Choice([k.value for k in BackendKind]), default=None, help='Completion backend')
@click.option('--scripted-mode', type=click.Choice([m.value for m in ScriptedMode]), default=None,
              help='Behaviour of the scripted backend')
@click.option('--flawed-element', default=None, help='Element the flawed scripted backend misjudges')
@click.option('--misdirect-reflection', is_flag=True, default=False,
              help='Make the scripted self-reflector blame a correct aspect')
@click.option('--oracle', type=click.Choice([k.value for k in OracleKind]), default=None, help='Knowledge-feedback expert')
@click.option('--workers', type=int, default=None, help='Worker pool size')
@click.option('--deterministic', is_flag=True, default=False, help='Reproducible reports (zero wall time)')
@click.option('--log-level', default=None, help='Log level')
@click.pass_context
def cli(ctx, config_path, backend, scripted_mode, flawed_element, misdirect_reflection, oracle, workers,
        deterministic, log_level):
    """Multi-agent legal rule reasoning: plan, train, infer and evaluate."""
    overrides: Dict[str, Any] = {
        "backend": {
            "kind": backend,
            "scripted_mode": scripted_mode,
            "flawed_element": flawed_element,
            "misdirect_reflection": misdirect_reflection or None,
        },
        "oracle": {"kind": oracle},
        "worker_pool_size": workers,
        "deterministic": deterministic or None,
        "log_level": log_level,
    }
    settings = load_settings(config_path, overrides)
    configure_logging(settings.log_level)

    app = AppContext(settings)
    ctx.obj = app
    ctx.call_on_close(app.close)


@cli.command()
@click.option('--train', 'train_path', required=True, help='Training case file')
@click.option('--rules', 'rules_path', required=True, help='Rule KB file')
@click.option('--out', 'out_path', required=True, help='Sub-task set output file')
@click.option('--zeta', type=float, default=None, help='Retention threshold (overrides config)')
@click.pass_obj
def plan(app: AppContext, train_path, rules_path, out_path, zeta):
    """Plan the shared sub-task set from training cases."""
    rules = RuleKB.load(Path(rules_path))
    cases = load_cases(Path(train_path), rules)
    config = PlannerConfig(zeta=zeta if zeta is not None else app.settings.zeta,
                           training_samples=planner_samples(cases))

    planner = AutoPlanner(app.gateway, max_workers=app.settings.worker_pool_size)
    subtasks = planner.plan(config, rules)
    save_subtasks(subtasks, Path(out_path))

    display_subtasks(subtasks)
    console.print(f"Sub-task set written to [bold]{out_path}[/bold]")


@cli.command()
@click.option('--train', 'train_path', required=True, help='Training case file')
@click.option('--rules', 'rules_path', required=True, help='Rule KB file')
@click.option('--subtasks', 'subtasks_path', required=True, help='Sub-task set file')
@click.option('--kb', 'kb_path', required=True, help='Insight KB output file')
@click.option('--report', 'report_path', default=None, help='Training report output file')
@click.option('--max-trials', type=int, default=None, help='Trial budget L (overrides config)')
@click.option('--no-success', is_flag=True, help='Skip insights from first-trial successes')
@click.option('--no-esp', is_flag=True, help='Skip insights from error-success pairs')
@click.option('--no-filter', is_flag=True, help='Keep insights unfiltered')
@click.pass_obj
def train(app: AppContext, train_path, rules_path, subtasks_path, kb_path, report_path, max_trials,
          no_success, no_esp, no_filter):
    """Gain experience on training pairs and write the insight KB."""
    rules = RuleKB.load(Path(rules_path))
    cases = load_cases(Path(train_path), rules)
    subtasks = load_subtasks(Path(subtasks_path))

    pairs = training_pairs(cases)
    if not pairs:
        raise DataError(f"No golden/confusing pairs in {train_path}")
    config = TrainerConfig(
        max_trials=max_trials if max_trials is not None else app.settings.max_trials,
        charges=tuple(pairs),
        enable_success_experience=not no_success,
        enable_esp_experience=not no_esp,
        enable_filtering=not no_filter
    )

    trainer = InsightTrainer(app.gateway, rules, subtasks, agents=app.agents(subtasks),
                             max_workers=app.settings.worker_pool_size)
    insight_kb = InsightKB()
    report = trainer.run_training(config, insight_kb)
    insight_kb.save(Path(kb_path))
    if report_path:
        ReportManager(app.settings.resolved_templates_dir).save_training_report(report, Path(report_path))

    display_training_report(report)
    console.print(f"Insight KB written to [bold]{kb_path}[/bold] ({len(insight_kb)} insights)")


@cli.command()
@click.option('--fact', 'fact_path', required=True, help='File holding the fact description')
@click.option('--charge', required=True, help='Charge to judge')
@click.option('--rules', 'rules_path', required=True, help='Rule KB file')
@click.option('--subtasks', 'subtasks_path', required=True, help='Sub-task set file')
@click.option('--kb', 'kb_path', default=None, help='Insight KB file')
@click.option('--no-insight', is_flag=True, help='Decomposition only, no insights or feedback')
@click.option('--no-ask', is_flag=True, help='Use insights without knowledge feedback')
@click.option('--direct', is_flag=True, help='Use insights generated directly from the rule')
@click.pass_obj
def infer(app: AppContext, fact_path, charge, rules_path, subtasks_path, kb_path, no_insight, no_ask, direct):
    """Judge one charge against one fact."""
    rules = RuleKB.load(Path(rules_path))
    rule = rules.get_rule(charge)
    subtasks = load_subtasks(Path(subtasks_path))
    try:
        text = Path(fact_path).read_text(encoding="utf-8").strip()
    except OSError as e:
        raise DataError(f"Cannot read fact file {fact_path}: {e}")
    except UnicodeDecodeError as e:
        raise DataError(f"Fact file {fact_path} is not UTF-8 text: {e}")
    if not text:
        raise DataError(f"Fact file {fact_path} is empty")
    fact = FactDescription(case_id=Path(fact_path).stem, text=text)

    mode = resolve_mode(no_insight, no_ask, direct)
    gateway = app.gateway
    retriever = build_retriever(gateway, rules, subtasks, load_insight_kb(kb_path)) if mode.use_insights else None
    oracle = app.oracle() if mode.use_feedback else None
    engine = JudgmentEngine(gateway, subtasks, agents=app.agents(subtasks), rules=rules,
                            retriever=retriever, oracle=oracle)

    ctx = engine.context_for(rule, mode)
    verdict, trajectory = engine.judge_charge(fact, rule, ctx)
    display_verdict(charge, mode, verdict, trajectory, engine, ctx)


@cli.command(name='eval')
@click.option('--cases', 'cases_path', required=True, help='Evaluation case file')
@click.option('--rules', 'rules_path', required=True, help='Rule KB file')
@click.option('--strategy', required=True, type=click.Choice([s.value for s in StrategyName]), help='Strategy')
@click.option('--report', 'report_path', required=True, help='Report output file')
@click.option('--subtasks', 'subtasks_path', default=None, help='Sub-task set file (malr)')
@click.option('--kb', 'kb_path', default=None, help='Insight KB file (malr)')
@click.option('--no-insight', is_flag=True, help='malr without insights or feedback')
@click.option('--no-ask', is_flag=True, help='malr without knowledge feedback')
@click.option('--direct', is_flag=True, help='malr with directly generated insights')
@click.option('--dataset-id', default=None, help='Dataset name in the report')
@click.pass_obj
def evaluate(app: AppContext, cases_path, rules_path, strategy, report_path, subtasks_path, kb_path,
             no_insight, no_ask, direct, dataset_id):
    """Evaluate one strategy on a case file."""
    rules = RuleKB.load(Path(rules_path))
    cases = load_cases(Path(cases_path), rules)
    name = StrategyName(strategy)

    if name == StrategyName.MALR:
        spec = StrategySpec(name=name, mode=resolve_mode(no_insight, no_ask, direct))
    elif name in FEW_SHOT_STRATEGIES:
        spec = StrategySpec(name=name, exemplars=load_exemplars(app.settings.resolved_exemplars_path))
    else:
        spec = StrategySpec(name=name)

    harness = build_harness(app, rules, name, subtasks_path, kb_path, spec.effective_mode)
    report = harness.evaluate(cases, spec, dataset_id or Path(cases_path).stem)

    manager = ReportManager(app.settings.resolved_templates_dir)
    manager.save_report(report, Path(report_path))
    console.print(manager.render_text(report), markup=False, highlight=False)


@cli.command()
@click.option('--cases', 'cases_path', required=True, help='Evaluation case file')
@click.option('--rules', 'rules_path', required=True, help='Rule KB file')
@click.option('--subtasks', 'subtasks_path', required=True, help='Sub-task set file')
@click.option('--kb', 'kb_path', required=True, help='Trained insight KB file')
@click.option('--report', 'report_path', required=True, help='Report set output file')
@click.option('--train', 'train_path', default=None, help='Training case file for trainer ablations')
@click.option('--dataset-id', default=None, help='Dataset name in the reports')
@click.pass_obj
def ablate(app: AppContext, cases_path, rules_path, subtasks_path, kb_path, report_path, train_path, dataset_id):
    """Compare malr reasoning modes and trainer ablations."""
    rules = RuleKB.load(Path(rules_path))
    cases = load_cases(Path(cases_path), rules)
    harness = build_harness(app, rules, StrategyName.MALR, subtasks_path, kb_path, ReasoningMode.full())

    training = None
    if train_path:
        pairs = training_pairs(load_cases(Path(train_path), rules))
        if not pairs:
            raise DataError(f"No golden/confusing pairs in {train_path}")
        training = TrainerConfig(max_trials=app.settings.max_trials, charges=tuple(pairs))

    reports = harness.compare_ablations(cases, dataset_id or Path(cases_path).stem, training)
    manager = ReportManager(app.settings.resolved_templates_dir)
    manager.save_report_set(reports, Path(report_path))
    console.print(manager.render_text(list(reports.values())), markup=False, highlight=False)


@cli.group(cls=MalrGroup)
def kb():
    """Inspect an insight KB."""


@kb.command(name='list')
@click.option('--kb', 'kb_path', required=True, help='Insight KB file')
def kb_list(kb_path):
    """Insight counts per charge and sub-task."""
    insight_kb = InsightKB.load(Path(kb_path))
    counts = insight_kb.subtask_counts()
    if not counts:
        console.print("Knowledge base is empty")
        return

    table = Table(title="Rule insights")
    table.add_column("Charge", style="cyan")
    table.add_column("Sub-task")
    table.add_column("Insights", justify="right")
    for charge in sorted(counts):
        for sid in sorted(counts[charge]):
            table.add_row(charge, sid, str(counts[charge][sid]))
    console.print(table)


@kb.command(name='export')
@click.option('--kb', 'kb_path', required=True, help='Insight KB file')
def kb_export(kb_path):
    """Print the KB document."""
    insight_kb = InsightKB.load(Path(kb_path))
    click.echo(insight_kb.dumps(), nl=False)


@cli.command()
@click.option('--out', 'out_dir', required=True, help='Output directory')
@click.option('--pairs', 'n_pairs', type=click.IntRange(1, 8), default=8, help='Confusing-charge pairs')
@click.option('--cases-per-charge', type=click.IntRange(1, None), default=2, help='Golden cases per charge and split')
def synth(out_dir, n_pairs, cases_per_charge):
    """Write the synthetic rule-world corpus."""
    world = generate_rule_world(n_pairs=n_pairs, cases_per_charge=cases_per_charge)
    paths = write_corpus(world, Path(out_dir))
    for role, path in paths.items():
        console.print(f"{role:6} {path}")


def build_harness(
    app: AppContext,
    rules: RuleKB,
    strategy: StrategyName,
    subtasks_path: Optional[str],
    kb_path: Optional[str],
    mode: ReasoningMode
) -> EvaluationHarness:
    settings = app.settings
    gateway = app.gateway
    if strategy != StrategyName.MALR:
        return EvaluationHarness(gateway, rules, max_workers=settings.worker_pool_size,
                                 deterministic=settings.deterministic)

    if not subtasks_path:
        raise click.UsageError("--subtasks is required for the malr strategy")
    subtasks = load_subtasks(Path(subtasks_path))
    return EvaluationHarness(
        gateway,
        rules,
        subtasks=subtasks,
        agents=app.agents(subtasks),
        retriever=build_retriever(gateway, rules, subtasks, load_insight_kb(kb_path)),
        oracle=app.oracle() if mode.use_feedback else None,
        max_workers=settings.worker_pool_size,
        deterministic=settings.deterministic
    )


def display_subtasks(subtasks: SubTaskSet):
    """Display kept and dropped sub-task labels."""
    table = Table(title=f"Sub-tasks (zeta={subtasks.zeta}, samples={subtasks.sample_count})")
    table.add_column("Id", style="cyan")
    table.add_column("Label")
    table.add_column("Probability", justify="right")
    table.add_column("Status")
    for subtask in subtasks.subtasks:
        table.add_row(subtask.id, subtask.label, f"{subtask.probability:.2f}", "[green]kept[/green]")
    for dropped in subtasks.dropped:
        table.add_row("-", dropped.label, f"{dropped.probability:.2f}", "[red]dropped[/red]")
    console.print(table)


def display_training_report(report):
    """Display per-pair training results."""
    table = Table(title="Training")
    table.add_column("Case", style="cyan")
    table.add_column("Golden")
    table.add_column("Confusing")
    table.add_column("Result")
    table.add_column("Insights", justify="right")
    for entry in report.entries:
        if entry.unresolved:
            result = "[red]unresolved[/red]"
        else:
            result = f"{entry.experience_kind.value} @ trial {entry.resolved_at_trial}"
        table.add_row(entry.case_id, entry.golden, entry.confusing, result, str(entry.insights_written))
    console.print(table)
    if report.unresolved:
        console.print(f"{len(report.unresolved)} pairs unresolved", style="yellow")
    for charge_name, error in report.filter_failures.items():
        console.print(f"Insights for {charge_name} were kept unfiltered: {error}", style="yellow",
                      markup=False, highlight=False)


def display_verdict(
    charge: str,
    mode: ReasoningMode,
    verdict: Verdict,
    trajectory: Trajectory,
    engine: JudgmentEngine,
    ctx: Optional[JudgmentContext] = None
):
    """Display a verdict with its per-aspect findings and the guidance the agents used."""
    outcome = "guilty" if verdict.guilty else "not guilty"
    style = "red" if verdict.guilty else "green"
    console.print(Panel(f"[bold {style}]{outcome}[/bold {style}]\n{verdict.rationale}",
                        title=f"{charge} ({mode_label(mode)})"))
    if verdict.parse_flagged:
        console.print("Some agent output could not be parsed", style="yellow")

    table = Table(title="Aspects")
    table.add_column("Aspect", style="cyan")
    table.add_column("Finding")
    table.add_column("Insights", justify="right")
    table.add_column("Feedback", justify="right")
    for answer in trajectory.answers:
        finding_style = FINDING_STYLES[answer.finding]
        table.add_row(
            engine.subtasks.get(answer.subtask_id).label,
            f"[{finding_style}]{answer.finding.value}[/{finding_style}]",
            str(len(answer.used_insight_ids)),
            str(len(answer.used_feedback_ids))
        )
    console.print(table)

    texts = {i.id: i.text for bucket in (ctx.insights.values() if ctx else ()) for i in bucket}
    used: Sequence[str] = [i for a in trajectory.answers for i in a.used_insight_ids]
    if used:
        console.print("Insights used:")
        for insight_id in used:
            console.print(f"  {insight_id}: {texts.get(insight_id, '')}".rstrip(),
                          markup=False, highlight=False, soft_wrap=True)
    feedback_ids = [f for a in trajectory.answers for f in a.used_feedback_ids]
    if feedback_ids:
        console.print("Feedback used:")
        issued = {f.id: f for f in engine.oracle.issued(feedback_ids)} if engine.oracle else {}
        for fid in feedback_ids:
            line = f"  {fid}"
            if fid in issued:
                line += f": {issued[fid].question} -> {issued[fid].answer}"
            console.print(line, markup=False, highlight=False, soft_wrap=True)


if __name__ == "__main__":
    sys.exit(cli())
