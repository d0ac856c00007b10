"""Single-pass baseline strategies."""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from ..core.exceptions import DataError, PreconditionError
from ..core.models import (
    FEW_SHOT_STRATEGIES, CaseOutcome, CaseRecord, Exemplar, FactDescription, Finding, LegalRule,
    StrategyName, StrategySpec, SubAnswer, Verdict, build_outcome
)
from ..gateway.gateway import ModelGateway
from ..judgment.engine import combine
from ..judgment.parsing import parse_element_lines, parse_finding
from ..knowledge.rule_kb import RuleKB

logger = logging.getLogger(__name__)

STRATEGY_TEMPLATES: Dict[StrategyName, str] = {
    StrategyName.ZS_COT: "zs_cot",
    StrategyName.LRP: "lrp",
    StrategyName.FS_PROMPT: "fs_prompt",
    StrategyName.FS_COT: "fs_cot",
    StrategyName.CHAIN_OF_LOGIC: "chain_of_logic",
}


def load_exemplars(path: Path) -> Tuple[Exemplar, ...]:
    """Few-shot demonstrations from a JSON list."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"Cannot read exemplars {path}: {e}")
    except UnicodeDecodeError as e:
        raise DataError(f"Exemplars {path} are not UTF-8 text: {e}")
    except json.JSONDecodeError as e:
        raise DataError(f"Exemplars {path} are not valid JSON: {e}")
    if not isinstance(document, list):
        raise DataError(f"Exemplars {path} must be a JSON list")
    try:
        return tuple(Exemplar.model_validate(item) for item in document)
    except ValidationError as e:
        raise DataError(f"Exemplars {path} are malformed: {e}")


def render_exemplars(exemplars: Tuple[Exemplar, ...], with_reasoning: bool) -> str:
    blocks = []
    for index, exemplar in enumerate(exemplars, start=1):
        lines = [
            f"Example {index}.",
            f"Charge: {exemplar.charge_name}",
            f"Rule: {exemplar.rule}",
            f"Fact: {exemplar.fact}",
        ]
        if with_reasoning:
            lines.append(f"Reasoning: {exemplar.reasoning}")
        lines.append(f"Answer: {'YES' if exemplar.answer else 'NO'}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def _verdict_from_finding(finding: Finding, rationale: str, flagged: bool) -> Verdict:
    return Verdict(guilty=finding == Finding.SATISFIED, rationale=rationale, parse_flagged=flagged)


class BaselineJudge:
    """Judges charges with one completion per charge, no decomposition agents."""

    def __init__(self, gateway: ModelGateway, rules: Optional[RuleKB] = None):
        self.gateway = gateway
        self.rules = rules

    def baseline_judge(self, strategy: StrategySpec, fact: FactDescription, rule: LegalRule) -> Verdict:
        """
        Judge one charge with a baseline strategy.

        Args:
            strategy: Baseline strategy with its exemplars
            fact: Case fact
            rule: Rule of the judged charge

        Returns:
            Verdict; unparseable output is flagged and counts as wrong
        """
        if strategy.name not in STRATEGY_TEMPLATES:
            raise PreconditionError(f"'{strategy.name.value}' is not a baseline strategy")

        bindings = {"charge": rule.charge_name, "rule": rule.text, "fact": fact.text}
        if strategy.name in FEW_SHOT_STRATEGIES:
            bindings["exemplars"] = render_exemplars(
                strategy.exemplars, with_reasoning=strategy.name == StrategyName.FS_COT
            )
        result = self.gateway.complete_template(STRATEGY_TEMPLATES[strategy.name], bindings)

        if strategy.name == StrategyName.CHAIN_OF_LOGIC:
            return self._chain_of_logic_verdict(result.text)
        parsed = parse_finding(result.text)
        return _verdict_from_finding(parsed.finding, parsed.rationale, parsed.flagged)

    @staticmethod
    def _chain_of_logic_verdict(raw: str) -> Verdict:
        answers: List[SubAnswer] = []
        seen = set()
        for key, finding in parse_element_lines(raw):
            if key not in seen:
                seen.add(key)
                answers.append(SubAnswer(subtask_id=key, finding=finding))
        if not answers:
            parsed = parse_finding(raw)
            return _verdict_from_finding(parsed.finding, parsed.rationale, True)
        return combine(answers)

    def predict_case(self, case: CaseRecord, strategy: StrategySpec) -> CaseOutcome:
        """Judge every query of a case with one baseline strategy."""
        if self.rules is None:
            raise PreconditionError("Case prediction needs a rule KB")
        verdicts = [
            self.baseline_judge(strategy, case.fact, self.rules.get_rule(query.charge_name))
            for query in case.queries
        ]
        return build_outcome(case, verdicts)
