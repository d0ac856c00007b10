"""Sub-task auto-planner: propose per sample, canonicalize, keep frequent aspects."""

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Sequence

from pydantic import ValidationError

from ..core.exceptions import ParseError, PlanningError, ReasonerError
from ..core.models import (
    AgentSpec, DroppedSubTask, FactDescription, LegalRule, PlannerConfig, SubTask,
    SubTaskProposal, SubTaskSet
)
from ..gateway.gateway import ModelGateway
from ..judgment.parsing import parse_enumerated_list, parse_mapping

if TYPE_CHECKING:
    from ..knowledge.rule_kb import RuleKB

logger = logging.getLogger(__name__)


def sample_id(fact: FactDescription, rule: LegalRule) -> str:
    """A planning sample is one (case, charge) query."""
    return f"{fact.case_id}/{rule.charge_name}"


def subtask_id_for(label: str) -> str:
    """Stable id derived from a canonical label."""
    slug = re.sub(r"[^a-z0-9]+", "_", label.lower()).strip("_")
    return slug or "aspect"


class AutoPlanner:
    """Decomposes the charge question into a shared set of sub-tasks."""

    def __init__(self, gateway: ModelGateway, max_workers: int = 4):
        """
        Initialize the planner.

        Args:
            gateway: Model gateway
            max_workers: Parallel proposal calls across samples
        """
        self.gateway = gateway
        self.max_workers = max_workers

    def propose_subtasks(
        self,
        question: str,
        rule: LegalRule,
        fact: FactDescription,
        template_name: str = "planner"
    ) -> List[SubTaskProposal]:
        """
        Ask the model to decompose the question for one sample.

        Args:
            question: The charge question bound to the question slot
            rule: Rule of the sample's charge
            fact: Sample fact

        Returns:
            Proposals in model order
        """
        if not rule.text.strip() or not fact.text.strip():
            raise PlanningError("Planner needs a non-empty rule and fact")

        result = self.gateway.complete_template(template_name, {
            "question": question,
            "rule": rule.text,
            "fact": fact.text,
        })
        items = parse_enumerated_list(result.text)
        return [
            SubTaskProposal(raw_label=label, description=description, source_sample_id=sample_id(fact, rule))
            for label, description in items
        ]

    def canonicalize(self, raw_labels: Sequence[str], template_name: str = "canonicalizer") -> Dict[str, str]:
        """One call mapping each raw label to a canonical label; unmapped labels map to themselves."""
        distinct = list(dict.fromkeys(raw_labels))
        result = self.gateway.complete_template(template_name, {
            "labels": "\n".join(f"- {label}" for label in distinct),
        })
        mapping = parse_mapping(result.text)
        return {label: mapping.get(label, label) for label in distinct}

    def consolidate(
        self,
        proposals: Sequence[SubTaskProposal],
        sample_count: int,
        zeta: float,
        template_name: str = "canonicalizer"
    ) -> SubTaskSet:
        """
        Keep canonical labels proposed by at least a zeta share of samples.

        Probability is the number of distinct samples proposing a label over
        sample_count. Retained labels are ordered by descending probability,
        then label.

        Args:
            proposals: Proposals from every sample
            sample_count: Number of training samples
            zeta: Retention threshold in (0, 1]

        Returns:
            SubTaskSet with the kept and dropped labels
        """
        if sample_count < 1:
            raise PlanningError("sample_count must be at least 1")
        if not proposals:
            raise PlanningError("No sub-task proposals to consolidate")

        canonical = self.canonicalize([p.raw_label for p in proposals], template_name)

        samples: Dict[str, set] = {}
        descriptions: Dict[str, str] = {}
        for proposal in proposals:
            label = canonical[proposal.raw_label]
            samples.setdefault(label, set()).add(proposal.source_sample_id)
            if proposal.description and label not in descriptions:
                descriptions[label] = proposal.description

        probabilities = {label: min(len(ids) / sample_count, 1.0) for label, ids in samples.items()}
        ranked = sorted(probabilities, key=lambda label: (-probabilities[label], label))

        kept: List[SubTask] = []
        dropped: List[DroppedSubTask] = []
        used_ids = set()
        for label in ranked:
            probability = probabilities[label]
            if probability >= zeta:
                base = subtask_id_for(label)
                sid, n = base, 1
                while sid in used_ids:
                    n += 1
                    sid = f"{base}_{n}"
                used_ids.add(sid)
                kept.append(SubTask(id=sid, label=label, description=descriptions.get(label, ""),
                                    probability=probability))
            else:
                dropped.append(DroppedSubTask(label=label, probability=probability))

        if not kept:
            raise PlanningError(f"No sub-task reached the threshold {zeta}")

        logger.info(f"Planner kept {[st.label for st in kept]}, dropped {[d.label for d in dropped]}")
        return SubTaskSet(subtasks=tuple(kept), zeta=zeta, sample_count=sample_count, dropped=tuple(dropped))

    def plan(self, config: PlannerConfig, rules: "RuleKB") -> SubTaskSet:
        """
        Propose sub-tasks for every training sample, then consolidate.

        Args:
            config: Planner inputs (threshold, question, (case, charge) samples)
            rules: Rule KB resolving the sample charges

        Returns:
            The planned SubTaskSet
        """
        if not config.training_samples:
            raise PlanningError("Planner needs at least one training sample")

        logger.info(f"Planning sub-tasks from {len(config.training_samples)} samples (zeta={config.zeta})")
        jobs = [(case.fact, rules.get_rule(charge)) for case, charge in config.training_samples]

        def run(job):
            fact, rule = job
            try:
                return self.propose_subtasks(config.question, rule, fact, config.planner_template)
            except ReasonerError as e:
                e.message = f"sample {fact.case_id} ({rule.charge_name}): {e.message}"
                e.args = (e.message,)
                e.details["sample"] = fact.case_id
                raise

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            per_sample = list(executor.map(run, jobs))

        proposals = [p for sample in per_sample for p in sample]
        distinct_samples = len({sample_id(fact, rule) for fact, rule in jobs})
        return self.consolidate(proposals, distinct_samples, config.zeta, config.canonicalizer_template)

    def assign_roles(self, subtasks: SubTaskSet, template_name: str = "agent_role") -> List[AgentSpec]:
        """One role-configured agent per sub-task."""
        agents = []
        for subtask in subtasks.subtasks:
            result = self.gateway.complete_template(template_name, {
                "label": subtask.label,
                "description": subtask.description or subtask.label,
            })
            preamble = result.text.strip()
            if not preamble:
                logger.warning(f"Empty role description for '{subtask.label}'; using a generic one")
                preamble = f"You judge only the {subtask.label} aspect of the legal rule."
            agents.append(AgentSpec(subtask_id=subtask.id, role_preamble=preamble))
        return agents


def save_subtasks(subtasks: SubTaskSet, path: Path) -> None:
    """Write a SubTaskSet document."""
    path = Path(path)
    try:
        path.write_text(json.dumps(subtasks.model_dump(mode="json"), indent=2, ensure_ascii=False) + "\n",
                        encoding="utf-8")
    except OSError as e:
        raise PlanningError(f"Cannot write sub-task set to {path}: {e}")


def load_subtasks(path: Path) -> SubTaskSet:
    """Read a SubTaskSet document."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise PlanningError(f"Cannot read sub-task set {path}: {e}")
    except UnicodeDecodeError as e:
        raise PlanningError(f"Sub-task set {path} is not UTF-8 text: {e}")
    except json.JSONDecodeError as e:
        raise PlanningError(f"Sub-task set {path} is not valid JSON: {e}")
    try:
        return SubTaskSet.model_validate(document)
    except ValidationError as e:
        raise PlanningError(f"Sub-task set {path} is malformed: {e}")
