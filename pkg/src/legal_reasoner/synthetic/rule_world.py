"""Synthetic rule world: machine-checkable charges and cases for the scripted backend.

Every charge has four elements (subject, mental, object, conduct). The two
charges of pair ``i`` share three element values and differ in element
``i % 4``. Rules mark elements as ``[ELEM key=value]`` and facts mark
attributes as ``[ATTR key=value]``, which is what the scripted backend reads.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from ..core.models import CaseRecord, ChargeQuery, FactDescription, LegalRule
from ..evaluation.datasets import save_cases
from ..knowledge.rule_kb import RuleKB

logger = logging.getLogger(__name__)

ELEMENT_KEYS = ("subject", "mental", "object", "conduct")

BASE_VALUES: Dict[str, Tuple[str, ...]] = {
    "subject": ("state_functionary", "company_employee", "adult_person", "medical_worker",
                "bank_clerk", "customs_officer", "tax_official", "school_teacher"),
    "mental": ("direct_intent", "illegal_possession", "profit_motive", "revenge_motive",
               "deceptive_intent", "reckless_disregard", "coercive_intent", "concealment_intent"),
    "object": ("public_property", "personal_liberty", "financial_order", "public_health",
               "bank_credit", "customs_control", "tax_collection", "school_safety"),
    "conduct": ("secret_taking", "unlawful_confinement", "false_statement", "bribe_acceptance",
                "forged_documents", "smuggling_goods", "tax_evasion", "violent_assault"),
}

PARTNER_VALUES: Dict[str, Tuple[str, ...]] = {
    "subject": ("private_citizen", "public_servant", "minor_person", "pharmacy_owner",
                "loan_broker", "border_guard", "private_accountant", "tutoring_agent"),
    "mental": ("negligence", "temporary_use", "political_motive", "jealousy",
               "honest_mistake", "careless_oversight", "protective_intent", "disclosure_intent"),
    "object": ("private_property", "family_order", "market_order", "personal_health",
               "state_secrets", "trade_order", "land_management", "traffic_safety"),
    "conduct": ("violent_seizure", "threatening_calls", "fund_diversion", "bribe_offering",
                "altered_records", "border_crossing", "false_invoicing", "verbal_insult"),
}

RULE_PHRASES = {
    "subject": "the offender is {value}",
    "mental": "the offender acts with {value}",
    "object": "the act harms {value}",
    "conduct": "the act consists of {value}",
}

FACT_PHRASES = {
    "subject": "The defendant was {value}",
    "mental": "acted with {value}",
    "object": "harmed {value}",
    "conduct": "through {value}",
}

SCENES = ("in the morning", "at night", "over several weeks", "during a public holiday")


def _human(value: str) -> str:
    return value.replace("_", " ")


def rule_text(charge_name: str, elements: Dict[str, str]) -> str:
    clauses = [
        f"{RULE_PHRASES[key].format(value=_human(elements[key]))} [ELEM {key}={elements[key]}]"
        for key in ELEMENT_KEYS if key in elements
    ]
    return f"{charge_name} is committed when " + "; ".join(clauses) + "."


def fact_text(attributes: Dict[str, str], scene: str) -> str:
    parts = [
        f"{FACT_PHRASES[key].format(value=_human(attributes[key]))} [ATTR {key}={attributes[key]}]"
        for key in ELEMENT_KEYS if key in attributes
    ]
    return ", ".join(parts) + f", {scene}."


class RuleWorld(BaseModel):
    """Charges, their elements and the generated case sets."""
    model_config = ConfigDict(frozen=True)

    rules: Tuple[LegalRule, ...]
    elements: Dict[str, Dict[str, str]]
    pairs: Tuple[Tuple[str, str], ...]
    training_cases: Tuple[CaseRecord, ...]
    evaluation_cases: Tuple[CaseRecord, ...]

    def rule_kb(self) -> RuleKB:
        return RuleKB(self.rules)

    def differing_element(self, pair_index: int) -> str:
        return ELEMENT_KEYS[pair_index % len(ELEMENT_KEYS)]

    def innocent_case(self, charge_name: str, case_id: Optional[str] = None) -> CaseRecord:
        """Single-query record whose fact misses one element of ``charge_name``."""
        index = [name for pair in self.pairs for name in pair].index(charge_name) // 2
        key = self.differing_element(index)
        attributes = dict(self.elements[charge_name])
        attributes[key] = "unrelated_matter"
        return CaseRecord(
            fact=FactDescription(case_id=case_id or f"innocent-{charge_name}", text=fact_text(attributes, SCENES[0])),
            queries=(ChargeQuery(charge_name=charge_name, expected_guilty=False),)
        )


def _cases(
    pairs: List[Tuple[str, str]],
    elements: Dict[str, Dict[str, str]],
    cases_per_charge: int,
    prefix: str,
    scene_offset: int
) -> Tuple[CaseRecord, ...]:
    cases = []
    for index, (first, second) in enumerate(pairs):
        tag = f"{first} / {second}"
        for golden, confusing in ((first, second), (second, first)):
            for j in range(cases_per_charge):
                scene = SCENES[(j + scene_offset) % len(SCENES)]
                cases.append(CaseRecord(
                    fact=FactDescription(
                        case_id=f"{prefix}-{index + 1:02d}-{golden[-1]}-{j + 1}",
                        text=fact_text(elements[golden], scene)
                    ),
                    queries=(
                        ChargeQuery(charge_name=golden, expected_guilty=True),
                        ChargeQuery(charge_name=confusing, expected_guilty=False),
                    ),
                    pair_tag=tag
                ))
    return tuple(cases)


def generate_rule_world(n_pairs: int = 8, cases_per_charge: int = 2) -> RuleWorld:
    """
    Build a deterministic rule world.

    Args:
        n_pairs: Confusing-charge pairs, at most 8
        cases_per_charge: Cases in which each charge is the golden charge, per split

    Returns:
        RuleWorld with ``2 * n_pairs`` charges and ``2 * n_pairs * cases_per_charge``
        cases in each of the training and evaluation splits
    """
    limit = len(BASE_VALUES["subject"])
    if not 1 <= n_pairs <= limit:
        raise ValueError(f"n_pairs must be between 1 and {limit}")
    if cases_per_charge < 1:
        raise ValueError("cases_per_charge must be at least 1")

    rules: List[LegalRule] = []
    elements: Dict[str, Dict[str, str]] = {}
    pairs: List[Tuple[str, str]] = []
    for i in range(n_pairs):
        base = {key: BASE_VALUES[key][i] for key in ELEMENT_KEYS}
        differing = ELEMENT_KEYS[i % len(ELEMENT_KEYS)]
        partner = dict(base, **{differing: PARTNER_VALUES[differing][i]})

        names = (f"Offence {i + 1:02d}A", f"Offence {i + 1:02d}B")
        for name, values in zip(names, (base, partner)):
            elements[name] = values
            rules.append(LegalRule(charge_name=name, text=rule_text(name, values), article_ref=f"Synthetic {name[-3:]}"))
        pairs.append(names)

    world = RuleWorld(
        rules=tuple(rules),
        elements=elements,
        pairs=tuple(pairs),
        training_cases=_cases(pairs, elements, cases_per_charge, "train", 0),
        evaluation_cases=_cases(pairs, elements, cases_per_charge, "eval", 1)
    )
    logger.debug(f"Generated rule world with {len(rules)} charges")
    return world


def write_corpus(world: RuleWorld, directory: Path) -> Dict[str, Path]:
    """
    Write ``rules.json``, ``train.jsonl`` and ``eval.jsonl`` into a directory.

    Returns:
        File role -> written path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "rules": directory / "rules.json",
        "train": directory / "train.jsonl",
        "eval": directory / "eval.jsonl",
    }
    world.rule_kb().save(paths["rules"])
    save_cases(world.training_cases, paths["train"])
    save_cases(world.evaluation_cases, paths["eval"])
    logger.info(f"Wrote rule world ({len(world.rules)} charges) to {directory}")
    return paths
