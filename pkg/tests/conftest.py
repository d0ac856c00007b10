"""Pytest configuration and fixtures for legal reasoning tests."""

from typing import Callable

import pytest

from legal_reasoner.core.config import DEFAULT_TEMPLATES_DIR, ScriptedMode
from legal_reasoner.core.models import SubTask, SubTaskSet
from legal_reasoner.gateway.gateway import ModelGateway
from legal_reasoner.gateway.scripted import ScriptedBackend
from legal_reasoner.gateway.templates import TemplateLibrary
from legal_reasoner.synthetic.rule_world import RuleWorld, generate_rule_world

# Order the planner produces: equal probabilities, then label order
PLANNED_LABELS = ("Conduct", "Mental", "Object", "Subject")


def planned_subtasks() -> SubTaskSet:
    """The sub-task set the planner derives from the rule world."""
    return SubTaskSet(
        subtasks=tuple(SubTask(id=label.lower(), label=label, probability=1.0) for label in PLANNED_LABELS),
        zeta=0.8,
        sample_count=32
    )


def scripted_gateway(
    mode: ScriptedMode = ScriptedMode.PERFECT,
    flawed_element: str = "subject",
    misdirect_reflection: bool = False
) -> ModelGateway:
    backend = ScriptedBackend(mode=mode, flawed_element=flawed_element, misdirect_reflection=misdirect_reflection)
    return ModelGateway(backend=backend, templates=TemplateLibrary.load(DEFAULT_TEMPLATES_DIR))


@pytest.fixture(scope="session")
def world() -> RuleWorld:
    """Full 16-charge rule world with two cases per charge and split."""
    return generate_rule_world()


@pytest.fixture
def small_world() -> RuleWorld:
    """Two confusing pairs, one case per charge and split."""
    return generate_rule_world(n_pairs=2, cases_per_charge=1)


@pytest.fixture
def subtasks() -> SubTaskSet:
    return planned_subtasks()


@pytest.fixture
def make_gateway() -> Callable[..., ModelGateway]:
    """Factory for scripted gateways."""
    return scripted_gateway


@pytest.fixture
def perfect_gateway() -> ModelGateway:
    return scripted_gateway(ScriptedMode.PERFECT)


@pytest.fixture
def flawed_gateway() -> ModelGateway:
    return scripted_gateway(ScriptedMode.FLAWED, flawed_element="subject")


@pytest.fixture
def affirmative_gateway() -> ModelGateway:
    return scripted_gateway(ScriptedMode.AFFIRMATIVE)
