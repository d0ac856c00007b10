"""Core module for the legal reasoning engine."""

from .models import *
from .validation import *
from .config import *
from .exceptions import *

__all__ = [
    # Models
    'Finding', 'Role', 'InsightSource', 'InsightMode', 'ExperienceKind', 'StrategyName',
    'FactDescription', 'LegalRule', 'ChargeQuery', 'CaseRecord', 'SubTask', 'SubTaskSet',
    'SubTaskProposal', 'SubAnswer', 'Trajectory', 'Verdict', 'QueryVerdict', 'CaseOutcome',
    'Insight', 'KnowledgeFeedback', 'AgentSpec', 'ReasoningMode', 'JudgmentContext',
    'PlannerConfig', 'TrainerConfig', 'TrainingPair', 'ReflectionReport', 'Experience',
    'ErrorSuccessPair', 'TrainingReport', 'StrategySpec', 'EvalReport', 'CostLedger',
    'build_outcome',

    # Validation
    'ValidationResult', 'CaseValidator', 'validate_case', 'validate_corpus', 'has_if_then',

    # Config
    'Settings', 'load_settings', 'get_settings',

    # Exceptions
    'ReasonerError', 'DataError', 'BackendError',
]
