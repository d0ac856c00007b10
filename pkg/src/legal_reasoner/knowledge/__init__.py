"""Rule and rule-insight knowledge bases."""

from .rule_kb import RuleKB
from .insight_kb import InsightKB
from .transfer import InsightTransfer
from .retrieval import InsightRetriever

__all__ = ['RuleKB', 'InsightKB', 'InsightTransfer', 'InsightRetriever']
