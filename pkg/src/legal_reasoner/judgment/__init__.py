"""Sub-task judgment and verdict combination."""

from .parsing import ParsedFinding, parse_finding
from .engine import JudgmentEngine, combine

__all__ = ['ParsedFinding', 'parse_finding', 'JudgmentEngine', 'combine']
