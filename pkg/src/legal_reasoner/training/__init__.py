"""Insight training."""

from .insight_drawer import InsightDrawer, build_pairs
from .experience import ExperienceGainer, PairOutcome
from .trainer import InsightTrainer

__all__ = ['InsightDrawer', 'build_pairs', 'ExperienceGainer', 'PairOutcome', 'InsightTrainer']
