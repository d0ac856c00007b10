"""Knowledge feedback from external experts."""

from .experts import ConsoleExpert, ExpertAdapter, HttpModelExpert, ScriptedExpert, build_expert
from .oracle import FeedbackOracle

__all__ = ['ConsoleExpert', 'ExpertAdapter', 'HttpModelExpert', 'ScriptedExpert', 'build_expert', 'FeedbackOracle']
