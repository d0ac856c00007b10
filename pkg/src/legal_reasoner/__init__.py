"""
Multi-agent legal rule reasoning engine.

Applies legal rules to case facts through decomposed sub-task agents, learns
reusable rule insights from trial and error, and evaluates the
confusing-charge prediction task end to end.
"""

__version__ = "0.1.0"
__author__ = "Legal Reasoning Team"
