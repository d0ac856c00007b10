"""Datasets, baseline strategies, the evaluation harness and reports."""

from .datasets import load_cases, planner_samples, save_cases, training_pairs
from .baselines import BaselineJudge, load_exemplars
from .harness import EvaluationHarness, build_retriever, compute_report, mode_label
from .report_manager import ReportManager

__all__ = [
    'load_cases', 'planner_samples', 'save_cases', 'training_pairs',
    'BaselineJudge', 'load_exemplars',
    'EvaluationHarness', 'build_retriever', 'compute_report', 'mode_label',
    'ReportManager',
]
