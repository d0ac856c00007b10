"""Synthetic rule-world corpus."""

from .rule_world import ELEMENT_KEYS, RuleWorld, generate_rule_world, write_corpus

__all__ = ['ELEMENT_KEYS', 'RuleWorld', 'generate_rule_world', 'write_corpus']
