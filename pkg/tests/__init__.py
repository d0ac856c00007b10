"""Test package for the legal reasoning engine."""
