"""Measure security issue density across sprints and turn it into team bonuses."""

__version__ = "0.1.0"
