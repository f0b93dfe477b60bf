"""Objective hypernasality measure: nasality-posterior scoring of speech."""

__version__ = "0.1.0"
