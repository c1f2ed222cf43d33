# License: BSD 3 clause
"""Shared utilities: constants, exceptions, logging and test helpers."""
