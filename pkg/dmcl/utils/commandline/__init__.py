# License: BSD 3 clause
"""Command-line entry points of DMCL."""
