# License: BSD 3 clause
"""
Markov-chain channel models and receiver simulation for DNA-based
molecular communication with microarray reception.

:organization: DMCL developers
"""

from dmcl.version import __version__

__all__ = ["__version__"]
