"""Exact small-scale models of closed timelike curve computation.

Deutschian fixed points of stochastic kernels over execution histories,
quantum channel fixed points, and postselected coin programs.
"""

from ctclab.outcomes import Outcome, Verdict

__version__ = "0.1.0"
__all__ = ["Outcome", "Verdict", "__version__"]
