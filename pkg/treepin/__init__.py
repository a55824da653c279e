"""
treepin
=======
Directed polymers on a disordered d-ary tree with a defect branch or subtree:
closed-form free energies and phase boundaries, exact partition functions on
seeded trees, and Monte Carlo replica estimates.
"""

__version__ = "1.0.0"
__author__ = "Your Name"

from .core.models import ModelSpec, Realization
from .core.closedform import beta_c, phi, classify_st
from .core.treesim import log_partition
from .core.montecarlo import estimate_free_energy

__all__ = ["ModelSpec", "Realization", "beta_c", "phi", "classify_st", "log_partition", "estimate_free_energy"]
