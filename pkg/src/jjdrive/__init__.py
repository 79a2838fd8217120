"""Drive and decoherence modelling for microwave-driven Josephson circuits."""

from ._kernels import BACKEND
from .netlist import PHI0, Branch, CircuitNetlist, make_netlist, validate_netlist

__version__ = "0.1.0"
__all__ = ["BACKEND", "PHI0", "Branch", "CircuitNetlist", "make_netlist", "validate_netlist"]
