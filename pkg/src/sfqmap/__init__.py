"""T1-aware technology mapping and multiphase path balancing for SFQ logic."""
from .netlist import CostTable, GateKind, Netlist, Signal, T1Role, area
from .simcore import BACKEND

__all__ = ["BACKEND", "CostTable", "GateKind", "Netlist", "Signal", "T1Role",
           "area"]
__version__ = "0.1.0"
