"""Simulation laboratory for wormhole-inspired teleportation on kicked-Ising circuits."""

from .bkp import BKP_STAR, BkpParams, WitConfig, bkp_star, build_wit
from .circuit import Circuit, Gate
from .pauli import PauliString

__version__ = "0.1.0"

__all__ = ["BKP_STAR", "BkpParams", "Circuit", "Gate", "PauliString", "WitConfig", "bkp_star", "build_wit"]
