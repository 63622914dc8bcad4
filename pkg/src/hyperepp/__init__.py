"""Exact simulation of deterministic entanglement purification and nonlocal
Bell-state analysis with polarization-frequency-spatial hyperentangled photon pairs."""

from .epp import NoiseModel, PurificationReport, run_epp
from .statecore import DensityMatrix

__all__ = ["DensityMatrix", "NoiseModel", "PurificationReport", "run_epp"]
__version__ = "0.1.0"
