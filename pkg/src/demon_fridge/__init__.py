"""Quantum-jump thermodynamics of a Maxwell refrigerator and Landauer eraser.

A single bosonic memory mode couples two reservoirs through the exchange of
energy quanta.  The package builds the Lindblad dynamics and its
discrete-time Kraus unraveling, samples quantum-jump trajectories with
their entropy ledgers, checks the fluctuation theorems exactly on small
instances, and evaluates the squeezing enhancements of the second-law
bounds.  Units: hbar = k_B = 1.
"""

from .errors import DegenerateError, DomainError, ScaleError, TruncationError, TruncationWarning
from .fock import FockSpace
from .reservoir import DerivedBath, ReservoirSpec, derive
from .config import ConfigError, ExperimentConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "FockSpace",
    "ReservoirSpec",
    "DerivedBath",
    "derive",
    "ExperimentConfig",
    "load_config",
    "ConfigError",
    "DomainError",
    "DegenerateError",
    "ScaleError",
    "TruncationError",
    "TruncationWarning",
]
