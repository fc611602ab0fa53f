"""Hat-Morrey norms, the NLS deformation group and profile machinery on periodic grids."""

__version__ = "0.1.0"

from .errors import (AssumptionViolation, BandOverflowError, ConfigurationError, ExtractionError,
                     MorreyError, NumericalFailure, StallError, ValidationError)
from .grid import DyadicCube, FrequencyWindow, GridField, resample
from .spaces import (MorreySpec, default_state_space, hat_lebesgue_norm, hat_morrey_norm,
                     morrey_norm, size_function)
from .symmetry import Deformation, apply, compose, invert, orthogonality_divergence
from .evolution import SolverConfig, Trajectory, classify, evolve, strichartz_ratio
from .stationary import critical_thresholds, ground_state
from .profiles import (almost_periodicity_params, greedy_scale_decomposition, profile_decompose,
                       track_almost_periodicity)

__all__ = [
    "AssumptionViolation", "BandOverflowError", "ConfigurationError", "ExtractionError", "MorreyError",
    "NumericalFailure", "StallError", "ValidationError", "DyadicCube", "FrequencyWindow", "GridField",
    "resample", "MorreySpec", "default_state_space", "hat_lebesgue_norm", "hat_morrey_norm", "morrey_norm",
    "size_function", "Deformation", "apply", "compose", "invert", "orthogonality_divergence",
    "SolverConfig", "Trajectory", "classify", "evolve", "strichartz_ratio", "critical_thresholds",
    "ground_state", "almost_periodicity_params", "greedy_scale_decomposition", "profile_decompose",
    "track_almost_periodicity",
]
