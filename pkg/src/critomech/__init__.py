"""Steady states, bifurcations, dynamics and force-noise spectra of a driven
optical ring evanescently coupled to an optomechanical toroid."""

__version__ = "0.1.0"

from .errors import (CritomechError, ContinuationStall, EigenFailure, InvalidParams,  # noqa: E402
                     NoOscillation, NonConvergence, SingularTransfer, StepUnderflow, TraceLost)
from .params import (PhysicalParams, SystemParams, load_physical, load_preset,  # noqa: E402
                     load_window, preset_names)
from .steady import (SteadyState, force_shifted_position, low_drive_position,  # noqa: E402
                     steady_state_roots)
from .stability import (Stability, StabilityClass, build_jacobian, classify_eigen,  # noqa: E402
                        classify_routh_hurwitz, classified_steady_states)

__all__ = [
    "__version__", "CritomechError", "ContinuationStall", "EigenFailure", "InvalidParams",
    "NoOscillation", "NonConvergence", "SingularTransfer", "StepUnderflow", "TraceLost",
    "PhysicalParams", "SystemParams", "load_physical", "load_preset", "load_window",
    "preset_names", "SteadyState", "force_shifted_position", "low_drive_position",
    "steady_state_roots", "Stability", "StabilityClass", "build_jacobian", "classify_eigen",
    "classify_routh_hurwitz", "classified_steady_states",
]
