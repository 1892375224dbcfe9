"""Event-based positive observer synthesis and simulation for positive systems."""

from .matcore import SingularMatrixError
from .posys import AnalysisReport, PositiveLinearSystem
from .synth import DesignReport, ObserverDesign, SynthesisError, TriggerConfig
from .etsim import (
    SimulationAbortedError,
    SimulationConfig,
    SimulationTrace,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "DesignReport",
    "ObserverDesign",
    "PositiveLinearSystem",
    "SimulationAbortedError",
    "SimulationConfig",
    "SimulationTrace",
    "SingularMatrixError",
    "SynthesisError",
    "TriggerConfig",
    "simulate",
    "__version__",
]
