from .noise import NoiseConfig, parse_pair_key, format_pair_key
from .experiment import BlockSpec, RBConfig, DEFAULT_LENGTHS
from .circuit import InstructionRecord, CircuitHeader
from .results import (
    DecayCurve,
    FitResult,
    EpsilonEstimate,
    FitRecord,
    Provenance,
    SweepRow,
    FitsFile,
)

__all__ = [
    # Noise
    "NoiseConfig",
    "parse_pair_key",
    "format_pair_key",
    # Experiment
    "BlockSpec",
    "RBConfig",
    "DEFAULT_LENGTHS",
    # Circuit
    "InstructionRecord",
    "CircuitHeader",
    # Results
    "DecayCurve",
    "FitResult",
    "EpsilonEstimate",
    "FitRecord",
    "Provenance",
    "SweepRow",
    "FitsFile",
]
