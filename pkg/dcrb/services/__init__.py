from .qmath import DensityMatrix, KrausChannel, Superoperator
from .circuit import Circuit, ConditionalGate, Gate, Idle, Measure, Barrier
from .noise import NoiseModel, ReadoutError, IdleNoise, CoherentCoupling, GateNoise, Timing
from .rbproto import CliffordTable, get_clifford_table, build_block, build_sequence, apply_dd
from .analysis import curve_from_samples, fit_exponential, extract_epsilon
from .oracle import TheoryParams, predicted_error, survival_zc, survival_hcnot
from .engine import Simulator, run_experiment, twirled_survival, enumerate_branches

__all__ = [
    # Linear algebra
    "DensityMatrix",
    "KrausChannel",
    "Superoperator",
    # Circuits
    "Circuit",
    "ConditionalGate",
    "Gate",
    "Idle",
    "Measure",
    "Barrier",
    # Noise
    "NoiseModel",
    "ReadoutError",
    "IdleNoise",
    "CoherentCoupling",
    "GateNoise",
    "Timing",
    # Protocol
    "CliffordTable",
    "get_clifford_table",
    "build_block",
    "build_sequence",
    "apply_dd",
    # Analysis
    "curve_from_samples",
    "fit_exponential",
    "extract_epsilon",
    # Theory
    "TheoryParams",
    "predicted_error",
    "survival_zc",
    "survival_hcnot",
    # Execution
    "Simulator",
    "run_experiment",
    "twirled_survival",
    "enumerate_branches",
]
