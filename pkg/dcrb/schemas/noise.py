from typing import Dict, List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

# Device medians used when the noise file leaves a field out
DEFAULT_T1 = 208e-6
DEFAULT_T2 = 97e-6
DEFAULT_EPS_R = 2.2e-2
DEFAULT_EPS_1Q = 2.4e-4
DEFAULT_EPS_2Q = 9.7e-3

PerQubitProbability = Union[float, List[float]]
PerQubitTime = Union[Optional[float], List[Optional[float]]]


def _check_probability(value: float, name: str) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must be in [0, 1], got {value}")


class NoiseConfig(BaseModel):
    """
    Noise file contents. Per-qubit fields take a scalar (every qubit) or a list
    (one entry per qubit index). t1/t2 are seconds, null meaning infinite.
    """

    t1: PerQubitTime = Field(default=DEFAULT_T1, description="Energy relaxation time in seconds")
    t2: PerQubitTime = Field(default=DEFAULT_T2, description="Coherence time in seconds")
    p01: PerQubitProbability = Field(default=DEFAULT_EPS_R, description="P(report 1 | state 0)")
    p10: PerQubitProbability = Field(default=DEFAULT_EPS_R, description="P(report 0 | state 1)")
    qnd_flip: PerQubitProbability = Field(default=0.0, description="Post-measurement flip probability")
    detuning_hz: Union[float, List[float]] = Field(default=0.0, description="Residual detuning in Hz")
    zz_hz: Union[float, Dict[str, float]] = Field(
        default=0.0, description="ZZ coupling in Hz, scalar for every pair or {'i-j': Hz}"
    )
    meas_phase_rad: Union[float, List[float]] = Field(
        default=0.0, description="Z phase picked up by each non-measured qubit per measurement"
    )
    depol_1q: float = Field(default=2 * DEFAULT_EPS_1Q, ge=0.0, le=1.0)
    depol_2q: float = Field(default=4 * DEFAULT_EPS_2Q / 3, ge=0.0, le=1.0)
    tau_1q_ns: float = Field(default=60.0, ge=0.0)
    tau_2q_ns: float = Field(default=660.0, ge=0.0)
    tau_meas_ns: float = Field(default=1512.0, ge=0.0)
    tau_ff_ns: float = Field(default=1060.0, ge=0.0)

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "t1": 250e-6,
                "t2": 250e-6,
                "p01": [0.0, 0.02],
                "p10": [0.0, 0.02],
                "qnd_flip": 0.0,
                "detuning_hz": 10000.0,
                "zz_hz": {"0-1": -50000.0},
                "meas_phase_rad": 0.0,
                "depol_1q": 5e-4,
                "depol_2q": 0.01,
                "tau_1q_ns": 60,
                "tau_2q_ns": 660,
                "tau_meas_ns": 1400,
                "tau_ff_ns": 600,
            }
        },
    )

    @field_validator("p01", "p10", "qnd_flip")
    @classmethod
    def probabilities_in_range(cls, value, info):
        for item in value if isinstance(value, list) else [value]:
            _check_probability(item, info.field_name)
        return value

    @field_validator("t1", "t2")
    @classmethod
    def times_positive(cls, value, info):
        for item in value if isinstance(value, list) else [value]:
            if item is not None and item <= 0:
                raise ValueError(f"{info.field_name} must be positive (null means infinite), got {item}")
        return value

    @field_validator("zz_hz")
    @classmethod
    def pair_keys_valid(cls, value):
        if isinstance(value, dict):
            for key in value:
                parse_pair_key(key)
        return value

    def per_qubit(self, name: str, n_qubits: int) -> list:
        """Broadcast a per-qubit field to exactly n_qubits entries"""
        value = getattr(self, name)
        if isinstance(value, list):
            if len(value) != n_qubits:
                raise ValueError(f"{name} lists {len(value)} values for {n_qubits} qubit(s)")
            return list(value)
        return [value] * n_qubits


def parse_pair_key(key: str) -> tuple:
    parts = key.split("-")
    if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
        raise ValueError(f"zz_hz keys must look like 'i-j', got {key!r}")
    i, j = (int(p) for p in parts)
    if i == j:
        raise ValueError(f"zz_hz key {key!r} couples a qubit to itself")
    return (min(i, j), max(i, j))


def format_pair_key(pair: Sequence[int]) -> str:
    i, j = sorted(pair)
    return f"{i}-{j}"
