from typing import List

from pydantic import BaseModel, ConfigDict, Field, model_validator

from dcrb.exceptions import ConfigurationError
from dcrb.models import BlockKind, DDMode

DEFAULT_LENGTHS = [0, 25, 50, 100, 150, 200, 300]


class BlockSpec(BaseModel):
    kind: BlockKind = Field(description="Dynamic circuit block interleaved every k Cliffords")
    dd_mode: DDMode = Field(default=DDMode.NONE, description="Dynamical decoupling schedule")
    connected: bool = Field(default=True, description="Data and measured qubits share a coupler")

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={"example": {"kind": "h_cnot", "dd_mode": "ffdd", "connected": True}},
    )

    @model_validator(mode="after")
    def cnot_needs_coupler(self) -> "BlockSpec":
        if self.kind is BlockKind.H_CNOT and not self.connected:
            raise ConfigurationError("h_cnot needs the data and measured qubits to be connected")
        return self

    @property
    def label(self) -> str:
        return f"{self.kind.value}/{self.dd_mode.value}"


class RBConfig(BaseModel):
    lengths: List[int] = Field(default_factory=lambda: list(DEFAULT_LENGTHS), description="Clifford counts l")
    k: int = Field(default=5, ge=1, description="Cliffords per block")
    seeds: int = Field(default=20, ge=1, description="Random sequences per length (m)")
    shots: int = Field(default=300, ge=1, description="Shots per sequence")
    data_qubits: List[int] = Field(default_factory=lambda: [0], min_length=1)
    measured_qubit: int = Field(default=1, ge=0)

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "lengths": [0, 25, 50, 100, 150, 200, 300],
                "k": 5,
                "seeds": 20,
                "shots": 300,
                "data_qubits": [0],
                "measured_qubit": 1,
            }
        },
    )

    @model_validator(mode="after")
    def check_layout(self) -> "RBConfig":
        if not self.lengths:
            raise ConfigurationError("At least one sequence length is required")
        for length in self.lengths:
            if length < 0:
                raise ConfigurationError(f"Sequence length {length} is negative")
            if length % self.k:
                raise ConfigurationError(f"Sequence length {length} is not divisible by k={self.k}")
        if len(set(self.lengths)) != len(self.lengths):
            raise ConfigurationError("Sequence lengths must be distinct")
        if any(q < 0 for q in self.data_qubits):
            raise ConfigurationError("Qubit indices must be non-negative")
        if len(set(self.data_qubits)) != len(self.data_qubits):
            raise ConfigurationError("Data qubits must be distinct")
        if self.measured_qubit in self.data_qubits:
            raise ConfigurationError(f"Qubit {self.measured_qubit} cannot be both data and measured qubit")
        return self

    @property
    def n_qubits(self) -> int:
        return max(self.data_qubits + [self.measured_qubit]) + 1

    @property
    def block_counts(self) -> List[int]:
        """x-axis of the decay: n = l / k"""
        return [length // self.k for length in self.lengths]
