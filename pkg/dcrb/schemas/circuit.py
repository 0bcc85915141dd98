from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

InstructionKind = Literal["gate", "idle", "measure", "conditional", "barrier"]


class InstructionRecord(BaseModel):
    """One line of a circuit dump"""

    kind: InstructionKind
    targets: List[int] = Field(default_factory=list)
    name: Optional[str] = None
    matrix: Optional[List[List[Tuple[float, float]]]] = Field(
        default=None, description="Gate unitary, each entry as [re, im]"
    )
    duration: Optional[float] = Field(default=None, description="Seconds; null means the timing default")
    clbit: Optional[int] = None
    value: Optional[int] = None
    label: Optional[str] = None

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "kind": "conditional",
                "targets": [0],
                "name": "Z",
                "matrix": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]],
                "clbit": 3,
                "value": 1,
            }
        },
    )


class CircuitHeader(BaseModel):
    """First line of a circuit dump"""

    sequence: str = Field(description="Which sequence this is, e.g. 'z_c0/none l=25 seed=3'")
    n_qubits: int = Field(ge=1)
    n_clbits: int = Field(ge=0)
    n_instructions: int = Field(ge=0)
