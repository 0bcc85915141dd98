from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from dcrb.models import BlockKind, DDMode, FitStatus

MEAN_TOL = 1e-9


class DecayCurve(BaseModel):
    """Survival probability of one data qubit against the number of blocks"""

    qubit: int = Field(ge=0)
    measured_qubit: int = Field(ge=0)
    block_counts: List[int]
    means: List[float]
    stderrs: List[float]
    block: Optional[BlockKind] = Field(default=None, description="None for the reference sequence")
    dd_mode: DDMode = DDMode.NONE
    seeds: int = Field(ge=1)
    shots: int = Field(ge=1)
    exact: bool = False
    measured_p0: List[float] = Field(
        default_factory=list, description="Terminal P(report 0) of the measured qubit per depth"
    )
    measured_flip_rate: List[float] = Field(
        default_factory=list, description="Mean mid-circuit report-1 frequency per depth"
    )

    @model_validator(mode="after")
    def consistent(self) -> "DecayCurve":
        n = len(self.block_counts)
        if len(self.means) != n or len(self.stderrs) != n:
            raise ValueError("block_counts, means and stderrs must have equal lengths")
        for extra in (self.measured_p0, self.measured_flip_rate):
            if extra and len(extra) != n:
                raise ValueError("measured-qubit diagnostics must have one entry per depth")
        if any(m < -MEAN_TOL or m > 1 + MEAN_TOL for m in self.means):
            raise ValueError("means must lie in [0, 1]")
        if any(s < 0 for s in self.stderrs):
            raise ValueError("stderrs must be non-negative")
        return self

    @property
    def total_shots(self) -> int:
        return self.seeds * self.shots

    @property
    def label(self) -> str:
        block = self.block.value if self.block else "reference"
        return f"{block}/{self.dd_mode.value} q{self.qubit}"


class FitResult(BaseModel):
    """P(0) = A * alpha**n + B fitted to a DecayCurve"""

    A: float
    B: float
    alpha: float
    A_stderr: float = 0.0
    B_stderr: float = 0.0
    alpha_stderr: float
    epsilon: float
    epsilon_stderr: float
    status: FitStatus
    residual_norm: float = Field(ge=0.0, description="sqrt of the weighted residual sum of squares")
    n_points: int = Field(ge=0)
    fixed_b: Optional[float] = None
    message: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.status is FitStatus.CONVERGED


class EpsilonEstimate(BaseModel):
    value: float
    stderr: float
    interleaved: bool = False
    alpha_ref: Optional[float] = None


class FitRecord(BaseModel):
    """One line of fits.json"""

    block: str
    dd: DDMode
    data_qubit: int
    measured_qubit: int
    A: Optional[float]
    B: Optional[float]
    alpha: Optional[float] = Field(description="None when the fit did not converge")
    alpha_err: Optional[float]
    epsilon: Optional[float]
    epsilon_err: Optional[float]
    converged: bool
    status: FitStatus
    alpha_ref: Optional[float] = None
    epsilon_interleaved: Optional[float] = None
    epsilon_interleaved_err: Optional[float] = None
    epsilon_predicted: Optional[float] = None

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "block": "z_c0",
                "dd": "none",
                "data_qubit": 0,
                "measured_qubit": 1,
                "A": 0.49,
                "B": 0.5,
                "alpha": 0.9822,
                "alpha_err": 0.0004,
                "epsilon": 0.0089,
                "epsilon_err": 0.0002,
                "converged": True,
                "status": "converged",
            }
        }
    )


class Provenance(BaseModel):
    """Everything needed to reproduce an output file"""

    command: str
    master_seed: int
    noise: Dict[str, Any]
    rb: Optional[Dict[str, Any]] = None
    blocks: List[str] = Field(default_factory=list)
    options: Dict[str, Any] = Field(default_factory=dict)
    version: str


class SweepRow(BaseModel):
    axis: str
    value: float
    block: str
    dd: DDMode
    data_qubit: int
    epsilon: Optional[float]
    epsilon_err: Optional[float]
    status: FitStatus
    epsilon_predicted: Optional[float]


class FitsFile(BaseModel):
    """Contents of fits.json"""

    provenance: Provenance
    fits: List[FitRecord]
