import enum


class FitStatus(str, enum.Enum):
    CONVERGED = "converged"
    FAILED = "failed"
    DEGENERATE = "degenerate"


class SweepAxis(str, enum.Enum):
    EPS_R = "eps_r"
    EPS_2Q = "eps_2q"
    ZZ = "zz"


class ReferenceMode(str, enum.Enum):
    """Where the reference decay rate for interleaved extraction comes from"""
    ANALYTIC = "analytic"
    SIMULATED = "simulated"
    NONE = "none"
