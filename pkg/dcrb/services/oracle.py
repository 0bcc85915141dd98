"""
Closed-form theory for symmetric assignment error: transfer matrices over
(measured qubit) x (data qubit), exact survival probabilities, leading-order
error predictions and interleaved extraction.

The measured qubit enters as a classical register: |j>><<i| maps the basis
projector |i><i| to |j><j|, and <<1| traces the measured qubit out.
"""
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from dcrb.exceptions import ConfigurationError, ParameterError
from dcrb.models import BlockKind
from dcrb.services.noise import IdleNoise, NoiseModel
from dcrb.services.qmath import (
    Superoperator,
    depolarizing_superop,
    partial_trace_array,
    superop_from_map,
    superop_tensor,
    vec,
)

# Clifford twirl of a single Pauli error
TWIRLED_PAULI = -1.0 / 3.0

_P0 = np.diag([1.0, 0.0]).astype(np.complex128)
_P1 = np.diag([0.0, 1.0]).astype(np.complex128)


def _check_eps(value: float, name: str = "eps_r") -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ParameterError(f"{name} must be in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class TheoryParams:
    eps_r: float = 0.0
    eps_2q: float = 0.0
    t1: float = math.inf
    t2: float = math.inf
    tau: float = 0.0

    def __post_init__(self):
        _check_eps(self.eps_r, "eps_r")
        _check_eps(self.eps_2q, "eps_2q")
        IdleNoise(self.t1, self.t2)
        if self.tau < 0:
            raise ParameterError(f"tau must be non-negative, got {self.tau}")

    @classmethod
    def from_noise_model(cls, nm: NoiseModel, data_qubit: int, measured_qubit: int) -> "TheoryParams":
        """eps_R from the measured qubit, eps_2Q = 3/4 depol_2q, tau = tau_M + tau_FF of the data qubit"""
        readout = nm.readout[measured_qubit]
        idle = nm.idle[data_qubit]
        return cls(
            eps_r=(readout.p01 + readout.p10) / 2,
            eps_2q=0.75 * nm.gates.depol_2q,
            t1=idle.t1,
            t2=idle.t2,
            tau=nm.timing.block_window,
        )


def register_map(target: int, source: int) -> Superoperator:
    """|target>><<source| on one qubit"""
    projectors = (_P0, _P1)
    return Superoperator(np.outer(vec(projectors[target]), vec(projectors[source])))


def register_reset(target: int) -> Superoperator:
    """|target>><<1|: trace out, prepare |target>"""
    projectors = (_P0, _P1)
    return Superoperator(np.outer(vec(projectors[target]), vec(np.eye(2))))


def transfer_matrix_zc(eps_r: float) -> Superoperator:
    """One Z_c0/Z_c1 block with assignment error only"""
    eps_r = _check_eps(eps_r)
    identity = Superoperator.identity(2)
    twirled = depolarizing_superop(TWIRLED_PAULI, 1)
    terms = [
        (1 - eps_r, register_map(0, 0), identity),
        (1 - eps_r, register_map(0, 1), twirled),
        (eps_r, register_map(1, 0), twirled),
        (eps_r, register_map(1, 1), identity),
    ]
    return Superoperator(sum(w * superop_tensor(reg, data).elements for w, reg, data in terms))


def _ground_input() -> np.ndarray:
    return vec(np.kron(_P0, _P0))


def _data_ground_output() -> np.ndarray:
    return vec(np.kron(np.eye(2), _P0)).real


def survival_zc(eps_r: float, depth: int) -> float:
    """<<1| (x) <<0| T^d |0>> (x) |0>>"""
    if depth < 0:
        raise ParameterError(f"depth must be non-negative, got {depth}")
    transfer = transfer_matrix_zc(eps_r).elements
    state = np.linalg.matrix_power(transfer, depth) @ _ground_input()
    return float((_data_ground_output() @ state).real)


def _trace_measured() -> np.ndarray:
    """<<1| (x) I as a 4 x 16 map"""
    return superop_from_map(lambda m: partial_trace_array(m, [1], 2), 4, 2)


def _prepare_measured_ground() -> np.ndarray:
    """|0>> (x) I as a 16 x 4 map"""
    return superop_from_map(lambda m: np.kron(_P0, m), 2, 4)


def check_nonmarkovian(eps_r: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Both sides of (<<1|(x)I) T^2 (|0>>(x)I) != [(<<1|(x)I) T (|0>>(x)I)]^2 and their
    largest absolute deviation.
    """
    transfer = transfer_matrix_zc(eps_r).elements
    trace_out = _trace_measured()
    prepare = _prepare_measured_ground()
    lhs = trace_out @ transfer @ transfer @ prepare
    one_block = trace_out @ transfer @ prepare
    rhs = one_block @ one_block
    return lhs, rhs, float(np.max(np.abs(lhs - rhs)))


def nonmarkovian_deviation(eps_r: float) -> float:
    """Closed form of the check_nonmarkovian deviation: (4/9) eps |1 - 2 eps|"""
    eps_r = _check_eps(eps_r)
    return 4.0 / 9.0 * eps_r * abs(1 - 2 * eps_r)


def transfer_matrix_hcnot(eps_r: float) -> Tuple[Superoperator, Superoperator]:
    """One H_CNOT block with assignment error only, and its effective data-qubit channel"""
    eps_r = _check_eps(eps_r)
    identity = Superoperator.identity(2)
    twirled = depolarizing_superop(TWIRLED_PAULI, 1)
    full = Superoperator(
        (1 - eps_r) * superop_tensor(register_reset(0), identity).elements
        + eps_r * superop_tensor(register_reset(1), twirled).elements
    )
    prepare_mixed = superop_from_map(lambda m: np.kron(np.eye(2) / 2, m), 2, 4)
    effective = Superoperator(_trace_measured() @ full.elements @ prepare_mixed)
    return full, effective


def survival_hcnot(eps_r: float, depth: int) -> float:
    """1/2 + 1/2 (1 - 4 eps/3)^d"""
    if depth < 0:
        raise ParameterError(f"depth must be non-negative, got {depth}")
    eps_r = _check_eps(eps_r)
    return 0.5 + 0.5 * (1 - 4 * eps_r / 3) ** depth


def idle_error(t1: float, t2: float, tau: float) -> float:
    """(2/3)(3/4 - exp(-tau/t1)/4 - exp(-tau/t2)/2)"""
    if tau < 0:
        raise ParameterError(f"tau must be non-negative, got {tau}")
    return (2.0 / 3.0) * (0.75 - math.exp(-tau / t1) / 4 - math.exp(-tau / t2) / 2)


def predicted_error(kind: Union[BlockKind, str], params: TheoryParams) -> float:
    """Leading-order error per block, combining the independent error terms multiplicatively"""
    try:
        kind = BlockKind(kind)
    except ValueError:
        raise ConfigurationError(f"Unknown block kind {kind!r}") from None
    eps_tau = idle_error(params.t1, params.t2, params.tau)
    if kind in (BlockKind.DELAY, BlockKind.I_C0, BlockKind.I_C1):
        return eps_tau
    if kind in (BlockKind.Z_C0, BlockKind.Z_C1):
        return 1 - (1 - 4 * params.eps_r / 9) * (1 - eps_tau)
    return 1 - (1 - 2 * params.eps_r / 3) * (1 - eps_tau) * (1 - 2 * params.eps_2q / 3)


def raw_epsilon(alpha: float) -> float:
    return (1 - alpha) / 2


def interleaved_epsilon(alpha_f: float, alpha_ref: float) -> float:
    if alpha_ref <= 0 or alpha_ref > 1:
        raise ParameterError(f"alpha_ref must be in (0, 1], got {alpha_ref}")
    return (1 - alpha_f / alpha_ref) / 2


def reference_alpha(eps_g: float, k: int) -> float:
    """Decay per k Cliffords of average gate error eps_g each: (1 - 2 eps_g)^k"""
    _check_eps(eps_g, "eps_g")
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    return (1 - 2 * eps_g) ** k
