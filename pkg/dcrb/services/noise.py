"""
Error-model parameters and their conversion into channels and unitaries.

Frequencies are ordinary Hz and turned into phases as 2*pi*f*t. Times are
seconds; an infinite t1/t2 switches the corresponding decay off.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from dcrb.exceptions import ConfigurationError, ParameterError
from dcrb.logger import get_logger
from dcrb.schemas import NoiseConfig, parse_pair_key
from dcrb.services.qmath import (
    X,
    DensityMatrix,
    KrausChannel,
    amplitude_damping_kraus,
    depolarizing_kraus,
    embed_operator,
    phase_damping_kraus,
)

logger = get_logger(__name__)

NS = 1e-9
RELATIVE_TOL = 1e-12


def _check_probability(value: float, name: str) -> None:
    if not (0.0 <= value <= 1.0):
        raise ParameterError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class ReadoutError:
    p01: float = 0.0
    p10: float = 0.0
    qnd_flip: float = 0.0

    def __post_init__(self):
        _check_probability(self.p01, "p01")
        _check_probability(self.p10, "p10")
        _check_probability(self.qnd_flip, "qnd_flip")

    @classmethod
    def symmetric(cls, eps_r: float, qnd_flip: float = 0.0) -> "ReadoutError":
        return cls(p01=eps_r, p10=eps_r, qnd_flip=qnd_flip)

    def report_probability(self, reported: int, true: int) -> float:
        """P(reported | true)"""
        flip = self.p01 if true == 0 else self.p10
        return flip if reported != true else 1.0 - flip


@dataclass(frozen=True)
class IdleNoise:
    t1: float = math.inf
    t2: float = math.inf

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ParameterError(f"t1 and t2 must be positive, got t1={self.t1}, t2={self.t2}")
        if self.t2 > 2 * self.t1 * (1 + RELATIVE_TOL):
            raise ParameterError(f"t2={self.t2} exceeds 2*t1={2 * self.t1}")


@dataclass(frozen=True)
class CoherentCoupling:
    detuning: Tuple[float, ...] = ()
    zz: Dict[Tuple[int, int], float] = field(default_factory=dict)
    meas_induced_phase: Tuple[float, ...] = ()

    def __post_init__(self):
        values = list(self.detuning) + list(self.zz.values()) + list(self.meas_induced_phase)
        if not all(math.isfinite(v) for v in values):
            raise ParameterError("Coherent coupling parameters must be finite")
        for i, j in self.zz:
            if i >= j:
                raise ParameterError(f"zz pairs are stored as (i, j) with i < j, got ({i}, {j})")

    def zz_between(self, i: int, j: int) -> float:
        return self.zz.get((min(i, j), max(i, j)), 0.0)

    def detuning_of(self, qubit: int) -> float:
        return self.detuning[qubit] if qubit < len(self.detuning) else 0.0

    def phase_of(self, qubit: int) -> float:
        return self.meas_induced_phase[qubit] if qubit < len(self.meas_induced_phase) else 0.0


@dataclass(frozen=True)
class GateNoise:
    depol_1q: float = 0.0
    depol_2q: float = 0.0

    def __post_init__(self):
        _check_probability(self.depol_1q, "depol_1q")
        _check_probability(self.depol_2q, "depol_2q")

    def probability(self, n_targets: int) -> float:
        return self.depol_1q if n_targets == 1 else self.depol_2q


@dataclass(frozen=True)
class Timing:
    tau_1q: float = 60 * NS
    tau_2q: float = 660 * NS
    tau_meas: float = 1512 * NS
    tau_ff: float = 1060 * NS

    def __post_init__(self):
        for name in ("tau_1q", "tau_2q", "tau_meas", "tau_ff"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")

    @classmethod
    def from_ns(cls, tau_1q: float, tau_2q: float, tau_meas: float, tau_ff: float) -> "Timing":
        return cls(tau_1q * NS, tau_2q * NS, tau_meas * NS, tau_ff * NS)

    @property
    def block_window(self) -> float:
        """Idle time of one measurement block: tau_M + tau_FF"""
        return self.tau_meas + self.tau_ff


@dataclass(frozen=True)
class NoiseModel:
    n_qubits: int
    readout: Tuple[ReadoutError, ...]
    idle: Tuple[IdleNoise, ...]
    coupling: CoherentCoupling
    gates: GateNoise
    timing: Timing

    def __post_init__(self):
        if len(self.readout) != self.n_qubits or len(self.idle) != self.n_qubits:
            raise ParameterError(
                f"Noise model declares {self.n_qubits} qubit(s) but has {len(self.readout)} readout "
                f"and {len(self.idle)} idle entries"
            )
        for name in ("detuning", "meas_induced_phase"):
            values = getattr(self.coupling, name)
            if values and len(values) != self.n_qubits:
                raise ParameterError(f"{name} has {len(values)} entries for {self.n_qubits} qubit(s)")
        for i, j in self.coupling.zz:
            if j >= self.n_qubits:
                raise ParameterError(f"zz pair ({i}, {j}) outside {self.n_qubits} qubit(s)")

    @classmethod
    def ideal(cls, n_qubits: int, timing: Optional[Timing] = None) -> "NoiseModel":
        return cls(
            n_qubits=n_qubits,
            readout=tuple(ReadoutError() for _ in range(n_qubits)),
            idle=tuple(IdleNoise() for _ in range(n_qubits)),
            coupling=CoherentCoupling(),
            gates=GateNoise(),
            timing=timing or Timing(),
        )

    @classmethod
    def from_config(cls, config: NoiseConfig, n_qubits: int) -> "NoiseModel":
        try:
            t1 = config.per_qubit("t1", n_qubits)
            t2 = config.per_qubit("t2", n_qubits)
            p01 = config.per_qubit("p01", n_qubits)
            p10 = config.per_qubit("p10", n_qubits)
            qnd = config.per_qubit("qnd_flip", n_qubits)
            detuning = config.per_qubit("detuning_hz", n_qubits)
            phases = config.per_qubit("meas_phase_rad", n_qubits)
            if isinstance(config.zz_hz, dict):
                zz = {}
                for key, value in config.zz_hz.items():
                    pair = parse_pair_key(key)
                    if pair[1] >= n_qubits:
                        raise ValueError(f"zz_hz pair {key!r} outside {n_qubits} qubit(s)")
                    zz[pair] = float(value)
            else:
                zz = {
                    (i, j): float(config.zz_hz)
                    for i in range(n_qubits)
                    for j in range(i + 1, n_qubits)
                    if config.zz_hz
                }
            return cls(
                n_qubits=n_qubits,
                readout=tuple(ReadoutError(a, b, c) for a, b, c in zip(p01, p10, qnd)),
                idle=tuple(
                    IdleNoise(math.inf if a is None else a, math.inf if b is None else b)
                    for a, b in zip(t1, t2)
                ),
                coupling=CoherentCoupling(
                    detuning=tuple(float(d) for d in detuning),
                    zz=zz,
                    meas_induced_phase=tuple(float(p) for p in phases),
                ),
                gates=GateNoise(config.depol_1q, config.depol_2q),
                timing=Timing.from_ns(config.tau_1q_ns, config.tau_2q_ns, config.tau_meas_ns, config.tau_ff_ns),
            )
        except (ValueError, ParameterError) as e:
            logger.error(f"Invalid noise configuration: {e}")
            raise ConfigurationError(f"Invalid noise configuration: {e}") from e

    def restrict(self, qubits: Sequence[int]) -> "NoiseModel":
        """Noise model of a subsystem, re-indexed so qubits[i] becomes qubit i"""
        qubits = list(qubits)
        if len(set(qubits)) != len(qubits) or any(q < 0 or q >= self.n_qubits for q in qubits):
            raise ParameterError(f"Invalid qubit subset {qubits} of {self.n_qubits} qubit(s)")
        local = {q: i for i, q in enumerate(qubits)}
        zz = {}
        for (i, j), value in self.coupling.zz.items():
            if i in local and j in local:
                a, b = local[i], local[j]
                zz[(min(a, b), max(a, b))] = value
        coupling = CoherentCoupling(
            detuning=tuple(self.coupling.detuning_of(q) for q in qubits),
            zz=zz,
            meas_induced_phase=tuple(self.coupling.phase_of(q) for q in qubits),
        )
        return replace(
            self,
            n_qubits=len(qubits),
            readout=tuple(self.readout[q] for q in qubits),
            idle=tuple(self.idle[q] for q in qubits),
            coupling=coupling,
        )

    def gate_channel(self, n_targets: int) -> KrausChannel:
        """Depolarizing noise that follows an ideal gate on n_targets qubits"""
        return depolarizing_kraus(1.0 - self.gates.probability(n_targets), n_targets)

    @property
    def is_ideal(self) -> bool:
        return (
            all(r == ReadoutError() for r in self.readout)
            and all(i == IdleNoise() for i in self.idle)
            and not any(self.coupling.detuning)
            and not any(self.coupling.zz.values())
            and not any(self.coupling.meas_induced_phase)
            and self.gates == GateNoise()
        )


def idle_channel(t1: float, t2: float, tau: float) -> KrausChannel:
    """Amplitude damping followed by the extra pure dephasing that brings coherences to exp(-tau/t2)"""
    if tau < 0:
        raise ParameterError(f"Idle duration must be non-negative, got {tau}")
    IdleNoise(t1, t2)
    if tau == 0 or (math.isinf(t1) and math.isinf(t2)):
        return KrausChannel.identity(1)
    gamma = 1.0 - math.exp(-tau / t1)
    # amplitude damping alone leaves coherences at exp(-tau / (2 t1))
    coherence = math.exp(-tau / t2 + tau / (2 * t1))
    coherence = min(coherence, 1.0)
    return amplitude_damping_kraus(gamma).then(phase_damping_kraus(coherence))


def coherent_idle_unitary(coupling: CoherentCoupling, qubits: Sequence[int], tau: float) -> np.ndarray:
    """
    exp(-i 2pi H tau) for H = sum_i D_i b_i + sum_{i<j} 2 Z_ij b_i b_j, where b is the
    excitation of each listed qubit. The result acts on the listed qubits in order.
    """
    if tau < 0:
        raise ParameterError(f"Idle duration must be non-negative, got {tau}")
    qubits = list(qubits)
    n = len(qubits)
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    energy = bits @ np.array([coupling.detuning_of(q) for q in qubits], dtype=float)
    for a in range(n):
        for b in range(a + 1, n):
            zeta = coupling.zz_between(qubits[a], qubits[b])
            if zeta:
                energy = energy + 2 * zeta * bits[:, a] * bits[:, b]
    return np.diag(np.exp(-2j * np.pi * energy * tau))


def phase_rotation(phi: float) -> np.ndarray:
    """diag(1, exp(-i phi))"""
    return np.diag([1.0, np.exp(-1j * phi)]).astype(np.complex128)


def resolve_outcome(
    p_one: Union[float, np.ndarray],
    u_outcome: Union[float, np.ndarray],
    u_flip: Union[float, np.ndarray],
    err: ReadoutError,
):
    """
    Turn two uniform draws into (true outcome, reported bit). Works elementwise on
    arrays so a batch of shots resolves with the same arithmetic as one shot.
    """
    true = np.asarray(u_outcome < p_one, dtype=np.int8)
    flip_probability = np.where(true == 1, err.p10, err.p01)
    reported = true ^ np.asarray(u_flip < flip_probability, dtype=np.int8)
    return true, reported


def sample_measurement(
    rho: DensityMatrix, target: int, err: ReadoutError, rng: np.random.Generator
) -> Tuple[int, DensityMatrix]:
    """Born-sample `target`, report it through the assignment error, return (reported, post-state)"""
    n = rho.n_qubits
    if target < 0 or target >= n:
        raise ParameterError(f"Measurement target {target} outside {n} qubit(s)")
    project_one = embed_operator(np.diag([0.0, 1.0]), [target], n)
    p_one = float(np.clip(np.real(np.trace(project_one @ rho.elements)), 0.0, 1.0))
    u_outcome, u_flip = rng.random(), rng.random()
    true, reported = resolve_outcome(p_one, u_outcome, u_flip, err)
    true, reported = int(true), int(reported)

    projector = project_one if true else np.eye(2**n) - project_one
    weight = p_one if true else 1.0 - p_one
    post = projector @ rho.elements @ projector / weight
    if err.qnd_flip:
        flip = embed_operator(X, [target], n)
        post = (1 - err.qnd_flip) * post + err.qnd_flip * flip @ post @ flip
    return reported, DensityMatrix((post + post.conj().T) / 2)
