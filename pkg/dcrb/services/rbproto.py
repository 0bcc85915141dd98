"""
Single-qubit Clifford machinery, the dynamic circuit blocks, dynamical
decoupling and RB sequence construction.
"""
import math
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from dcrb.exceptions import ConfigurationError, ParameterError
from dcrb.logger import get_logger
from dcrb.models import BlockKind, DDMode
from dcrb.schemas import BlockSpec, RBConfig
from dcrb.services.circuit import (
    FF_LABEL,
    MEAS_LABEL,
    Circuit,
    ConditionalGate,
    Gate,
    Idle,
    Instruction,
    Measure,
)
from dcrb.services.noise import CoherentCoupling, Timing
from dcrb.services.qmath import CNOT, I2, H, S, X, Z

logger = get_logger(__name__)

N_CLIFFORDS = 24
_ROUND_DIGITS = 9


@dataclass(frozen=True, eq=False)
class Clifford1Q:
    index: int
    unitary: np.ndarray
    word: str

    @property
    def name(self) -> str:
        return f"C{self.index}"


def _canonical_key(unitary: np.ndarray) -> tuple:
    flat = unitary.reshape(-1)
    pivot = flat[np.argmax(np.abs(flat) > 1e-9)]
    canon = flat * (abs(pivot) / pivot)
    return tuple(np.round(canon.real, _ROUND_DIGITS)) + tuple(np.round(canon.imag, _ROUND_DIGITS))


class CliffordTable:
    """The 24 single-qubit Cliffords with precomputed composition and inverses"""

    def __init__(self):
        elements = [(np.eye(2, dtype=np.complex128), "")]
        keys = {_canonical_key(elements[0][0]): 0}
        queue = deque([0])
        while queue:
            current, word = elements[queue.popleft()]
            for gen, letter in ((H, "H"), (S, "S")):
                candidate = gen @ current
                key = _canonical_key(candidate)
                if key not in keys:
                    keys[key] = len(elements)
                    elements.append((candidate, word + letter))
                    queue.append(keys[key])
        if len(elements) != N_CLIFFORDS:
            raise RuntimeError(f"Clifford closure produced {len(elements)} elements")

        self._keys = keys
        self.unitaries = np.array([u for u, _ in elements])
        self.unitaries.setflags(write=False)
        self.words = tuple(w or "I" for _, w in elements)
        table = np.empty((N_CLIFFORDS, N_CLIFFORDS), dtype=np.int64)
        for a in range(N_CLIFFORDS):
            for b in range(N_CLIFFORDS):
                table[a, b] = self.index_of(self.unitaries[b] @ self.unitaries[a])
        self.compose_table = table
        self.inverse_table = np.array([int(np.where(table[a] == 0)[0][0]) for a in range(N_CLIFFORDS)])
        self.compose_table.setflags(write=False)
        self.inverse_table.setflags(write=False)

    def index_of(self, unitary: np.ndarray) -> int:
        try:
            return self._keys[_canonical_key(np.asarray(unitary, dtype=np.complex128))]
        except KeyError:
            raise ParameterError("Matrix is not a single-qubit Clifford") from None

    def compose(self, first: int, second: int) -> int:
        """Index of `first` followed by `second`"""
        return int(self.compose_table[first, second])

    def inverse(self, index: int) -> int:
        return int(self.inverse_table[index])

    def sequence_inverse(self, indices: Sequence[int]) -> int:
        total = 0
        for index in indices:
            total = self.compose_table[total, index]
        return self.inverse(int(total))

    def clifford(self, index: int) -> Clifford1Q:
        if not 0 <= index < N_CLIFFORDS:
            raise ParameterError(f"Clifford index {index} outside 0..{N_CLIFFORDS - 1}")
        return Clifford1Q(index, self.unitaries[index], self.words[index])

    def gate(self, index: int, qubit: int) -> Gate:
        return Gate(f"C{index}", self.unitaries[index], (qubit,))

    def __len__(self) -> int:
        return N_CLIFFORDS


def clifford_table() -> CliffordTable:
    return CliffordTable()


_clifford_table: Optional[CliffordTable] = None


def get_clifford_table() -> CliffordTable:
    """Get or create the shared Clifford table"""
    global _clifford_table
    if _clifford_table is None:
        _clifford_table = CliffordTable()
        logger.debug(f"Built Clifford table with {len(_clifford_table)} elements")
    return _clifford_table


def _x_pulses(data_qubits: Sequence[int]) -> List[Gate]:
    return [Gate("X", X, (d,), duration=0.0) for d in data_qubits]


def _echo(duration: float, targets, data_qubits) -> List[Instruction]:
    """X2 over `duration`: [d/4, X, d/2, X, d/4]"""
    return [
        Idle(duration / 4, targets, MEAS_LABEL),
        *_x_pulses(data_qubits),
        Idle(duration / 2, targets, MEAS_LABEL),
        *_x_pulses(data_qubits),
        Idle(duration / 4, targets, MEAS_LABEL),
    ]


def apply_dd(
    fragment: Circuit,
    mode: DDMode,
    timing: Timing,
    data_qubits: Optional[Sequence[int]] = None,
) -> Circuit:
    """
    Rewrite the measurement and feedforward windows of a block with X pulses on the
    data qubits. MDD echoes the measurement window and leaves the feedforward window
    bare; FFDD echoes the first tau_M - tau_FF and uses the feedforward window as the
    second arm of an echo with the remaining tau_FF of the measurement window.
    """
    mode = DDMode(mode)
    if mode is DDMode.NONE:
        return fragment
    if mode is DDMode.FFDD and not timing.tau_meas > timing.tau_ff:
        raise ConfigurationError(
            f"FFDD needs tau_M > tau_FF, got tau_M={timing.tau_meas:.3g}s, tau_FF={timing.tau_ff:.3g}s"
        )
    if data_qubits is None:
        measured = {inst.target for inst in fragment.instructions if isinstance(inst, Measure)}
        data_qubits = [q for q in range(fragment.n_qubits) if q not in measured]

    out: List[Instruction] = []
    for inst in fragment.instructions:
        if isinstance(inst, Idle) and inst.label == MEAS_LABEL:
            if mode is DDMode.MDD:
                out.extend(_echo(inst.duration, inst.targets, data_qubits))
            else:
                out.extend(_echo(inst.duration - timing.tau_ff, inst.targets, data_qubits))
                out.append(Idle(timing.tau_ff, inst.targets, MEAS_LABEL))
                out.extend(_x_pulses(data_qubits))
        elif isinstance(inst, Idle) and inst.label == FF_LABEL and mode is DDMode.FFDD:
            out.append(inst)
            out.extend(_x_pulses(data_qubits))
        else:
            out.append(inst)
    return Circuit(fragment.n_qubits, fragment.n_clbits, out)


def build_block(
    spec: BlockSpec,
    timing: Timing,
    data_qubits: Sequence[int] = (0,),
    measured_qubit: int = 1,
    clbit: int = 0,
    n_qubits: Optional[int] = None,
) -> Circuit:
    """One dynamic circuit block on the data qubits and the measured qubit, DD applied"""
    data_qubits = list(data_qubits)
    if measured_qubit in data_qubits:
        raise ConfigurationError(f"Qubit {measured_qubit} cannot be both data and measured qubit")
    n_qubits = n_qubits or max(data_qubits + [measured_qubit]) + 1
    window = tuple(sorted(data_qubits + [measured_qubit]))
    m = measured_qubit
    kind = spec.kind

    insts: List[Instruction] = []
    if kind is BlockKind.H_CNOT:
        insts.append(Gate("H", H, (m,)))
        insts.extend(Gate("CNOT", CNOT, (m, d)) for d in data_qubits)
    elif kind is BlockKind.Z_C1:
        insts.append(Gate("X", X, (m,)))
        insts.extend(Gate("Z", Z, (d,)) for d in data_qubits)
    elif kind is BlockKind.I_C1:
        insts.append(Gate("X", X, (m,)))
        insts.extend(Gate("I", I2, (d,)) for d in data_qubits)

    if kind.measures:
        insts.append(Measure(m, clbit, duration=0.0))
    insts.append(Idle(timing.tau_meas, window, MEAS_LABEL))
    insts.append(Idle(timing.tau_ff, window, FF_LABEL))

    if kind.measures:
        correction = {
            BlockKind.H_CNOT: ("X", X),
            BlockKind.Z_C0: ("Z", Z),
            BlockKind.Z_C1: ("Z", Z),
            BlockKind.I_C0: ("I", I2),
            BlockKind.I_C1: ("I", I2),
        }[kind]
        insts.append(ConditionalGate(clbit, 1, Gate("X", X, (m,))))
        insts.extend(ConditionalGate(clbit, 1, Gate(correction[0], correction[1], (d,))) for d in data_qubits)

    fragment = Circuit(n_qubits, clbit + 1, insts)
    return apply_dd(fragment, spec.dd_mode, timing, data_qubits)


def terminal_clbit(cfg: RBConfig, n_blocks: int, qubit: int) -> int:
    """Classical bit holding the final readout of `qubit`; the measured qubit comes last"""
    if qubit == cfg.measured_qubit:
        return n_blocks + len(cfg.data_qubits)
    return n_blocks + cfg.data_qubits.index(qubit)


def assemble_sequence(
    streams: np.ndarray,
    cfg: RBConfig,
    spec: Optional[BlockSpec],
    timing: Timing,
) -> Circuit:
    """
    RB sequence from explicit Clifford indices, one row per data qubit: a block after
    every k Cliffords, the per-qubit inverse, then terminal readout of every data qubit
    followed by the measured qubit. spec=None gives the reference sequence.
    """
    table = get_clifford_table()
    streams = np.asarray(streams, dtype=np.int64).reshape(len(cfg.data_qubits), -1)
    length = streams.shape[1]
    if length % cfg.k:
        raise ConfigurationError(f"Sequence length {length} is not divisible by k={cfg.k}")
    n_blocks = length // cfg.k
    n_data = len(cfg.data_qubits)
    circ_qubits = cfg.n_qubits

    block = None
    if spec is not None:
        block = build_block(spec, timing, cfg.data_qubits, cfg.measured_qubit, 0, circ_qubits)

    insts: List[Instruction] = []
    for b in range(n_blocks):
        for j in range(b * cfg.k, (b + 1) * cfg.k):
            insts.extend(table.gate(int(streams[i, j]), q) for i, q in enumerate(cfg.data_qubits))
        if block is not None:
            insts.extend(_with_clbit(inst, b) for inst in block.instructions)
    for i, q in enumerate(cfg.data_qubits):
        insts.append(table.gate(table.sequence_inverse(streams[i]), q))
    for q in cfg.data_qubits:
        insts.append(Measure(q, terminal_clbit(cfg, n_blocks, q)))
    insts.append(Measure(cfg.measured_qubit, terminal_clbit(cfg, n_blocks, cfg.measured_qubit)))
    return Circuit(circ_qubits, n_blocks + n_data + 1, insts)


def _with_clbit(inst: Instruction, clbit: int) -> Instruction:
    if isinstance(inst, Measure):
        return Measure(inst.target, clbit, inst.duration)
    if isinstance(inst, ConditionalGate):
        return ConditionalGate(clbit, inst.value, inst.gate)
    return inst


def sequence_streams(cfg: RBConfig, length: int, seed: Union[int, np.random.SeedSequence, None]) -> np.ndarray:
    """Clifford indices, one row per data qubit"""
    if length < 0 or length % cfg.k:
        raise ConfigurationError(f"Sequence length {length} is not a non-negative multiple of k={cfg.k}")
    rng = np.random.default_rng(seed)
    return rng.integers(0, N_CLIFFORDS, size=(len(cfg.data_qubits), length))


def build_sequence(
    cfg: RBConfig,
    spec: Optional[BlockSpec],
    length: int,
    seed: Union[int, np.random.SeedSequence, None],
    timing: Optional[Timing] = None,
) -> Circuit:
    """Random interleaved RB sequence of `length` Cliffords; deterministic given seed"""
    return assemble_sequence(sequence_streams(cfg, length, seed), cfg, spec, timing or Timing())


def pair_config(cfg: RBConfig) -> RBConfig:
    """Same protocol on one (data, measured) pair laid out as qubits (0, 1)"""
    return cfg.model_copy(update={"data_qubits": [0], "measured_qubit": 1})


def pair_sequence(
    streams: np.ndarray,
    cfg: RBConfig,
    spec: Optional[BlockSpec],
    timing: Timing,
    data_qubit: int,
) -> Circuit:
    """
    The sequence seen by one data qubit and the measured qubit. Gates between the
    measured qubit and other data qubits are controlled on the measured qubit and
    leave its Z statistics unchanged, so they are left out.
    """
    row = cfg.data_qubits.index(data_qubit)
    streams = np.asarray(streams).reshape(len(cfg.data_qubits), -1)
    return assemble_sequence(streams[row:row + 1], pair_config(cfg), spec, timing)


def residual_phase(
    fragment: Circuit,
    coupling: CoherentCoupling,
    data_qubit: int,
    measured_qubit: int,
    measured_excited: bool,
    timing: Optional[Timing] = None,
) -> float:
    """
    Relative phase (radians) the data qubit accumulates over the idle windows and
    unconditional X pulses of a fragment, with the measured qubit frozen in |0> or
    |1>. The net operation is diag(1, exp(-i phase)) up to a global phase.
    """
    frequency = coupling.detuning_of(data_qubit)
    if measured_excited:
        frequency += 2 * coupling.zz_between(data_qubit, measured_qubit)
    sign = 1
    phase = 0.0
    for inst in fragment.instructions:
        if isinstance(inst, Idle) and data_qubit in inst.targets:
            coupled = measured_qubit in inst.targets
            rate = frequency if coupled else coupling.detuning_of(data_qubit)
            phase += sign * 2 * math.pi * rate * inst.duration
        elif isinstance(inst, Gate) and inst.targets == (data_qubit,) and inst.name == "X":
            sign = -sign
        elif isinstance(inst, Measure) and inst.duration is None and timing is not None:
            phase += sign * 2 * math.pi * frequency * timing.tau_meas
    if sign < 0:
        raise ParameterError("Fragment applies an odd number of X pulses to the data qubit")
    return phase
