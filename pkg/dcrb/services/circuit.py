"""
Timed circuit representation with classical bits and single-bit feedforward.

Instructions execute serially in list order. Gates carry an explicit unitary and
a symbolic name; Idle windows carry a duration and optionally a label ("meas"
for a measurement-length window, "ff" for the feedforward latency).
"""
import json
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from dcrb.exceptions import CircuitValidationError
from dcrb.schemas import CircuitHeader, InstructionRecord
from dcrb.services.noise import Timing
from dcrb.services.qmath import is_unitary

MEAS_LABEL = "meas"
FF_LABEL = "ff"


def _check_targets(targets: Tuple[int, ...]) -> None:
    if len(set(targets)) != len(targets):
        raise CircuitValidationError(f"Repeated target in {targets}")
    if any(t < 0 for t in targets):
        raise CircuitValidationError(f"Negative target in {targets}")


@dataclass(frozen=True, eq=False)
class Gate:
    name: str
    matrix: np.ndarray
    targets: Tuple[int, ...]
    duration: Optional[float] = None

    def __post_init__(self):
        targets = tuple(int(t) for t in self.targets)
        matrix = np.array(self.matrix, dtype=np.complex128)
        _check_targets(targets)
        if not targets:
            raise CircuitValidationError(f"Gate {self.name} has no targets")
        if matrix.shape != (2 ** len(targets), 2 ** len(targets)):
            raise CircuitValidationError(
                f"Gate {self.name} matrix {matrix.shape} does not fit {len(targets)} target(s)"
            )
        if not is_unitary(matrix):
            raise CircuitValidationError(f"Gate {self.name} is not unitary")
        if self.duration is not None and self.duration < 0:
            raise CircuitValidationError(f"Gate {self.name} has negative duration")
        matrix.setflags(write=False)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "matrix", matrix)

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        return (
            self.name == other.name
            and self.targets == other.targets
            and self.duration == other.duration
            and np.array_equal(self.matrix, other.matrix)
        )

    def __hash__(self):
        return hash((self.name, self.targets, self.duration))


@dataclass(frozen=True)
class Idle:
    duration: float
    targets: Tuple[int, ...]
    label: Optional[str] = None

    def __post_init__(self):
        targets = tuple(int(t) for t in self.targets)
        _check_targets(targets)
        if self.duration < 0:
            raise CircuitValidationError(f"Idle duration must be non-negative, got {self.duration}")
        object.__setattr__(self, "targets", targets)


@dataclass(frozen=True)
class Measure:
    """duration=None means a tau_M window on every qubit follows; 0 means it is spelled out explicitly"""

    target: int
    clbit: int
    duration: Optional[float] = None

    def __post_init__(self):
        if self.target < 0 or self.clbit < 0:
            raise CircuitValidationError("Measure target and clbit must be non-negative")
        if self.duration is not None and self.duration < 0:
            raise CircuitValidationError("Measure duration must be non-negative")

    @property
    def targets(self) -> Tuple[int, ...]:
        return (self.target,)


@dataclass(frozen=True)
class ConditionalGate:
    clbit: int
    value: int
    gate: Gate

    def __post_init__(self):
        if self.value not in (0, 1):
            raise CircuitValidationError(f"Condition value must be 0 or 1, got {self.value}")
        if len(self.gate.targets) != 1:
            raise CircuitValidationError("Conditional gates act on exactly one qubit")

    @property
    def targets(self) -> Tuple[int, ...]:
        return self.gate.targets


@dataclass(frozen=True)
class Barrier:
    targets: Tuple[int, ...] = ()


Instruction = Union[Gate, Idle, Measure, ConditionalGate, Barrier]


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    n_clbits: int = 0
    instructions: Tuple[Instruction, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if self.n_qubits < 1 or self.n_clbits < 0:
            raise CircuitValidationError("A circuit needs at least one qubit and a non-negative clbit count")
        written = set()
        for position, inst in enumerate(self.instructions):
            self._check_instruction(inst, position, written)

    def _check_instruction(self, inst: Instruction, position: int, written: set) -> None:
        for t in inst.targets:
            if t >= self.n_qubits:
                raise CircuitValidationError(
                    f"Instruction {position} targets qubit {t} of a {self.n_qubits}-qubit circuit"
                )
        if isinstance(inst, Measure):
            if inst.clbit >= self.n_clbits:
                raise CircuitValidationError(f"Instruction {position} writes clbit {inst.clbit} of {self.n_clbits}")
            written.add(inst.clbit)
        elif isinstance(inst, ConditionalGate):
            if inst.clbit >= self.n_clbits:
                raise CircuitValidationError(f"Instruction {position} reads clbit {inst.clbit} of {self.n_clbits}")
            if inst.clbit not in written:
                raise CircuitValidationError(
                    f"Instruction {position} is conditioned on clbit {inst.clbit}, which no earlier Measure writes"
                )

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def append(self, inst: Instruction) -> "Circuit":
        return Circuit(self.n_qubits, self.n_clbits, self.instructions + (inst,))

    def extend(self, insts: Iterable[Instruction]) -> "Circuit":
        return Circuit(self.n_qubits, self.n_clbits, self.instructions + tuple(insts))

    @property
    def measurement_count(self) -> int:
        return sum(isinstance(inst, Measure) for inst in self.instructions)


def append(circ: Circuit, inst: Instruction) -> Circuit:
    return circ.append(inst)


def validate(circ: Circuit) -> Circuit:
    """Re-run every invariant check; returns the circuit for chaining"""
    return Circuit(circ.n_qubits, circ.n_clbits, circ.instructions)


def with_feedforward_latency(circ: Circuit, timing: Timing) -> Circuit:
    """
    Insert Idle(tau_FF, all qubits, "ff") before any conditional gate whose
    measurement has not been followed by a feedforward window yet.
    """
    all_qubits = tuple(range(circ.n_qubits))
    pending = set()
    out: List[Instruction] = []
    for inst in circ.instructions:
        if isinstance(inst, Measure):
            pending.add(inst.clbit)
        elif isinstance(inst, Idle) and inst.label == FF_LABEL:
            pending.clear()
        elif isinstance(inst, ConditionalGate) and inst.clbit in pending:
            out.append(Idle(timing.tau_ff, all_qubits, FF_LABEL))
            pending.clear()
        out.append(inst)
    return Circuit(circ.n_qubits, circ.n_clbits, out)


def instruction_duration(inst: Instruction, timing: Timing) -> float:
    if isinstance(inst, Gate):
        if inst.duration is not None:
            return inst.duration
        return timing.tau_1q if len(inst.targets) == 1 else timing.tau_2q
    if isinstance(inst, Idle):
        return inst.duration
    if isinstance(inst, Measure):
        return timing.tau_meas if inst.duration is None else inst.duration
    if isinstance(inst, ConditionalGate):
        return instruction_duration(inst.gate, timing)
    return 0.0


def total_duration(circ: Circuit, timing: Timing) -> float:
    """Serial duration in seconds, feedforward latency included"""
    normalized = with_feedforward_latency(circ, timing)
    return float(sum(instruction_duration(inst, timing) for inst in normalized.instructions))


def restrict(circ: Circuit, qubits: Sequence[int]) -> Circuit:
    """
    Project onto a subset of qubits, re-indexed so qubits[i] becomes qubit i.
    Instructions on other qubits are dropped; clbit indices are kept.
    """
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits) or any(q < 0 or q >= circ.n_qubits for q in qubits):
        raise CircuitValidationError(f"Invalid qubit subset {qubits} of {circ.n_qubits} qubit(s)")
    local = {q: i for i, q in enumerate(qubits)}

    def mapped(targets):
        return tuple(local[t] for t in targets if t in local)

    out: List[Instruction] = []
    for inst in circ.instructions:
        inside = mapped(inst.targets)
        if isinstance(inst, Gate):
            if len(inside) == len(inst.targets):
                out.append(Gate(inst.name, inst.matrix, inside, inst.duration))
            elif inside:
                raise CircuitValidationError(f"Gate {inst.name} on {inst.targets} straddles the subset {qubits}")
        elif isinstance(inst, Idle):
            if inside:
                out.append(Idle(inst.duration, inside, inst.label))
        elif isinstance(inst, Measure):
            if inside:
                out.append(Measure(inside[0], inst.clbit, inst.duration))
        elif isinstance(inst, ConditionalGate):
            if inside:
                gate = inst.gate
                out.append(ConditionalGate(inst.clbit, inst.value, Gate(gate.name, gate.matrix, inside, gate.duration)))
        elif isinstance(inst, Barrier):
            if inside or not inst.targets:
                out.append(Barrier(inside))
    return Circuit(len(qubits), circ.n_clbits, out)


def _matrix_to_record(matrix: np.ndarray) -> list:
    return [[(float(z.real), float(z.imag)) for z in row] for row in matrix]


def _matrix_from_record(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)


def instruction_to_record(inst: Instruction) -> InstructionRecord:
    if isinstance(inst, Gate):
        return InstructionRecord(
            kind="gate", targets=list(inst.targets), name=inst.name,
            matrix=_matrix_to_record(inst.matrix), duration=inst.duration,
        )
    if isinstance(inst, Idle):
        return InstructionRecord(kind="idle", targets=list(inst.targets), duration=inst.duration, label=inst.label)
    if isinstance(inst, Measure):
        return InstructionRecord(kind="measure", targets=[inst.target], clbit=inst.clbit, duration=inst.duration)
    if isinstance(inst, ConditionalGate):
        gate = inst.gate
        return InstructionRecord(
            kind="conditional", targets=list(gate.targets), name=gate.name,
            matrix=_matrix_to_record(gate.matrix), duration=gate.duration,
            clbit=inst.clbit, value=inst.value,
        )
    return InstructionRecord(kind="barrier", targets=list(inst.targets))


def instruction_from_record(record: InstructionRecord) -> Instruction:
    try:
        if record.kind == "gate":
            return Gate(record.name, _matrix_from_record(record.matrix), tuple(record.targets), record.duration)
        if record.kind == "idle":
            return Idle(record.duration, tuple(record.targets), record.label)
        if record.kind == "measure":
            return Measure(record.targets[0], record.clbit, record.duration)
        if record.kind == "conditional":
            gate = Gate(record.name, _matrix_from_record(record.matrix), tuple(record.targets), record.duration)
            return ConditionalGate(record.clbit, record.value, gate)
        return Barrier(tuple(record.targets))
    except (TypeError, IndexError) as e:
        raise CircuitValidationError(f"Incomplete {record.kind} record: {e}") from e


def dump_circuit(circ: Circuit, sequence: str = "") -> List[str]:
    """JSON lines: a header, then one record per instruction"""
    header = CircuitHeader(
        sequence=sequence, n_qubits=circ.n_qubits, n_clbits=circ.n_clbits,
        n_instructions=len(circ.instructions),
    )
    lines = [header.model_dump_json()]
    lines.extend(
        instruction_to_record(inst).model_dump_json(exclude_none=True) for inst in circ.instructions
    )
    return lines


def load_circuit(lines: Sequence[str]) -> Circuit:
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise CircuitValidationError("Empty circuit dump")
    try:
        header = CircuitHeader.model_validate(json.loads(lines[0]))
        body = lines[1:1 + header.n_instructions]
        if len(body) != header.n_instructions:
            raise CircuitValidationError(
                f"Circuit dump announces {header.n_instructions} instructions but has {len(body)}"
            )
        records = [InstructionRecord.model_validate_json(line) for line in body]
    except (ValidationError, json.JSONDecodeError) as e:
        raise CircuitValidationError(f"Malformed circuit dump: {e}") from e
    return Circuit(header.n_qubits, header.n_clbits, [instruction_from_record(r) for r in records])
