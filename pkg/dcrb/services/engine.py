"""
Circuit execution under a NoiseModel.

Circuits are compiled into steps over column-stacked density matrices:
deterministic runs of gates and idles fuse into one superoperator, measurements
and conditional gates stay separate. Three executors share the steps:

* trajectories: a batch of shots evolved together, each shot with its own random
  stream and two uniform draws per measurement (outcome, then report flip);
* branch enumeration: every reported-bit branch followed exactly, unnormalized;
* twirled survival: the Clifford-averaged RB curve built from block channels.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from dcrb.config import settings
from dcrb.exceptions import ParameterError, ResourceLimitError
from dcrb.logger import get_logger
from dcrb.models import DDMode
from dcrb.schemas import BlockSpec, DecayCurve, RBConfig
from dcrb.services.analysis import curve_from_samples
from dcrb.services.circuit import (
    Barrier,
    Circuit,
    ConditionalGate,
    Gate,
    Idle,
    Measure,
    with_feedforward_latency,
)
from dcrb.services.noise import (
    NoiseModel,
    ReadoutError,
    coherent_idle_unitary,
    idle_channel,
    phase_rotation,
    resolve_outcome,
)
from dcrb.services.qmath import (
    MAX_QUBITS,
    TRACE_TOL,
    X,
    DensityMatrix,
    Superoperator,
    embed_operator,
    unvec,
    vec,
)
from dcrb.services.rbproto import (
    build_block,
    get_clifford_table,
    pair_config,
    pair_sequence,
    sequence_streams,
    terminal_clbit,
)

logger = get_logger(__name__)

RecordKey = Tuple[int, ...]


@dataclass(frozen=True)
class SuperopStep:
    matrix: np.ndarray


@dataclass(frozen=True)
class MeasureStep:
    target: int
    clbit: int
    readout: ReadoutError
    masks: np.ndarray  # (2, d^2) projector masks for true outcome 0 and 1
    flip: Optional[np.ndarray]  # superoperator of X on the target, when qnd_flip > 0


@dataclass(frozen=True)
class ConditionalStep:
    clbit: int
    value: int
    matrix: np.ndarray


Step = Union[SuperopStep, MeasureStep, ConditionalStep]


def _kraus_superop(operators, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    full = [embed_operator(op, targets, n_qubits) for op in operators]
    return sum(np.kron(op.conj(), op) for op in full)


class CircuitCompiler:
    """Turns circuits into steps for one noise model, caching per-instruction superoperators"""

    def __init__(self, nm: NoiseModel):
        self.nm = nm
        self._cache: Dict[tuple, np.ndarray] = {}

    def gate_superop(self, gate: Gate, n_qubits: int) -> np.ndarray:
        key = ("gate", gate.name, gate.targets, gate.matrix.tobytes(), n_qubits)
        if key not in self._cache:
            unitary = embed_operator(gate.matrix, gate.targets, n_qubits)
            matrix = np.kron(unitary.conj(), unitary)
            if self.nm.gates.probability(len(gate.targets)) > 0:
                noise = self.nm.gate_channel(len(gate.targets))
                matrix = _kraus_superop(noise.operators, gate.targets, n_qubits) @ matrix
            self._cache[key] = matrix
        return self._cache[key]

    def idle_superop(self, duration: float, targets: Sequence[int], n_qubits: int) -> np.ndarray:
        targets = tuple(targets)
        key = ("idle", duration, targets, n_qubits)
        if key not in self._cache:
            coherent = coherent_idle_unitary(self.nm.coupling, targets, duration)
            unitary = embed_operator(coherent, targets, n_qubits)
            matrix = np.kron(unitary.conj(), unitary)
            for q in targets:
                idle = self.nm.idle[q]
                channel = idle_channel(idle.t1, idle.t2, duration)
                if len(channel.operators) > 1:
                    matrix = _kraus_superop(channel.operators, [q], n_qubits) @ matrix
            self._cache[key] = matrix
        return self._cache[key]

    def measurement_phase_superop(self, target: int, n_qubits: int) -> Optional[np.ndarray]:
        phases = [(q, self.nm.coupling.phase_of(q)) for q in range(n_qubits) if q != target]
        phases = [(q, phi) for q, phi in phases if phi]
        if not phases:
            return None
        unitary = np.eye(2**n_qubits, dtype=np.complex128)
        for q, phi in phases:
            unitary = embed_operator(phase_rotation(phi), [q], n_qubits) @ unitary
        return np.kron(unitary.conj(), unitary)

    def measure_step(self, inst: Measure, n_qubits: int) -> MeasureStep:
        dim = 2**n_qubits
        bit = (np.arange(dim) >> (n_qubits - 1 - inst.target)) & 1
        masks = np.stack([vec(np.outer(bit == o, bit == o).astype(float)) for o in (0, 1)])
        readout = self.nm.readout[inst.target]
        flip = None
        if readout.qnd_flip:
            full = embed_operator(X, [inst.target], n_qubits)
            flip = np.kron(full.conj(), full)
        return MeasureStep(inst.target, inst.clbit, readout, masks, flip)

    def compile(self, circ: Circuit) -> List[Step]:
        n = circ.n_qubits
        if n > MAX_QUBITS:
            raise ResourceLimitError(f"Joint simulation is limited to {MAX_QUBITS} qubits, got {n}")
        if self.nm.n_qubits < n:
            raise ParameterError(f"Noise model covers {self.nm.n_qubits} qubit(s), circuit needs {n}")
        all_qubits = tuple(range(n))
        steps: List[Step] = []
        pending: Optional[np.ndarray] = None

        def push(matrix: np.ndarray) -> None:
            nonlocal pending
            pending = matrix if pending is None else matrix @ pending

        def flush() -> None:
            nonlocal pending
            if pending is not None:
                steps.append(SuperopStep(pending))
                pending = None

        for inst in with_feedforward_latency(circ, self.nm.timing).instructions:
            if isinstance(inst, Gate):
                push(self.gate_superop(inst, n))
            elif isinstance(inst, Idle):
                if inst.duration > 0:
                    push(self.idle_superop(inst.duration, inst.targets, n))
            elif isinstance(inst, Measure):
                flush()
                steps.append(self.measure_step(inst, n))
                phase = self.measurement_phase_superop(inst.target, n)
                if phase is not None:
                    push(phase)
                window = self.nm.timing.tau_meas if inst.duration is None else inst.duration
                if window > 0:
                    push(self.idle_superop(window, all_qubits, n))
            elif isinstance(inst, ConditionalGate):
                flush()
                steps.append(ConditionalStep(inst.clbit, inst.value, self.gate_superop(inst.gate, n)))
            elif isinstance(inst, Barrier):
                continue
        flush()
        return steps


def _initial_vector(n_qubits: int, initial: Optional[DensityMatrix]) -> np.ndarray:
    if initial is None:
        v = np.zeros(4**n_qubits, dtype=np.complex128)
        v[0] = 1.0
        return v
    if initial.n_qubits != n_qubits:
        raise ParameterError(f"Initial state has {initial.n_qubits} qubit(s), circuit has {n_qubits}")
    return vec(initial.elements)


def _trace_weights(n_qubits: int) -> np.ndarray:
    return vec(np.eye(2**n_qubits)).real


@dataclass
class BatchResult:
    records: np.ndarray  # (shots, n_clbits), -1 where never written
    states: np.ndarray  # (shots, d^2) final column-stacked states

    def state(self, shot: int = 0) -> DensityMatrix:
        rho = unvec(self.states[shot])
        return DensityMatrix((rho + rho.conj().T) / 2)


def simulate_batch(
    steps: Sequence[Step],
    n_qubits: int,
    n_clbits: int,
    uniforms: np.ndarray,
    initial: Optional[DensityMatrix] = None,
    check_trace: bool = False,
) -> BatchResult:
    """Evolve len(uniforms) shots; row s of `uniforms` holds two draws per measurement for shot s"""
    shots = uniforms.shape[0]
    states = np.tile(_initial_vector(n_qubits, initial), (shots, 1))
    records = np.full((shots, n_clbits), -1, dtype=np.int8)
    trace_weights = _trace_weights(n_qubits)
    draw = 0
    for step in steps:
        if isinstance(step, SuperopStep):
            states = states @ step.matrix.T
        elif isinstance(step, MeasureStep):
            p_one = np.clip(((states * step.masks[1]) @ trace_weights).real, 0.0, 1.0)
            true, reported = resolve_outcome(p_one, uniforms[:, draw], uniforms[:, draw + 1], step.readout)
            draw += 2
            weight = np.where(true == 1, p_one, 1.0 - p_one)
            states = states * step.masks[true] / weight[:, None]
            if step.flip is not None:
                q = step.readout.qnd_flip
                states = (1 - q) * states + q * (states @ step.flip.T)
            records[:, step.clbit] = reported
        elif isinstance(step, ConditionalStep):
            selected = records[:, step.clbit] == step.value
            if selected.any():
                states[selected] = states[selected] @ step.matrix.T
        if check_trace:
            traces = (states @ trace_weights).real
            if np.any(np.abs(traces - 1.0) > TRACE_TOL):
                raise ParameterError(f"Trajectory trace drifted to {traces.min():.12g}..{traces.max():.12g}")
    return BatchResult(records, states)


def _uniforms_for(rngs: Sequence[np.random.Generator], n_measurements: int) -> np.ndarray:
    return np.stack([rng.random(2 * n_measurements) for rng in rngs]) if rngs else np.empty((0, 0))


@dataclass
class ShotResult:
    record: Tuple[int, ...]
    state: DensityMatrix

    def bit(self, clbit: int) -> int:
        return self.record[clbit]


class Simulator:
    """Executes circuits for one noise model, reusing compiled superoperators"""

    def __init__(self, nm: NoiseModel, check_trace: bool = False):
        self.nm = nm
        self.check_trace = check_trace
        self.compiler = CircuitCompiler(nm)

    def run_shots(
        self,
        circ: Circuit,
        rngs: Sequence[np.random.Generator],
        initial: Optional[DensityMatrix] = None,
    ) -> BatchResult:
        steps = self.compiler.compile(circ)
        uniforms = _uniforms_for(rngs, circ.measurement_count)
        return simulate_batch(steps, circ.n_qubits, circ.n_clbits, uniforms, initial, self.check_trace)

    def run_shot(
        self, circ: Circuit, rng: np.random.Generator, initial: Optional[DensityMatrix] = None
    ) -> ShotResult:
        batch = self.run_shots(circ, [rng], initial)
        return ShotResult(tuple(int(b) for b in batch.records[0]), batch.state(0))

    def evolve_branches(self, circ: Circuit, initial: np.ndarray) -> Dict[RecordKey, np.ndarray]:
        """
        Follow every reported-bit branch. `initial` is a column-stacked state of shape
        (d^2,) or a stack of columns (d^2, c); branch values stay unnormalized so
        their traces are the branch probabilities.
        """
        if circ.measurement_count > settings.MAX_BRANCH_MEASUREMENTS:
            raise ResourceLimitError(
                f"Branch enumeration allows {settings.MAX_BRANCH_MEASUREMENTS} measurements, "
                f"circuit has {circ.measurement_count}"
            )
        steps = self.compiler.compile(circ)
        branches: Dict[RecordKey, np.ndarray] = {(-1,) * circ.n_clbits: np.asarray(initial, dtype=np.complex128)}
        for step in steps:
            if isinstance(step, SuperopStep):
                branches = {key: step.matrix @ value for key, value in branches.items()}
            elif isinstance(step, MeasureStep):
                merged: Dict[RecordKey, np.ndarray] = {}
                for key, value in branches.items():
                    for true in (0, 1):
                        mask = step.masks[true].reshape((-1,) + (1,) * (value.ndim - 1))
                        projected = mask * value
                        if not projected.any():
                            continue
                        if step.flip is not None:
                            q = step.readout.qnd_flip
                            projected = (1 - q) * projected + q * (step.flip @ projected)
                        for reported in (0, 1):
                            weight = step.readout.report_probability(reported, true)
                            if weight == 0:
                                continue
                            new_key = key[:step.clbit] + (reported,) + key[step.clbit + 1:]
                            if new_key in merged:
                                merged[new_key] = merged[new_key] + weight * projected
                            else:
                                merged[new_key] = weight * projected
                branches = merged
            elif isinstance(step, ConditionalStep):
                branches = {
                    key: step.matrix @ value if key[step.clbit] == step.value else value
                    for key, value in branches.items()
                }
        return branches

    def enumerate_branches(self, circ: Circuit, initial: Optional[DensityMatrix] = None) -> "BranchResult":
        branches = self.evolve_branches(circ, _initial_vector(circ.n_qubits, initial))
        trace_weights = _trace_weights(circ.n_qubits)
        probabilities = {key: float((trace_weights @ value).real) for key, value in branches.items()}
        return BranchResult(circ.n_qubits, probabilities, branches)

    def block_superoperator(self, fragment: Circuit) -> "BlockChannel":
        dim2 = 4**fragment.n_qubits
        branches = self.evolve_branches(fragment, np.eye(dim2, dtype=np.complex128))
        return BlockChannel(branches)


@dataclass
class BranchResult:
    n_qubits: int
    distribution: Dict[RecordKey, float]
    branch_states: Dict[RecordKey, np.ndarray] = field(repr=False)

    @property
    def total_probability(self) -> float:
        return float(sum(self.distribution.values()))

    def p0(self, clbit: int) -> float:
        """Exact probability that `clbit` reads 0"""
        return float(sum(p for key, p in self.distribution.items() if key[clbit] == 0))

    def marginal(self, clbits: Sequence[int]) -> Dict[RecordKey, float]:
        out: Dict[RecordKey, float] = {}
        for key, p in self.distribution.items():
            sub = tuple(key[c] for c in clbits)
            out[sub] = out.get(sub, 0.0) + p
        return out

    def state(self, record: Optional[RecordKey] = None) -> DensityMatrix:
        """Post-circuit state of one branch (normalized), or the branch average"""
        if record is None:
            value = sum(self.branch_states.values())
        else:
            value = self.branch_states[record] / self.distribution[record]
        rho = unvec(value)
        return DensityMatrix((rho + rho.conj().T) / 2)


@dataclass
class BlockChannel:
    """Exact channel of a block, split by classical record"""

    branches: Dict[RecordKey, np.ndarray]

    @property
    def total(self) -> Superoperator:
        return Superoperator(sum(self.branches.values()))

    def reported(self, clbit: int, value: int) -> np.ndarray:
        return sum(m for key, m in self.branches.items() if key[clbit] == value)


def run_shot(circ: Circuit, nm: NoiseModel, rng: np.random.Generator) -> ShotResult:
    return Simulator(nm).run_shot(circ, rng)


def enumerate_branches(circ: Circuit, nm: NoiseModel, initial: Optional[DensityMatrix] = None) -> BranchResult:
    return Simulator(nm).enumerate_branches(circ, initial)


def block_superoperator(fragment: Circuit, nm: NoiseModel) -> BlockChannel:
    return Simulator(nm).block_superoperator(fragment)


def _pair_noise(nm: NoiseModel, cfg: RBConfig, data_qubit: int) -> NoiseModel:
    if nm.n_qubits < cfg.n_qubits:
        raise ParameterError(f"Noise model covers {nm.n_qubits} qubit(s), layout needs {cfg.n_qubits}")
    return nm.restrict([data_qubit, cfg.measured_qubit])


def _twirl(matrix: np.ndarray) -> np.ndarray:
    """Average of S(C^dag) M S(C) over single-qubit Cliffords C on local qubit 0 of a pair"""
    total = np.zeros_like(matrix)
    for unitary in get_clifford_table().unitaries:
        full = embed_operator(unitary, [0], 2)
        forward = np.kron(full.conj(), full)
        total += forward.conj().T @ matrix @ forward
    return total / len(get_clifford_table())


@dataclass
class TwirledCurve:
    block_counts: List[int]
    survival: List[float]
    measured_p0: List[float]
    flip_rate: List[float]


def twirled_survival(
    cfg: RBConfig,
    spec: Optional[BlockSpec],
    nm: NoiseModel,
    data_qubit: int,
    block_counts: Optional[Sequence[int]] = None,
) -> TwirledCurve:
    """
    Exact average over uniformly random Clifford sequences of the terminal readout of
    one data qubit. Each block channel is Clifford-twirled on the data qubit; every
    Clifford and the final inverse contribute one gate-noise channel.
    """
    pair_nm = _pair_noise(nm, cfg, data_qubit)
    simulator = Simulator(pair_nm)
    gate_noise = simulator.compiler.gate_superop(Gate("I", np.eye(2), (0,)), 2)
    per_block_gates = np.linalg.matrix_power(gate_noise, cfg.k)

    if spec is not None:
        fragment = build_block(spec, pair_nm.timing, [0], 1, 0, 2)
        channel = simulator.block_superoperator(fragment)
        block = _twirl(channel.total.elements)
        reported_one = _twirl(channel.reported(0, 1)) if spec.kind.measures else np.zeros_like(block)
    else:
        block = np.eye(16, dtype=np.complex128)
        reported_one = np.zeros_like(block)
    step = block @ per_block_gates
    readout = Circuit(2, 2, [Measure(0, 0), Measure(1, 1)])
    trace_weights = _trace_weights(2)

    counts = list(block_counts) if block_counts is not None else cfg.block_counts
    state = _initial_vector(2, None)
    done = 0
    flips = 0.0
    by_count = {}
    for count in sorted(set(counts)):
        while done < count:
            before = per_block_gates @ state
            flips += float((trace_weights @ (reported_one @ before)).real)
            state = step @ state
            done += 1
        result = simulator.enumerate_branches(readout, DensityMatrix(_hermitian(unvec(gate_noise @ state))))
        by_count[count] = (result.p0(0), result.p0(1), flips / count if count else 0.0)

    return TwirledCurve(
        block_counts=counts,
        survival=[by_count[c][0] for c in counts],
        measured_p0=[by_count[c][1] for c in counts],
        flip_rate=[by_count[c][2] for c in counts],
    )


def _hermitian(rho: np.ndarray) -> np.ndarray:
    return (rho + rho.conj().T) / 2


def _shot_generators(master_seed: int, key: Tuple[int, ...], shots: int) -> List[np.random.Generator]:
    return [
        np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key + (shot,)))
        for shot in range(shots)
    ]


def sequence_seed(master_seed: int, length_index: int, seed_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(length_index, seed_index))


def _simulate_task(task: tuple) -> List[Tuple[float, float, float]]:
    """Worker: one random sequence, every data-qubit pair. Returns (survival, measured P0, flip rate) per pair"""
    cfg, spec, nm, master_seed, length_index, seed_index = task
    length = cfg.lengths[length_index]
    n_blocks = length // cfg.k
    streams = sequence_streams(cfg, length, sequence_seed(master_seed, length_index, seed_index))
    local = pair_config(cfg)
    data_clbit = terminal_clbit(local, n_blocks, 0)
    measured_clbit = terminal_clbit(local, n_blocks, 1)
    out = []
    for pair_index, data_qubit in enumerate(cfg.data_qubits):
        pair = pair_sequence(streams, cfg, spec, nm.timing, data_qubit)
        simulator = Simulator(_pair_noise(nm, cfg, data_qubit))
        rngs = _shot_generators(master_seed, (length_index, seed_index, pair_index), cfg.shots)
        batch = simulator.run_shots(pair, rngs)
        records = batch.records
        survival = float(np.mean(records[:, data_clbit] == 0))
        measured_p0 = float(np.mean(records[:, measured_clbit] == 0))
        if spec is not None and spec.kind.measures and n_blocks:
            flip_rate = float(np.mean(records[:, :n_blocks] == 1))
        else:
            flip_rate = 0.0
        out.append((survival, measured_p0, flip_rate))
    return out


def run_experiment(
    cfg: RBConfig,
    spec: Optional[BlockSpec],
    nm: NoiseModel,
    master_seed: int,
    jobs: int = 1,
    exact: bool = False,
) -> List[DecayCurve]:
    """
    Decay curve per data qubit. spec=None runs reference RB on the same length grid.
    Results depend only on (cfg, spec, nm, master_seed), never on `jobs`.
    """
    if master_seed is None or master_seed < 0:
        raise ParameterError(f"Master seed must be a non-negative integer, got {master_seed}")
    label = spec.label if spec else "reference"
    for data_qubit in cfg.data_qubits:
        _pair_noise(nm, cfg, data_qubit)

    if exact:
        logger.info(f"Exact twirled curves for {label} on data qubits {cfg.data_qubits}")
        curves = []
        for data_qubit in cfg.data_qubits:
            twirled = twirled_survival(cfg, spec, nm, data_qubit)
            curves.append(DecayCurve(
                qubit=data_qubit,
                measured_qubit=cfg.measured_qubit,
                block_counts=cfg.block_counts,
                means=[min(max(p, 0.0), 1.0) for p in twirled.survival],
                stderrs=[0.0] * len(cfg.block_counts),
                block=spec.kind if spec else None,
                dd_mode=spec.dd_mode if spec else DDMode.NONE,
                seeds=cfg.seeds,
                shots=cfg.shots,
                exact=True,
                measured_p0=twirled.measured_p0,
                measured_flip_rate=twirled.flip_rate,
            ))
        return curves

    tasks = [
        (cfg, spec, nm, master_seed, length_index, seed_index)
        for length_index in range(len(cfg.lengths))
        for seed_index in range(cfg.seeds)
    ]
    logger.info(
        f"Simulating {label}: {len(cfg.lengths)} lengths x {cfg.seeds} sequences x {cfg.shots} shots "
        f"on {len(cfg.data_qubits)} pair(s), jobs={jobs}"
    )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_task, tasks))
    else:
        results = [_simulate_task(task) for task in tasks]

    # results[length_index * seeds + seed_index][pair_index] = (survival, measured P0, flip rate)
    table = np.array(results, dtype=float).reshape(len(cfg.lengths), cfg.seeds, len(cfg.data_qubits), 3)
    curves = []
    for pair_index, data_qubit in enumerate(cfg.data_qubits):
        curve = curve_from_samples(
            cfg.block_counts,
            table[:, :, pair_index, 0],
            qubit=data_qubit,
            measured_qubit=cfg.measured_qubit,
            shots=cfg.shots,
            block=spec.kind if spec else None,
            dd_mode=spec.dd_mode if spec else DDMode.NONE,
            measured_p0=[float(v) for v in table[:, :, pair_index, 1].mean(axis=1)],
            measured_flip_rate=[float(v) for v in table[:, :, pair_index, 2].mean(axis=1)],
        )
        for length, mean, stderr in zip(cfg.lengths, curve.means, curve.stderrs):
            logger.debug(f"{label} q{data_qubit} l={length}: P0={mean:.5f} +- {stderr:.5f}")
        curves.append(curve)
    return curves
