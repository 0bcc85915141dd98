import itertools
import math

import numpy as np
import pytest

from dcrb.config import settings
from dcrb.exceptions import ParameterError, ResourceLimitError
from dcrb.models import BlockKind, DDMode
from dcrb.schemas import BlockSpec, RBConfig
from dcrb.services.circuit import Circuit, Gate, Measure
from dcrb.services.engine import (
    Simulator,
    block_superoperator,
    enumerate_branches,
    run_experiment,
    run_shot,
    twirled_survival,
)
from dcrb.services.noise import CoherentCoupling, GateNoise, IdleNoise, NoiseModel, ReadoutError, Timing
from dcrb.services.oracle import survival_hcnot, survival_zc
from dcrb.services.qmath import H, X, DensityMatrix, partial_trace, vec
from dcrb.services.rbproto import assemble_sequence, build_block, build_sequence, terminal_clbit


def _generators(seed, shots):
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,))) for i in range(shots)]


@pytest.mark.parametrize("kind", list(BlockKind))
@pytest.mark.parametrize("dd_mode", list(DDMode))
def test_noiseless_blocks_exact(kind, dd_mode, ideal_pair, small_rb):
    """Test that every block and DD mode has unit survival without noise"""
    curves = run_experiment(small_rb, BlockSpec(kind=kind, dd_mode=dd_mode), ideal_pair, 5, exact=True)

    # Assertions
    assert len(curves) == 1
    assert all(abs(m - 1.0) < 1e-12 for m in curves[0].means)
    assert all(abs(p - 1.0) < 1e-12 for p in curves[0].measured_p0)


@pytest.mark.parametrize("kind", list(BlockKind))
def test_noiseless_blocks_trajectories(kind, ideal_pair, small_rb):
    """Test that trajectories without noise always read the data qubit as 0"""
    curve = run_experiment(small_rb, BlockSpec(kind=kind), ideal_pair, 5)[0]

    # Assertions
    assert curve.means == [1.0] * len(small_rb.lengths)
    assert curve.stderrs == [0.0] * len(small_rb.lengths)
    assert curve.exact is False


@pytest.mark.parametrize("kind", [BlockKind.Z_C0, BlockKind.Z_C1])
@pytest.mark.parametrize("eps", [0.0, 0.02, 0.1])
def test_twirled_zc_matches_transfer_matrix(kind, eps, pair_noise):
    """Test exact Z_c0/Z_c1 survival against the closed-form transfer matrix"""
    cfg = RBConfig(lengths=[0], k=5)

    curve = twirled_survival(cfg, BlockSpec(kind=kind), pair_noise(eps_r=eps), 0, block_counts=range(11))

    # Assertions
    for depth, survival in zip(curve.block_counts, curve.survival):
        assert survival == pytest.approx(survival_zc(eps, depth), abs=1e-12)


@pytest.mark.parametrize("eps", [0.0, 0.03, 0.2])
def test_twirled_hcnot_matches_closed_form(eps, pair_noise):
    """Test exact H_CNOT survival 1/2 + 1/2 (1 - 4 eps/3)^d"""
    cfg = RBConfig(lengths=[0], k=5)

    curve = twirled_survival(cfg, BlockSpec(kind=BlockKind.H_CNOT), pair_noise(eps_r=eps), 0, block_counts=range(11))

    # Assertions
    for depth, survival in zip(curve.block_counts, curve.survival):
        assert survival == pytest.approx(survival_hcnot(eps, depth), abs=1e-12)


@pytest.mark.parametrize("depth", [1, 2])
def test_sequence_average_matches_transfer_matrix(depth, pair_noise):
    """Test that averaging exact runs over every Clifford stream reproduces the transfer matrix"""
    eps = 0.05
    nm = pair_noise(eps_r=eps)
    cfg = RBConfig(lengths=[depth], k=1)
    spec = BlockSpec(kind=BlockKind.Z_C0)
    simulator = Simulator(nm)
    clbit = terminal_clbit(cfg, depth, 0)

    total = 0.0
    for stream in itertools.product(range(24), repeat=depth):
        circ = assemble_sequence(np.array([stream]), cfg, spec, nm.timing)
        total += simulator.enumerate_branches(circ).p0(clbit)

    # Assertions
    assert total / 24**depth == pytest.approx(survival_zc(eps, depth), abs=1e-12)


def test_twirled_reference_follows_gate_noise(pair_noise):
    """Test reference RB survival 1/2 + 1/2 (1 - p)^(k n + 1)"""
    p = 0.01
    cfg = RBConfig(lengths=[0], k=5)

    curve = twirled_survival(cfg, None, pair_noise(depol_1q=p), 0, block_counts=[0, 1, 2, 4])

    # Assertions
    for n, survival in zip(curve.block_counts, curve.survival):
        assert survival == pytest.approx(0.5 + 0.5 * (1 - p) ** (5 * n + 1), abs=1e-12)
    assert curve.flip_rate == [0.0] * 4


def test_twirled_measured_qubit_diagnostics(pair_noise):
    """Test the measured-qubit readout and mid-circuit report-1 rate of Z_c0"""
    eps = 0.04
    cfg = RBConfig(lengths=[0], k=5)

    curve = twirled_survival(cfg, BlockSpec(kind=BlockKind.Z_C0), pair_noise(eps_r=eps), 0, block_counts=[0, 1, 2])

    # Assertions
    assert curve.measured_p0[0] == pytest.approx(1 - eps, abs=1e-12)
    assert curve.flip_rate[0] == 0.0
    assert curve.flip_rate[1] == pytest.approx(eps, abs=1e-12)
    assert curve.flip_rate[2] == pytest.approx((eps + 2 * eps * (1 - eps)) / 2, abs=1e-12)


def test_trajectories_match_branch_enumeration(pair_noise):
    """Test that shot frequencies agree with the exact branch probability"""
    nm = pair_noise(eps_r=0.05, depol_1q=0.01, depol_2q=0.02, t1=50e-6, t2=40e-6, zz=-4e4, detuning=1e4)
    cfg = RBConfig(lengths=[10], k=5)
    circ = build_sequence(cfg, BlockSpec(kind=BlockKind.H_CNOT), 10, 8, nm.timing)
    clbit = terminal_clbit(cfg, 2, 0)
    shots = 4000

    exact = Simulator(nm).enumerate_branches(circ).p0(clbit)
    batch = Simulator(nm).run_shots(circ, _generators(99, shots))
    frequency = float(np.mean(batch.records[:, clbit] == 0))

    # Assertions
    sigma = math.sqrt(exact * (1 - exact) / shots)
    assert abs(frequency - exact) < 4 * sigma + 1e-3


def test_run_shot_matches_batch(pair_noise):
    """Test that a single shot and a batch of one consume randomness identically"""
    nm = pair_noise(eps_r=0.1, depol_1q=0.05)
    circ = build_sequence(RBConfig(lengths=[15], k=5), BlockSpec(kind=BlockKind.Z_C1), 15, 2, nm.timing)

    single = run_shot(circ, nm, np.random.default_rng(5))
    batch = Simulator(nm).run_shots(circ, [np.random.default_rng(5)])

    # Assertions
    assert single.record == tuple(int(b) for b in batch.records[0])
    assert single.state.allclose(batch.state(0), atol=1e-12)


def test_branch_probabilities_sum_to_one(pair_noise):
    """Test normalization of the exact branch distribution"""
    nm = pair_noise(eps_r=0.07, depol_2q=0.03, t1=80e-6, t2=60e-6, zz=2e4, qnd_flip=0.02)
    circ = build_sequence(RBConfig(lengths=[15], k=5), BlockSpec(kind=BlockKind.H_CNOT), 15, 4, nm.timing)

    result = enumerate_branches(circ, nm)

    # Assertions
    assert result.total_probability == pytest.approx(1.0, abs=1e-12)
    assert sum(result.marginal([0]).values()) == pytest.approx(1.0, abs=1e-12)
    assert np.trace(result.state().elements).real == pytest.approx(1.0, abs=1e-12)


def test_trace_check_passes_on_noisy_circuit(pair_noise):
    """Test that trajectories keep unit trace under every noise source"""
    nm = pair_noise(eps_r=0.05, depol_1q=0.01, depol_2q=0.02, t1=50e-6, t2=40e-6, qnd_flip=0.1, meas_phase=0.2)
    circ = build_sequence(RBConfig(lengths=[10], k=5), BlockSpec(kind=BlockKind.Z_C0, dd_mode=DDMode.FFDD), 10, 1)

    batch = Simulator(nm, check_trace=True).run_shots(circ, _generators(3, 20))

    # Assertions
    assert batch.records.shape == (20, circ.n_clbits)
    assert (batch.records >= 0).all()


def test_ideal_block_channel_is_identity_on_data(ideal_pair, rng):
    """Test that an ideal Z_c0 block leaves the data qubit untouched"""
    raw = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = raw @ raw.conj().T
    rho = rho / np.trace(rho)
    block = build_block(BlockSpec(kind=BlockKind.Z_C0), Timing())

    channel = block_superoperator(block, ideal_pair)
    out = channel.total.elements @ vec(np.kron(rho, np.diag([1.0, 0.0])))
    data = partial_trace(DensityMatrix(out.reshape(4, 4, order="F")), [0])

    # Assertions
    assert channel.total.is_trace_preserving()
    assert np.allclose(data.elements, rho, atol=1e-12)


def test_measurement_induced_phase(pair_noise):
    """Test that measuring qubit 1 rotates the coherence of qubit 0 by the configured phase"""
    phi = 0.4
    circ = Circuit(2, 1, [Gate("H", H, (0,)), Measure(1, 0, duration=0.0)])

    result = enumerate_branches(circ, pair_noise(meas_phase=phi))
    data = partial_trace(result.state(), [0])

    # Assertions
    assert np.isclose(data.elements[0, 1], 0.5 * np.exp(1j * phi), atol=1e-12)


def test_qnd_flip_after_measurement(pair_noise):
    """Test that a QND flip changes the post-state but not the report"""
    circ = Circuit(2, 1, [Measure(1, 0, duration=0.0)])

    result = enumerate_branches(circ, pair_noise(qnd_flip=1.0))

    # Assertions
    assert result.p0(0) == pytest.approx(1.0)
    assert partial_trace(result.state(), [1]).elements[1, 1].real == pytest.approx(1.0)


def test_asymmetric_readout():
    """Test that an excited measured qubit reads 0 with probability p10"""
    nm = NoiseModel(
        n_qubits=2,
        readout=(ReadoutError(), ReadoutError(p01=0.1, p10=0.3)),
        idle=(IdleNoise(), IdleNoise()),
        coupling=CoherentCoupling(),
        gates=GateNoise(),
        timing=Timing(),
    )
    circ = Circuit(2, 1, [Gate("X", X, (1,)), Measure(1, 0, duration=0.0)])

    # Assertions
    assert enumerate_branches(circ, nm).p0(0) == pytest.approx(0.3)


def test_coupling_cancels_for_excited_measured_qubit(pair_noise, exact_rb):
    """Test that I_c1 is error free at zeta = -detuning/2 while I_c0 is not"""
    nm = pair_noise(detuning=1e4, zz=-5e3)

    i_c1 = run_experiment(exact_rb, BlockSpec(kind=BlockKind.I_C1), nm, 1, exact=True)[0]
    i_c0 = run_experiment(exact_rb, BlockSpec(kind=BlockKind.I_C0), nm, 1, exact=True)[0]

    # Assertions
    assert all(abs(m - 1.0) < 1e-12 for m in i_c1.means)
    assert i_c0.means[-1] < 0.9


def test_dynamical_decoupling_suppresses_crosstalk(pair_noise, exact_rb):
    """Test that FFDD removes static ZZ entirely and MDD partially"""
    nm = pair_noise(zz=-1e4)

    survival = {
        mode: run_experiment(exact_rb, BlockSpec(kind=BlockKind.H_CNOT, dd_mode=mode), nm, 1, exact=True)[0].means[-1]
        for mode in DDMode
    }

    # Assertions
    assert survival[DDMode.FFDD] == pytest.approx(1.0, abs=1e-12)
    assert survival[DDMode.NONE] < survival[DDMode.MDD] < 1.0


def test_z_c0_is_less_sensitive_to_crosstalk_than_z_c1(pair_noise, exact_rb):
    """Test that ZZ enters Z_c0 only through readout errors"""
    spread = {}
    for kind in (BlockKind.Z_C0, BlockKind.Z_C1):
        values = [
            run_experiment(exact_rb, BlockSpec(kind=kind), pair_noise(eps_r=0.02, detuning=1e4, zz=zz), 1, exact=True)[0]
            .means[-1]
            for zz in (-4e4, -5e3, 2e4)
        ]
        spread[kind] = max(values) - min(values)

    # Assertions
    assert spread[BlockKind.Z_C0] < spread[BlockKind.Z_C1]


def test_results_do_not_depend_on_jobs(pair_noise, small_rb):
    """Test that trajectories are reproducible across runs and worker counts"""
    nm = pair_noise(eps_r=0.05, t1=100e-6, t2=100e-6, depol_1q=0.002)
    spec = BlockSpec(kind=BlockKind.Z_C0)

    first = run_experiment(small_rb, spec, nm, 17, jobs=1)
    second = run_experiment(small_rb, spec, nm, 17, jobs=1)
    parallel = run_experiment(small_rb, spec, nm, 17, jobs=2)
    other_seed = run_experiment(small_rb, spec, nm, 18, jobs=1)

    # Assertions
    assert first == second
    assert first == parallel
    assert first != other_seed


def test_several_data_qubits():
    """Test one decay curve per data qubit around a shared measured qubit"""
    cfg = RBConfig(lengths=[0, 5, 10, 20], k=5, seeds=2, shots=10, data_qubits=[0, 2], measured_qubit=1)
    nm = NoiseModel.ideal(3)
    spec = BlockSpec(kind=BlockKind.H_CNOT)

    curves = run_experiment(cfg, spec, nm, 4)
    exact = run_experiment(cfg, spec, nm, 4, exact=True)

    # Assertions
    assert [c.qubit for c in curves] == [0, 2]
    assert all(c.measured_qubit == 1 for c in curves)
    assert all(c.means == [1.0] * 4 for c in curves)
    assert all(abs(m - 1.0) < 1e-12 for c in exact for m in c.means)


def test_run_experiment_argument_checks(small_rb, ideal_pair):
    """Test that bad seeds and undersized noise models are rejected"""
    spec = BlockSpec(kind=BlockKind.Z_C0)
    three_qubits = RBConfig(lengths=[0, 5, 10, 20], k=5, data_qubits=[0, 2], measured_qubit=1)

    # Assertions
    with pytest.raises(ParameterError):
        run_experiment(small_rb, spec, ideal_pair, -1)
    with pytest.raises(ParameterError):
        run_experiment(three_qubits, spec, ideal_pair, 1)


def test_resource_limits(monkeypatch):
    """Test the qubit limit of joint simulation and the branch enumeration limit"""
    wide = Circuit(4, 0, [Gate("X", X, (3,))])
    many = Circuit(1, 3, [Measure(0, i, duration=0.0) for i in range(3)])

    # Assertions
    with pytest.raises(ResourceLimitError):
        Simulator(NoiseModel.ideal(4)).run_shots(wide, _generators(0, 1))
    monkeypatch.setattr(settings, "MAX_BRANCH_MEASUREMENTS", 2)
    with pytest.raises(ResourceLimitError):
        enumerate_branches(many, NoiseModel.ideal(1))
