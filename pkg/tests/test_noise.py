import math

import numpy as np
import pytest
from pydantic import ValidationError

from dcrb.exceptions import ConfigurationError, ParameterError
from dcrb.schemas import NoiseConfig
from dcrb.services.noise import (
    CoherentCoupling,
    IdleNoise,
    NoiseModel,
    ReadoutError,
    Timing,
    coherent_idle_unitary,
    idle_channel,
    resolve_outcome,
    sample_measurement,
)
from dcrb.services.oracle import idle_error
from dcrb.services.qmath import DensityMatrix, apply_kraus, average_gate_error, depolarizing_superop


def test_idle_channel_decay():
    """Test populations relax with t1 and coherences decay with t2"""
    t1, t2, tau = 100e-6, 150e-6, 2e-6
    channel = idle_channel(t1, t2, tau)

    excited = apply_kraus(DensityMatrix.basis("1"), channel, [0])
    plus = apply_kraus(DensityMatrix.from_statevector([1, 1]), channel, [0])

    # Assertions
    assert excited.elements[1, 1].real == pytest.approx(math.exp(-tau / t1), abs=1e-12)
    assert abs(plus.elements[0, 1]) == pytest.approx(0.5 * math.exp(-tau / t2), abs=1e-12)


def test_idle_channel_error_matches_closed_form():
    """Test that the average error of an idle window equals the decoherence formula"""
    for t1, t2, tau in [(250e-6, 250e-6, 2e-6), (100e-6, 60e-6, 2.572e-6), (208e-6, 97e-6, 1e-6)]:
        channel = idle_channel(t1, t2, tau)

        # Assertions
        assert average_gate_error(channel) == pytest.approx(idle_error(t1, t2, tau), abs=1e-14)


def test_idle_channel_trivial_cases():
    """Test zero duration and infinite times give the identity"""
    # Assertions
    assert len(idle_channel(100e-6, 100e-6, 0.0).operators) == 1
    assert len(idle_channel(math.inf, math.inf, 1e-6).operators) == 1
    with pytest.raises(ParameterError):
        idle_channel(100e-6, 100e-6, -1.0)


def test_idle_noise_limits():
    """Test that t2 above 2 t1 and non-positive times are rejected"""
    # Assertions
    with pytest.raises(ParameterError):
        IdleNoise(t1=100e-6, t2=250e-6)
    with pytest.raises(ParameterError):
        IdleNoise(t1=0.0, t2=1e-6)
    assert IdleNoise(t1=100e-6, t2=200e-6).t2 == 200e-6


def test_readout_error_probabilities():
    """Test asymmetric assignment probabilities"""
    err = ReadoutError(p01=0.1, p10=0.3)

    # Assertions
    assert err.report_probability(1, 0) == pytest.approx(0.1)
    assert err.report_probability(0, 1) == pytest.approx(0.3)
    assert err.report_probability(1, 1) == pytest.approx(0.7)
    with pytest.raises(ParameterError):
        ReadoutError(p01=1.5)


def test_resolve_outcome_uses_both_draws():
    """Test that the first draw picks the outcome and the second the report flip"""
    err = ReadoutError(p01=0.05, p10=0.02)

    true, reported = resolve_outcome(0.3, 0.2, 0.01, err)
    kept_true, kept_reported = resolve_outcome(0.3, 0.2, 0.5, err)
    zero_true, zero_reported = resolve_outcome(0.3, 0.9, 0.04, err)

    # Assertions
    assert (int(true), int(reported)) == (1, 0)
    assert (int(kept_true), int(kept_reported)) == (1, 1)
    assert (int(zero_true), int(zero_reported)) == (0, 1)


def test_sample_measurement_ideal_readout(rng):
    """Test that an ideal measurement of a basis state is deterministic and non-disturbing"""
    rho = DensityMatrix.basis("01")

    for _ in range(20):
        reported, post = sample_measurement(rho, 1, ReadoutError(), rng)

        # Assertions
        assert reported == 1
        assert post.allclose(rho)


def test_sample_measurement_assignment_rate(rng):
    """Test that reported flips occur at the assignment error rate"""
    eps = 0.1
    draws = 4000
    flips = sum(sample_measurement(DensityMatrix.basis("0"), 0, ReadoutError.symmetric(eps), rng)[0] for _ in range(draws))

    # Assertions
    sigma = math.sqrt(eps * (1 - eps) / draws)
    assert abs(flips / draws - eps) < 4 * sigma


def test_sample_measurement_collapses_superposition(rng):
    """Test that the post-measurement state is the projected branch"""
    plus = DensityMatrix.from_statevector([1, 1])

    reported, post = sample_measurement(plus, 0, ReadoutError(), rng)

    # Assertions
    assert post.allclose(DensityMatrix.basis(str(reported)))


def test_qnd_flip_changes_post_state(rng):
    """Test that a certain QND flip leaves the qubit in the opposite state"""
    reported, post = sample_measurement(DensityMatrix.basis("0"), 0, ReadoutError(qnd_flip=1.0), rng)

    # Assertions
    assert reported == 0
    assert post.allclose(DensityMatrix.basis("1"))


def test_coherent_idle_phases():
    """Test detuning and ZZ phases of the idle Hamiltonian"""
    tau = 1e-6
    coupling = CoherentCoupling(detuning=(1e4, 2e4), zz={(0, 1): -3e4})

    unitary = coherent_idle_unitary(coupling, [0, 1], tau)

    # Assertions
    assert np.allclose(np.diag(unitary)[0], 1.0)
    assert np.angle(np.diag(unitary)[2]) == pytest.approx(-2 * math.pi * 1e4 * tau)
    assert np.angle(np.diag(unitary)[1]) == pytest.approx(-2 * math.pi * 2e4 * tau)
    expected = -2 * math.pi * (1e4 + 2e4 + 2 * -3e4) * tau
    assert np.angle(np.diag(unitary)[3]) == pytest.approx(expected)


def test_coupling_cancels_at_half_detuning():
    """Test that the data frequency vanishes with the measured qubit excited when zeta = -detuning/2"""
    coupling = CoherentCoupling(detuning=(1e4, 0.0), zz={(0, 1): -5e3})

    unitary = coherent_idle_unitary(coupling, [0, 1], 2.5e-6)

    # Assertions
    assert np.allclose(unitary[3, 3], unitary[1, 1])


def test_coupling_rejects_unordered_pairs():
    """Test zz pairs are stored with i < j"""
    # Assertions
    with pytest.raises(ParameterError):
        CoherentCoupling(zz={(1, 0): 1e3})
    with pytest.raises(ParameterError):
        CoherentCoupling(detuning=(math.nan,))


def test_noise_model_from_config_broadcasts():
    """Test that scalar fields apply to every qubit and pair keys are parsed"""
    config = NoiseConfig(p01=0.03, p10=[0.01, 0.02], t1=None, t2=None, zz_hz={"1-0": -5e4})

    nm = NoiseModel.from_config(config, 2)

    # Assertions
    assert [r.p01 for r in nm.readout] == [0.03, 0.03]
    assert [r.p10 for r in nm.readout] == [0.01, 0.02]
    assert all(math.isinf(i.t1) for i in nm.idle)
    assert nm.coupling.zz == {(0, 1): -5e4}
    assert nm.timing.tau_meas == pytest.approx(1512e-9)


def test_noise_model_from_config_errors():
    """Test that mismatched list lengths and bad pairs become configuration errors"""
    # Assertions
    with pytest.raises(ConfigurationError):
        NoiseModel.from_config(NoiseConfig(p01=[0.01, 0.02, 0.03]), 2)
    with pytest.raises(ConfigurationError):
        NoiseModel.from_config(NoiseConfig(zz_hz={"0-5": 1e3}), 2)
    with pytest.raises(ConfigurationError):
        NoiseModel.from_config(NoiseConfig(t1=50e-6, t2=150e-6), 2)


def test_noise_config_validation():
    """Test that the noise file schema rejects unknown keys and bad values"""
    # Assertions
    with pytest.raises(ValidationError):
        NoiseConfig.model_validate({"t1": 1e-4, "bogus": 1})
    with pytest.raises(ValidationError):
        NoiseConfig(p01=1.5)
    with pytest.raises(ValidationError):
        NoiseConfig(t1=-1.0)
    with pytest.raises(ValidationError):
        NoiseConfig(zz_hz={"0-0": 1.0})


def test_noise_model_restrict_reindexes():
    """Test that restricting to a subset keeps each qubit's parameters"""
    config = NoiseConfig(p01=[0.01, 0.02, 0.03], zz_hz={"0-2": -4e4, "0-1": 1e3}, detuning_hz=[1.0, 2.0, 3.0])
    nm = NoiseModel.from_config(config, 3)

    sub = nm.restrict([2, 0])

    # Assertions
    assert sub.n_qubits == 2
    assert sub.readout[0].p01 == 0.03
    assert sub.readout[1].p01 == 0.01
    assert sub.coupling.zz == {(0, 1): -4e4}
    assert sub.coupling.detuning == (3.0, 1.0)
    with pytest.raises(ParameterError):
        nm.restrict([0, 0])


def test_gate_channel_is_depolarizing():
    """Test that gate noise of probability p is depolarizing with parameter 1 - p"""
    nm = NoiseModel.from_config(NoiseConfig(depol_1q=0.004, depol_2q=0.02), 2)

    # Assertions
    assert nm.gate_channel(1).to_superop().allclose(depolarizing_superop(0.996))
    assert nm.gate_channel(2).to_superop().allclose(depolarizing_superop(0.98, 2))


def test_ideal_model(ideal_pair, pair_noise):
    """Test the ideal flag"""
    # Assertions
    assert ideal_pair.is_ideal
    assert pair_noise().is_ideal
    assert not pair_noise(eps_r=0.01).is_ideal
    assert not pair_noise(zz=-1e4).is_ideal


def test_timing_from_ns():
    """Test nanosecond conversion and the block window"""
    timing = Timing.from_ns(60, 660, 1400, 600)

    # Assertions
    assert timing.tau_meas == pytest.approx(1.4e-6)
    assert timing.block_window == pytest.approx(2e-6)
    with pytest.raises(ParameterError):
        Timing(tau_ff=-1.0)
