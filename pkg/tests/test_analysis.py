import math

import numpy as np
import pytest

from dcrb.exceptions import FitError, ParameterError
from dcrb.models import BlockKind, FitStatus
from dcrb.schemas import BlockSpec, DecayCurve, FitResult
from dcrb.services.analysis import curve_from_samples, decay_model, extract_epsilon, fit_exponential
from dcrb.services.engine import run_experiment

COUNTS = list(range(0, 61, 5))


def _curve(means, stderrs=None, seeds=20, shots=300):
    return DecayCurve(
        qubit=0,
        measured_qubit=1,
        block_counts=COUNTS[:len(means)],
        means=list(means),
        stderrs=list(stderrs) if stderrs is not None else [0.0] * len(means),
        block=BlockKind.Z_C0,
        seeds=seeds,
        shots=shots,
    )


def _converged(alpha, alpha_stderr=0.0):
    return FitResult(
        A=0.5, B=0.5, alpha=alpha, alpha_stderr=alpha_stderr,
        epsilon=(1 - alpha) / 2, epsilon_stderr=alpha_stderr / 2,
        status=FitStatus.CONVERGED, residual_norm=0.0, n_points=13,
    )


def test_fit_recovers_noiseless_decay():
    """Test that exact exponential data gives back alpha"""
    means = decay_model(np.array(COUNTS, dtype=float), 0.5, 0.99, 0.5)

    fit = fit_exponential(_curve(means))

    # Assertions
    assert fit.status is FitStatus.CONVERGED
    assert abs(fit.alpha - 0.99) <= 1e-6
    assert fit.A == pytest.approx(0.5, abs=1e-5)
    assert fit.B == pytest.approx(0.5, abs=1e-5)
    assert fit.epsilon == pytest.approx(0.005, abs=1e-6)
    assert fit.n_points == len(COUNTS)


def test_fit_with_fixed_offset():
    """Test that fixing B fits only A and alpha"""
    means = decay_model(np.array(COUNTS, dtype=float), 0.45, 0.97, 0.5)

    fit = fit_exponential(_curve(means), fix_b=0.5)

    # Assertions
    assert fit.converged
    assert fit.B == 0.5
    assert fit.B_stderr == 0.0
    assert fit.fixed_b == 0.5
    assert fit.alpha == pytest.approx(0.97, abs=1e-6)


def test_fit_skips_requested_depths():
    """Test that skipped block counts leave the fit"""
    means = decay_model(np.array(COUNTS, dtype=float), 0.5, 0.98, 0.5)
    means[0] = 0.7

    fit = fit_exponential(_curve(means), skip_counts=[0])

    # Assertions
    assert fit.n_points == len(COUNTS) - 1
    assert fit.alpha == pytest.approx(0.98, abs=1e-6)


def test_flat_curve_is_degenerate():
    """Test that a flat curve is flagged and yields no error rate"""
    fit = fit_exponential(_curve([1.0] * len(COUNTS)))

    # Assertions
    assert fit.status is FitStatus.DEGENERATE
    assert not fit.converged
    assert math.isnan(fit.alpha)
    assert fit.B == pytest.approx(1.0)
    with pytest.raises(FitError):
        extract_epsilon(fit)


def test_fit_needs_four_depths():
    """Test that fewer than four distinct block counts are rejected"""
    # Assertions
    with pytest.raises(ParameterError):
        fit_exponential(_curve([1.0, 0.9, 0.85]))
    with pytest.raises(ParameterError):
        fit_exponential(_curve([1.0, 0.9, 0.85, 0.8, 0.78]), skip_counts=[0, 5])
    with pytest.raises(ParameterError):
        fit_exponential(_curve([1.0, 0.9, 0.85, 0.8]), fix_b=1.5)


def test_failed_fit_is_flagged(mocker):
    """Test that an optimizer failure comes back as a FAILED result"""
    mocker.patch("dcrb.services.analysis.curve_fit", side_effect=RuntimeError("Optimal parameters not found"))
    means = decay_model(np.array(COUNTS, dtype=float), 0.5, 0.98, 0.5)

    fit = fit_exponential(_curve(means))

    # Assertions
    assert fit.status is FitStatus.FAILED
    assert "Optimal parameters" in fit.message
    with pytest.raises(FitError):
        extract_epsilon(fit)


def test_fit_is_invariant_to_error_scale(rng):
    """Test that scaling every standard error leaves the point estimates unchanged"""
    x = np.array(COUNTS, dtype=float)
    means = np.clip(decay_model(x, 0.48, 0.975, 0.51) + rng.normal(scale=0.004, size=x.size), 0.0, 1.0)
    stderrs = np.full(x.size, 0.004)

    base = fit_exponential(_curve(means, stderrs))
    scaled = fit_exponential(_curve(means, 3 * stderrs))

    # Assertions
    assert scaled.alpha == pytest.approx(base.alpha, rel=1e-6)
    assert scaled.A == pytest.approx(base.A, rel=1e-5)
    assert scaled.alpha_stderr == pytest.approx(3 * base.alpha_stderr, rel=1e-4)


def test_extract_epsilon_examples():
    """Test raw and interleaved extraction"""
    raw = extract_epsilon(_converged(0.98222, 0.0004))
    interleaved = extract_epsilon(_converged(0.97), reference=0.99)

    # Assertions
    assert extract_epsilon(_converged(1.0)).value == 0.0
    assert raw.value == pytest.approx(8.89e-3)
    assert raw.stderr == pytest.approx(0.0002)
    assert not raw.interleaved
    assert interleaved.value == pytest.approx(1.0101e-2, abs=1e-6)
    assert interleaved.interleaved and interleaved.alpha_ref == 0.99
    with pytest.raises(ParameterError):
        extract_epsilon(_converged(0.97), reference=0.0)


def test_extract_epsilon_is_monotone():
    """Test that a faster decay never gives a smaller error"""
    alphas = np.linspace(0.9, 1.0, 21)
    values = [extract_epsilon(_converged(a), reference=0.995).value for a in alphas]

    # Assertions
    assert all(b < a for a, b in zip(values, values[1:]))


def test_interleaved_error_propagation():
    """Test that reference uncertainty adds in quadrature"""
    estimate = extract_epsilon(_converged(0.97, 0.002), reference=0.99, reference_stderr=0.001)

    # Assertions
    ratio = 0.97 / 0.99
    expected = 0.5 * math.hypot(0.002 / 0.99, ratio * 0.001 / 0.99)
    assert estimate.stderr == pytest.approx(expected)


def test_curve_from_samples():
    """Test means and standard errors over sequences, with a binomial fallback"""
    samples = np.array([[1.0, 1.0, 1.0], [0.9, 0.8, 0.7], [0.6, 0.7, 0.8], [0.5, 0.6, 0.55]])

    curve = curve_from_samples([0, 5, 10, 20], samples, qubit=0, measured_qubit=1, shots=100)
    single = curve_from_samples([0, 5, 10, 20], samples[:, :1], qubit=0, measured_qubit=1, shots=100)

    # Assertions
    assert curve.means[1] == pytest.approx(0.8)
    assert curve.stderrs[1] == pytest.approx(0.1 / math.sqrt(3))
    assert curve.stderrs[0] == 0.0
    assert curve.seeds == 3
    assert single.stderrs[1] == pytest.approx(math.sqrt(0.9 * 0.1 / 100))
    with pytest.raises(ParameterError):
        curve_from_samples([0, 5], samples, qubit=0, measured_qubit=1, shots=100)


def test_decay_curve_validation():
    """Test that inconsistent curves are rejected"""
    # Assertions
    with pytest.raises(ValueError):
        _curve([1.0, 0.9], stderrs=[0.0])
    with pytest.raises(ValueError):
        _curve([1.2, 0.9, 0.8, 0.7])
    with pytest.raises(ValueError):
        _curve([1.0, 0.9, 0.8, 0.7], stderrs=[0.0, -0.1, 0.0, 0.0])


@pytest.mark.slow
def test_stderr_coverage():
    """Test that alpha lies within 3 standard errors in at least 99% of synthetic experiments"""
    generator = np.random.default_rng(7)
    x = np.array(COUNTS, dtype=float)
    truth = decay_model(x, 0.5, 0.98, 0.5)
    seeds, shots, trials = 20, 300, 1000

    covered = 0
    for _ in range(trials):
        samples = generator.binomial(shots, truth[:, None], size=(x.size, seeds)) / shots
        fit = fit_exponential(curve_from_samples(COUNTS, samples, qubit=0, measured_qubit=1, shots=shots))
        if fit.converged and abs(fit.alpha - 0.98) <= 3 * fit.alpha_stderr:
            covered += 1

    # Assertions
    assert covered / trials >= 0.99


def test_fit_of_exact_hcnot_curve(pair_noise, exact_rb):
    """Test that fitting the twirled H_CNOT curve recovers alpha = 1 - 4 eps_R / 3"""
    nm = pair_noise(eps_r=0.03)

    (curve,) = run_experiment(exact_rb, BlockSpec(kind=BlockKind.H_CNOT), nm, master_seed=0, exact=True)
    fit = fit_exponential(curve)

    # Assertions
    assert fit.converged
    assert fit.alpha == pytest.approx(0.96, abs=1e-6)
    assert extract_epsilon(fit).value == pytest.approx(0.02, abs=1e-6)
