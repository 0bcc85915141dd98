"""
Decay-curve aggregation, exponential fits and error-rate extraction.
"""
import math
import warnings
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from dcrb.exceptions import FitError, ParameterError
from dcrb.logger import get_logger
from dcrb.models import BlockKind, DDMode, FitStatus
from dcrb.schemas import DecayCurve, EpsilonEstimate, FitResult

logger = get_logger(__name__)

DEGENERATE_SPREAD = 1e-9
MIN_POINTS = 4
FIT_TOL = 1e-12
MAX_B_GUESS = 0.6
_EDGE = 1e-9


def curve_from_samples(
    block_counts: Sequence[int],
    samples: np.ndarray,
    qubit: int,
    measured_qubit: int,
    shots: int,
    block: Optional[BlockKind] = None,
    dd_mode: DDMode = DDMode.NONE,
    **extra,
) -> DecayCurve:
    """
    Aggregate per-sequence survival estimates, one row per block count and one
    column per random sequence, into means and standard errors. With a single
    sequence the standard error falls back to the binomial one.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] != len(block_counts):
        raise ParameterError(f"Expected {len(block_counts)} rows of samples, got shape {samples.shape}")
    seeds = samples.shape[1]
    means = samples.mean(axis=1)
    if seeds > 1:
        stderrs = samples.std(axis=1, ddof=1) / math.sqrt(seeds)
    else:
        stderrs = np.sqrt(np.clip(means * (1 - means), 0.0, None) / shots)
    return DecayCurve(
        qubit=qubit,
        measured_qubit=measured_qubit,
        block_counts=list(block_counts),
        means=[float(m) for m in means],
        stderrs=[float(s) for s in stderrs],
        block=block,
        dd_mode=dd_mode,
        seeds=seeds,
        shots=shots,
        **extra,
    )


def decay_model(n, A, alpha, B):
    return A * np.power(alpha, n) + B


def _initial_guess(x: np.ndarray, y: np.ndarray, fix_b: Optional[float]):
    b0 = fix_b if fix_b is not None else float(np.clip(y.min(), 0.0, MAX_B_GUESS))
    a0 = float(np.clip(y[np.argmin(x)] - b0, _EDGE, 1.0 - _EDGE))
    excess = y - b0
    usable = excess > 1e-9
    alpha0 = 0.99
    if usable.sum() >= 2 and np.ptp(x[usable]) > 0:
        slope = np.polyfit(x[usable], np.log(excess[usable]), 1)[0]
        alpha0 = float(np.exp(slope))
    alpha0 = float(np.clip(alpha0, _EDGE, 1.0 - _EDGE))
    return a0, alpha0, float(np.clip(b0, _EDGE, 1.0 - _EDGE))


def _flagged(status: FitStatus, n_points: int, message: str, fix_b: Optional[float], level_b: float = math.nan):
    return FitResult(
        A=math.nan, B=level_b, alpha=math.nan, alpha_stderr=math.nan,
        A_stderr=math.nan, B_stderr=math.nan,
        epsilon=math.nan, epsilon_stderr=math.nan, status=status,
        residual_norm=0.0, n_points=n_points, fixed_b=fix_b, message=message,
    )


def fit_exponential(
    curve: DecayCurve,
    fix_b: Optional[float] = None,
    skip_counts: Iterable[int] = (),
) -> FitResult:
    """
    Weighted least-squares fit of P(0) = A * alpha**n + B with A, B, alpha in [0, 1].
    Numerical failure and flat data come back as flagged results, not exceptions.
    """
    skip = set(skip_counts)
    keep = [i for i, n in enumerate(curve.block_counts) if n not in skip]
    x = np.array([curve.block_counts[i] for i in keep], dtype=float)
    y = np.array([curve.means[i] for i in keep], dtype=float)
    stderr = np.array([curve.stderrs[i] for i in keep], dtype=float)
    if len(set(x)) < MIN_POINTS:
        raise ParameterError(f"Fitting needs at least {MIN_POINTS} distinct block counts, got {len(set(x))}")
    if fix_b is not None and not (0.0 <= fix_b <= 1.0):
        raise ParameterError(f"Fixed B must be in [0, 1], got {fix_b}")

    if np.ptp(y) < DEGENERATE_SPREAD:
        logger.info(f"{curve.label}: flat decay at {y.mean():.6f}, alpha is unidentifiable")
        return _flagged(FitStatus.DEGENERATE, len(x), "flat data, alpha unidentifiable", fix_b, float(y.mean()))

    sigma = np.maximum(stderr, 1.0 / (2 * curve.total_shots))
    a0, alpha0, b0 = _initial_guess(x, y, fix_b)
    if fix_b is None:
        model = decay_model
        p0 = [a0, alpha0, b0]
        bounds = ([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    else:
        def model(n, A, alpha):
            return decay_model(n, A, alpha, fix_b)
        p0 = [a0, alpha0]
        bounds = ([0.0, 0.0], [1.0, 1.0])

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", OptimizeWarning)
            popt, pcov = curve_fit(
                model, x, y, p0=p0, sigma=sigma, absolute_sigma=True, bounds=bounds,
                method="trf", ftol=FIT_TOL, xtol=FIT_TOL, gtol=FIT_TOL, max_nfev=20000,
            )
    except (RuntimeError, ValueError, OptimizeWarning) as e:
        logger.warning(f"{curve.label}: fit did not converge ({type(e).__name__}: {e})")
        return _flagged(FitStatus.FAILED, len(x), str(e), fix_b)

    perr = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    if not np.all(np.isfinite(perr)):
        logger.warning(f"{curve.label}: parameter covariance could not be estimated")
        return _flagged(FitStatus.FAILED, len(x), "covariance could not be estimated", fix_b)

    if fix_b is None:
        A, alpha, B = (float(v) for v in popt)
        a_err, alpha_err, b_err = (float(v) for v in perr)
    else:
        (A, alpha), B = (float(v) for v in popt), float(fix_b)
        (a_err, alpha_err), b_err = (float(v) for v in perr), 0.0
    residuals = (y - model(x, *popt)) / sigma
    result = FitResult(
        A=A, B=B, alpha=alpha, A_stderr=a_err, B_stderr=b_err, alpha_stderr=alpha_err,
        epsilon=(1 - alpha) / 2, epsilon_stderr=alpha_err / 2,
        status=FitStatus.CONVERGED, residual_norm=float(np.sqrt(np.sum(residuals**2))),
        n_points=len(x), fixed_b=fix_b,
    )
    logger.debug(f"{curve.label}: alpha={alpha:.6f} +- {alpha_err:.2e}, eps={result.epsilon:.3e}")
    return result


def extract_epsilon(
    fit: FitResult,
    reference: Optional[float] = None,
    reference_stderr: float = 0.0,
) -> EpsilonEstimate:
    """
    Raw error (1 - alpha) / 2, or the interleaved (1 - alpha / alpha_ref) / 2 when a
    reference decay is supplied; uncertainties propagated to first order.
    """
    if not fit.converged:
        raise FitError(f"Cannot extract an error rate from a {fit.status.value} fit")
    if reference is None:
        return EpsilonEstimate(value=(1 - fit.alpha) / 2, stderr=fit.alpha_stderr / 2)
    if not (0.0 < reference <= 1.0):
        raise ParameterError(f"Reference alpha must be in (0, 1], got {reference}")
    ratio = fit.alpha / reference
    stderr = 0.5 * math.hypot(fit.alpha_stderr / reference, ratio * reference_stderr / reference)
    return EpsilonEstimate(value=(1 - ratio) / 2, stderr=stderr, interleaved=True, alpha_ref=reference)
