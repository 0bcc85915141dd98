import argparse
import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from dcrb.config import settings
from dcrb.exceptions import ConfigurationError, FitError
from dcrb.logger import get_logger
from dcrb.models import BlockKind, DDMode, FitStatus, ReferenceMode
from dcrb.schemas import (
    DEFAULT_LENGTHS,
    BlockSpec,
    DecayCurve,
    FitRecord,
    FitResult,
    NoiseConfig,
    Provenance,
    RBConfig,
)
from dcrb.services.analysis import extract_epsilon, fit_exponential
from dcrb.services.engine import run_experiment
from dcrb.services.noise import NoiseModel
from dcrb.services.oracle import TheoryParams, predicted_error, reference_alpha
from dcrb.services.qmath import average_gate_error

logger = get_logger(__name__)

CURVE_COLUMNS = ["n_blocks", "qubit", "mean", "stderr", "block", "dd", "measured_p0", "flip_rate"]
PROVENANCE_PREFIX = "# provenance: "


def int_list(text: str) -> List[int]:
    """argparse type for '0,25,50'"""
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def float_list(text: str) -> List[float]:
    """argparse type for '0.005,0.01,0.02'"""
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def block_list(text: str) -> List[BlockKind]:
    """argparse type for 'z_c0,h_cnot'"""
    kinds = []
    for value in (v.strip() for v in text.split(",")):
        if not value:
            continue
        try:
            kinds.append(BlockKind(value))
        except ValueError:
            valid = ", ".join(k.value for k in BlockKind)
            raise argparse.ArgumentTypeError(f"unknown block {value!r}, expected one of {valid}") from None
    if not kinds:
        raise argparse.ArgumentTypeError("expected at least one block")
    return kinds


def add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by run and sweep"""
    parser.add_argument("--dd", choices=[m.value for m in DDMode], default=DDMode.NONE.value, help="Dynamical decoupling")
    parser.add_argument("--lengths", type=int_list, default=list(DEFAULT_LENGTHS), help="Comma-separated Clifford counts")
    parser.add_argument("--k", type=int, default=5, help="Cliffords per block")
    parser.add_argument("--seeds", type=int, default=20, help="Random sequences per length")
    parser.add_argument("--shots", type=int, default=300, help="Shots per sequence")
    parser.add_argument("--noise", type=str, default=None, help="Noise JSON file (defaults when omitted)")
    parser.add_argument("--seed", type=int, default=None, help="Master seed (falls back to DCRB_SEED)")
    parser.add_argument("--jobs", type=int, default=settings.JOBS, help="Worker processes")
    parser.add_argument("--out", type=str, default=settings.OUTPUT_DIR, help="Output directory")
    parser.add_argument("--skip-depths", type=int_list, default=[], help="Block counts left out of the fit")
    parser.add_argument("--fix-b", type=float, default=None, help="Fix the decay offset B, e.g. 0.5")
    parser.add_argument("--exact", action="store_true", help="Twirl-averaged exact curves instead of shots")
    parser.add_argument(
        "--reference",
        choices=[m.value for m in ReferenceMode],
        default=ReferenceMode.ANALYTIC.value,
        help="Reference decay for interleaved extraction",
    )
    parser.add_argument("--data-qubits", type=int_list, default=[0], help="Comma-separated data qubits")
    parser.add_argument("--measured-qubit", type=int, default=1, help="Mid-circuit measured qubit")
    parser.add_argument("--disconnected", action="store_true", help="Data and measured qubits share no coupler")


def resolve_seed(seed: Optional[int]) -> int:
    if seed is None:
        seed = settings.SEED
    if seed is None:
        raise ConfigurationError("No master seed: pass --seed or set DCRB_SEED")
    if seed < 0:
        raise ConfigurationError(f"Master seed must be non-negative, got {seed}")
    return seed


def load_noise_config(path: Optional[str]) -> NoiseConfig:
    if path is None:
        logger.info("No noise file given, using device defaults")
        return NoiseConfig()
    try:
        text = Path(path).read_text()
    except OSError as e:
        logger.error(f"Cannot read noise file {path}: {type(e).__name__} - {e}")
        raise ConfigurationError(f"Cannot read noise file {path}: {e}") from e
    try:
        config = NoiseConfig.model_validate_json(text)
    except ValidationError as e:
        logger.error(f"Invalid noise file {path}: {e.error_count()} error(s)")
        raise ConfigurationError(f"Invalid noise file {path}: {e}") from e
    logger.info(f"Loaded noise configuration from {path}")
    return config


def build_rb_config(args: argparse.Namespace) -> RBConfig:
    try:
        return RBConfig(
            lengths=args.lengths,
            k=args.k,
            seeds=args.seeds,
            shots=args.shots,
            data_qubits=args.data_qubits,
            measured_qubit=args.measured_qubit,
        )
    except ValidationError as e:
        raise ConfigurationError(f"Invalid RB configuration: {e}") from e


def build_block_specs(kinds: Sequence[BlockKind], dd_mode: DDMode, disconnected: bool) -> List[BlockSpec]:
    return [BlockSpec(kind=kind, dd_mode=dd_mode, connected=not disconnected) for kind in kinds]


def resolve_reference(
    mode: ReferenceMode,
    cfg: RBConfig,
    nm: NoiseModel,
    master_seed: int,
    jobs: int,
    exact: bool,
) -> Dict[int, Tuple[float, float]]:
    """Reference alpha and its standard error per data qubit, empty for ReferenceMode.NONE"""
    mode = ReferenceMode(mode)
    if mode is ReferenceMode.NONE:
        return {}
    if mode is ReferenceMode.ANALYTIC:
        eps_g = average_gate_error(nm.gate_channel(1))
        alpha = reference_alpha(eps_g, cfg.k)
        logger.info(f"Analytic reference: eps_G={eps_g:.3e}, alpha_ref={alpha:.6f}")
        return {q: (alpha, 0.0) for q in cfg.data_qubits}

    references = {}
    for curve in run_experiment(cfg, None, nm, master_seed, jobs=jobs, exact=exact):
        fit = fit_exponential(curve)
        if not fit.converged:
            raise FitError(f"Reference fit for qubit {curve.qubit} is {fit.status.value}")
        references[curve.qubit] = (fit.alpha, 0.0 if exact else fit.alpha_stderr)
        logger.info(f"Simulated reference q{curve.qubit}: alpha_ref={fit.alpha:.6f} +- {fit.alpha_stderr:.2e}")
    return references


def _finite(value: Optional[float]) -> Optional[float]:
    return value if value is not None and math.isfinite(value) else None


def fit_record(
    curve: DecayCurve,
    fit: FitResult,
    spec: BlockSpec,
    nm: NoiseModel,
    reference: Optional[Tuple[float, float]],
) -> FitRecord:
    interleaved = None
    if reference is not None and fit.converged and 0.0 < reference[0] <= 1.0:
        interleaved = extract_epsilon(fit, reference[0], reference[1])
    predicted = predicted_error(spec.kind, TheoryParams.from_noise_model(nm, curve.qubit, curve.measured_qubit))
    return FitRecord(
        block=spec.kind.value,
        dd=spec.dd_mode,
        data_qubit=curve.qubit,
        measured_qubit=curve.measured_qubit,
        A=_finite(fit.A),
        B=_finite(fit.B),
        alpha=_finite(fit.alpha),
        alpha_err=_finite(fit.alpha_stderr),
        epsilon=_finite(fit.epsilon),
        epsilon_err=_finite(fit.epsilon_stderr),
        converged=fit.converged,
        status=fit.status,
        alpha_ref=reference[0] if reference else None,
        epsilon_interleaved=interleaved.value if interleaved else None,
        epsilon_interleaved_err=interleaved.stderr if interleaved else None,
        epsilon_predicted=predicted,
    )


def fit_curves(
    curves: Sequence[DecayCurve],
    spec: BlockSpec,
    nm: NoiseModel,
    references: Dict[int, Tuple[float, float]],
    fix_b: Optional[float],
    skip_depths: Sequence[int],
) -> List[FitRecord]:
    records = []
    for curve in curves:
        fit = fit_exponential(curve, fix_b=fix_b, skip_counts=skip_depths)
        if fit.status is FitStatus.DEGENERATE:
            logger.warning(f"{curve.label}: decay is flat, no error rate extracted")
        records.append(fit_record(curve, fit, spec, nm, references.get(curve.qubit)))
    return records


def reported_epsilon(record: FitRecord) -> Tuple[Optional[float], Optional[float]]:
    """Interleaved estimate when a reference was used, raw estimate otherwise"""
    if record.epsilon_interleaved is not None:
        return record.epsilon_interleaved, record.epsilon_interleaved_err
    return _finite(record.epsilon), _finite(record.epsilon_err)


def provenance_line(provenance: Provenance) -> str:
    return PROVENANCE_PREFIX + provenance.model_dump_json() + "\n"


def csv_text(provenance: Provenance, columns: Sequence[str], rows: Sequence[dict]) -> str:
    buffer = io.StringIO()
    buffer.write(provenance_line(provenance))
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def curve_rows(curve: DecayCurve) -> List[dict]:
    rows = []
    for i, n in enumerate(curve.block_counts):
        rows.append({
            "n_blocks": n,
            "qubit": curve.qubit,
            "mean": curve.means[i],
            "stderr": curve.stderrs[i],
            "block": curve.block.value if curve.block else "reference",
            "dd": curve.dd_mode.value,
            "measured_p0": curve.measured_p0[i] if curve.measured_p0 else "",
            "flip_rate": curve.measured_flip_rate[i] if curve.measured_flip_rate else "",
        })
    return rows


def format_value(value: Optional[float], digits: int = 4) -> str:
    return "n/a" if value is None or not math.isfinite(value) else f"{value:.{digits}e}"


def write_outputs(out_dir: str, files: Dict[str, str]) -> List[Path]:
    """
    Write every file through a temporary sibling and rename it into place. Callers
    pass fully rendered contents, so nothing is written unless all of it exists.
    """
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    staged: List[Tuple[str, Path]] = []
    try:
        for name, content in files.items():
            handle = tempfile.NamedTemporaryFile("w", dir=directory, prefix=f".{name}.", delete=False)
            with handle:
                handle.write(content)
            staged.append((handle.name, directory / name))
    except OSError as e:
        for temp, _ in staged:
            os.unlink(temp)
        logger.error(f"Failed to write outputs to {directory}: {type(e).__name__} - {e}")
        raise ConfigurationError(f"Cannot write outputs to {directory}: {e}") from e

    written = []
    for temp, final in staged:
        os.replace(temp, final)
        written.append(final)
        logger.info(f"Wrote {final}")
    return written
