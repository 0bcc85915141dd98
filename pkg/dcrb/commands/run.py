import argparse
from typing import Dict, List

from dcrb.commands.common import (
    CURVE_COLUMNS,
    add_experiment_arguments,
    block_list,
    build_block_specs,
    build_rb_config,
    csv_text,
    curve_rows,
    fit_curves,
    format_value,
    load_noise_config,
    reported_epsilon,
    resolve_reference,
    resolve_seed,
    write_outputs,
)
from dcrb.config import settings
from dcrb.logger import get_logger
from dcrb.models import BlockKind, DDMode
from dcrb.schemas import BlockSpec, FitRecord, FitsFile, Provenance, RBConfig
from dcrb.services.circuit import dump_circuit
from dcrb.services.engine import run_experiment, sequence_seed
from dcrb.services.noise import NoiseModel
from dcrb.services.rbproto import build_sequence

logger = get_logger(__name__)


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("run", help="Interleaved RB of dynamic circuit blocks")
    parser.add_argument(
        "--block",
        "--blocks",
        dest="blocks",
        type=block_list,
        required=True,
        help="Comma-separated blocks: " + ", ".join(k.value for k in BlockKind),
    )
    add_experiment_arguments(parser)
    parser.add_argument("--dump-circuits", action="store_true", help="Also write circuits.jsonl")
    parser.set_defaults(handler=cmd_run)
    return parser


def circuit_lines(cfg: RBConfig, specs: List[BlockSpec], nm: NoiseModel, master_seed: int) -> List[str]:
    lines = []
    for spec in specs:
        for length_index, length in enumerate(cfg.lengths):
            for seed_index in range(cfg.seeds):
                circ = build_sequence(cfg, spec, length, sequence_seed(master_seed, length_index, seed_index), nm.timing)
                lines.extend(dump_circuit(circ, sequence=f"{spec.label} l={length} s={seed_index}"))
    return lines


def print_table(records: List[FitRecord]) -> None:
    print(f"{'block':<8} {'dd':<5} {'qubit':>5} {'epsilon':>12} {'stderr':>12} {'predicted':>12}  status")
    for record in records:
        epsilon, stderr = reported_epsilon(record)
        print(
            f"{record.block:<8} {record.dd.value:<5} {record.data_qubit:>5} {format_value(epsilon):>12} "
            f"{format_value(stderr):>12} {format_value(record.epsilon_predicted):>12}  {record.status.value}"
        )


def cmd_run(args: argparse.Namespace) -> int:
    master_seed = resolve_seed(args.seed)
    noise_config = load_noise_config(args.noise)
    cfg = build_rb_config(args)
    nm = NoiseModel.from_config(noise_config, cfg.n_qubits)
    specs = build_block_specs(args.blocks, DDMode(args.dd), args.disconnected)

    references = resolve_reference(args.reference, cfg, nm, master_seed, args.jobs, args.exact)
    rows: List[dict] = []
    records: List[FitRecord] = []
    for spec in specs:
        logger.info(f"Running {spec.label} (seed={master_seed}, exact={args.exact})")
        curves = run_experiment(cfg, spec, nm, master_seed, jobs=args.jobs, exact=args.exact)
        for curve in curves:
            rows.extend(curve_rows(curve))
        records.extend(fit_curves(curves, spec, nm, references, args.fix_b, args.skip_depths))

    provenance = Provenance(
        command="run",
        master_seed=master_seed,
        noise=noise_config.model_dump(mode="json"),
        rb=cfg.model_dump(mode="json"),
        blocks=[spec.label for spec in specs],
        options={
            "exact": args.exact,
            "reference": args.reference,
            "fix_b": args.fix_b,
            "skip_depths": args.skip_depths,
            "connected": not args.disconnected,
        },
        version=settings.package_version,
    )
    files: Dict[str, str] = {
        "curves.csv": csv_text(provenance, CURVE_COLUMNS, rows),
        "fits.json": FitsFile(provenance=provenance, fits=records).model_dump_json(indent=2) + "\n",
    }
    if args.dump_circuits:
        lines = circuit_lines(cfg, specs, nm, master_seed)
        files["circuits.jsonl"] = provenance.model_dump_json() + "\n" + "".join(line + "\n" for line in lines)

    write_outputs(args.out, files)
    print_table(records)
    return 0
