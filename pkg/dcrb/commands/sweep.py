import argparse
from typing import List

from pydantic import ValidationError

from dcrb.commands.common import (
    add_experiment_arguments,
    block_list,
    build_block_specs,
    build_rb_config,
    csv_text,
    fit_curves,
    float_list,
    format_value,
    load_noise_config,
    reported_epsilon,
    resolve_reference,
    resolve_seed,
    write_outputs,
)
from dcrb.config import settings
from dcrb.exceptions import ConfigurationError
from dcrb.logger import get_logger
from dcrb.models import BlockKind, DDMode, SweepAxis
from dcrb.schemas import NoiseConfig, Provenance, RBConfig, SweepRow, format_pair_key
from dcrb.services.engine import run_experiment
from dcrb.services.noise import NoiseModel

logger = get_logger(__name__)

SWEEP_COLUMNS = list(SweepRow.model_fields)


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("sweep", help="Fitted block error across a noise parameter grid")
    parser.add_argument("--axis", choices=[a.value for a in SweepAxis], required=True, help="Swept noise parameter")
    parser.add_argument("--values", type=float_list, required=True, help="Comma-separated grid values")
    parser.add_argument(
        "--blocks",
        "--block",
        dest="blocks",
        type=block_list,
        default=[BlockKind.Z_C0],
        help="Comma-separated blocks",
    )
    add_experiment_arguments(parser)
    parser.set_defaults(handler=cmd_sweep)
    return parser


def noise_at(config: NoiseConfig, axis: SweepAxis, value: float, cfg: RBConfig) -> NoiseConfig:
    """
    The noise configuration of one grid point: eps_r sets the measured qubit's symmetric
    assignment error, eps_2q the CNOT error (depol_2q = 4/3 eps_2q) and zz the coupling
    between every data qubit and the measured qubit.
    """
    n = cfg.n_qubits
    data = config.model_dump()
    if axis is SweepAxis.EPS_R:
        for name in ("p01", "p10"):
            values = config.per_qubit(name, n)
            values[cfg.measured_qubit] = value
            data[name] = values
    elif axis is SweepAxis.EPS_2Q:
        data["depol_2q"] = 4 * value / 3
    else:
        if isinstance(config.zz_hz, dict):
            zz = dict(config.zz_hz)
        else:
            zz = {format_pair_key((i, j)): config.zz_hz for i in range(n) for j in range(i + 1, n)}
        for q in cfg.data_qubits:
            zz[format_pair_key((q, cfg.measured_qubit))] = value
        data["zz_hz"] = zz
    try:
        return NoiseConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"{axis.value}={value} gives an invalid noise configuration: {e}") from e


def print_table(rows: List[SweepRow]) -> None:
    print(f"{'axis':<7} {'value':>12} {'block':<8} {'qubit':>5} {'epsilon':>12} {'stderr':>12} {'predicted':>12}")
    for row in rows:
        print(
            f"{row.axis:<7} {row.value:>12.5g} {row.block:<8} {row.data_qubit:>5} {format_value(row.epsilon):>12} "
            f"{format_value(row.epsilon_err):>12} {format_value(row.epsilon_predicted):>12}"
        )


def cmd_sweep(args: argparse.Namespace) -> int:
    axis = SweepAxis(args.axis)
    master_seed = resolve_seed(args.seed)
    base = load_noise_config(args.noise)
    cfg = build_rb_config(args)
    specs = build_block_specs(args.blocks, DDMode(args.dd), args.disconnected)
    NoiseModel.from_config(base, cfg.n_qubits)

    rows: List[SweepRow] = []
    for value in args.values:
        nm = NoiseModel.from_config(noise_at(base, axis, value, cfg), cfg.n_qubits)
        references = resolve_reference(args.reference, cfg, nm, master_seed, args.jobs, args.exact)
        logger.info(f"Sweep point {axis.value}={value:g}")
        for spec in specs:
            curves = run_experiment(cfg, spec, nm, master_seed, jobs=args.jobs, exact=args.exact)
            for record in fit_curves(curves, spec, nm, references, args.fix_b, args.skip_depths):
                epsilon, stderr = reported_epsilon(record)
                rows.append(SweepRow(
                    axis=axis.value,
                    value=value,
                    block=record.block,
                    dd=record.dd,
                    data_qubit=record.data_qubit,
                    epsilon=epsilon,
                    epsilon_err=stderr,
                    status=record.status,
                    epsilon_predicted=record.epsilon_predicted,
                ))

    provenance = Provenance(
        command="sweep",
        master_seed=master_seed,
        noise=base.model_dump(mode="json"),
        rb=cfg.model_dump(mode="json"),
        blocks=[spec.label for spec in specs],
        options={
            "axis": axis.value,
            "values": args.values,
            "exact": args.exact,
            "reference": args.reference,
            "fix_b": args.fix_b,
            "skip_depths": args.skip_depths,
        },
        version=settings.package_version,
    )
    table = [row.model_dump(mode="json") for row in rows]
    write_outputs(args.out, {"sweep.csv": csv_text(provenance, SWEEP_COLUMNS, table)})
    print_table(rows)
    return 0
