import argparse
import math

from dcrb.commands.common import block_list
from dcrb.exceptions import ConfigurationError
from dcrb.logger import get_logger
from dcrb.models import BlockKind
from dcrb.services.oracle import (
    TheoryParams,
    check_nonmarkovian,
    idle_error,
    predicted_error,
    survival_hcnot,
    survival_zc,
)

logger = get_logger(__name__)


def _seconds(text: str) -> float:
    """Seconds, 'inf' or 'none' for an infinite time"""
    if text.strip().lower() in ("inf", "none", "null"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected seconds or 'inf', got {text!r}") from None


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("oracle", help="Closed-form predictions for one block")
    parser.add_argument("--block", type=block_list, required=True, help="Block kind")
    parser.add_argument("--eps-r", type=float, default=0.0, help="Symmetric assignment error")
    parser.add_argument("--eps-2q", type=float, default=0.0, help="CNOT average gate error")
    parser.add_argument("--t1", type=_seconds, default=math.inf, help="T1 in seconds")
    parser.add_argument("--t2", type=_seconds, default=math.inf, help="T2 in seconds")
    parser.add_argument("--tau", type=float, default=0.0, help="Idle window per block in seconds")
    parser.add_argument("--depth", type=int, default=10, help="Largest depth of the survival table")
    parser.set_defaults(handler=cmd_oracle)
    return parser


def cmd_oracle(args: argparse.Namespace) -> int:
    if len(args.block) != 1:
        raise ConfigurationError("oracle takes exactly one block")
    kind = args.block[0]
    params = TheoryParams(eps_r=args.eps_r, eps_2q=args.eps_2q, t1=args.t1, t2=args.t2, tau=args.tau)
    epsilon = predicted_error(kind, params)
    logger.info(f"Oracle for {kind.value}: {params}")

    print(f"block            {kind.value}")
    print(f"epsilon          {epsilon:.6e}")
    print(f"epsilon_tau      {idle_error(params.t1, params.t2, params.tau):.6e}")

    survival = None
    if kind in (BlockKind.Z_C0, BlockKind.Z_C1):
        survival = survival_zc
        _, _, deviation = check_nonmarkovian(params.eps_r)
        print(f"non_markovian    {deviation:.6e}")
    elif kind is BlockKind.H_CNOT:
        survival = survival_hcnot

    if survival is not None:
        print("depth  survival (assignment error only)")
        for depth in range(args.depth + 1):
            print(f"{depth:>5}  {survival(params.eps_r, depth):.15f}")
    return 0
