import argparse
import logging
import sys
from typing import List, Optional

from fraclap import __description__, __version__
from fraclap.commands import run_audits, run_mesh_refine, run_rates, run_seminorm, run_solve
from fraclap.commands.seminorm import REGIONS, STUDIES, parse_parameters
from fraclap.config import COMMANDS, load_settings, set_settings
from fraclap.core.exceptions import ConfigError, FraclapError
from fraclap.core.utils.solver_manager import reset_solver_manager

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value experiment file")
    common.add_argument("--domain", help="lshape, square, unit_square, interval or disk_polygon")
    common.add_argument("--s", dest="s_values", help="comma separated fractional orders in (0, 1)")
    common.add_argument("--theta", type=float, help="marking parameter, must exceed 1")
    common.add_argument("--cap", type=int, help="maximal number of elements")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for randomized audits")
    common.add_argument("--quad-order", dest="quad_order", type=int, help="Gauss points of the near-pair rules")
    common.add_argument("--mesh", dest="mesh_path", help="mesh file to use instead of the domain preset")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_arguments()
    parser = argparse.ArgumentParser(prog="fraclap", description=__description__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("rates", parents=[common], help="convergence rates on GREEDY meshes")
    audits = commands.add_parser("audits", parents=[common], help="property audits with a JSON report")
    audits.add_argument("--only", nargs="+", help="run only the named audits")
    commands.add_parser("solve", parents=[common], help="assemble and solve on one mesh")

    seminorm = commands.add_parser("seminorm", parents=[common], help="fractional Sobolev seminorms")
    seminorm.add_argument("--study", choices=STUDIES, default="value")
    seminorm.add_argument("--model", default="power", help="model function name")
    seminorm.add_argument("--param", action="append", help="model parameter key=value, repeatable")
    seminorm.add_argument("--sigma", type=float, default=0.5)
    seminorm.add_argument("--p", type=float, default=2.0)
    seminorm.add_argument("--region", choices=REGIONS, default="domain")
    seminorm.add_argument("--a", type=float, default=0.0)
    seminorm.add_argument("--b", type=float, default=1.0)

    refine = commands.add_parser("mesh-refine", parents=[common], help="GREEDY or uniform mesh refinement")
    refine.add_argument("--sweeps", type=int, default=0, help="uniform sweeps instead of GREEDY")
    return parser


def _dispatch(args: argparse.Namespace, settings) -> int:
    if args.command == "rates":
        run_rates(settings)
        return 0
    if args.command == "audits":
        report = run_audits(settings, mesh_path=args.mesh_path, only=args.only)
        return 0 if report.success else 1
    if args.command == "solve":
        run_solve(settings, mesh_path=args.mesh_path)
        return 0
    if args.command == "seminorm":
        run_seminorm(settings, study=args.study, model=args.model, parameters=parse_parameters(args.param),
                     sigma=args.sigma, p=args.p, region=args.region, a=args.a, b=args.b)
        return 0
    if args.command == "mesh-refine":
        run_mesh_refine(settings, mesh_path=args.mesh_path, sweeps=args.sweeps)
        return 0
    raise ConfigError(f"Unknown command '{args.command}', expected one of {COMMANDS}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "command": args.command,
        "domain": args.domain,
        "s_values": args.s_values,
        "theta": args.theta,
        "cap": args.cap,
        "out": args.out,
        "seed": args.seed,
        "quad_order": args.quad_order,
        "log_level": args.log_level,
    }
    try:
        settings = load_settings(args.config, **overrides)
    except ConfigError as e:
        logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
        logger.error(f"Configuration error: {e}")
        return 1

    logging.basicConfig(level=getattr(logging, settings.log_level.upper(), logging.INFO), format=LOG_FORMAT,
                        force=True)
    set_settings(settings)
    reset_solver_manager(settings)
    logger.info(f"fraclap {__version__}: {args.command} on '{settings.domain}', s={settings.s_values}, "
                f"config {settings.config_hash()[:12]}")

    try:
        return _dispatch(args, settings)
    except FraclapError as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    except Exception as e:
        logger.error(f"Unhandled exception: {str(e)}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
