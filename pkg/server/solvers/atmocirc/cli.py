#!/usr/bin/env python3
"""
atmocirc command line - nondim, run, verify-mms, check-trajectory
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from . import __version__
from .config import RunConfig, load_config
from .errors import AtmocircError, ConfigError, TrajectoryError
from .fields import State
from .mms import DEFAULT_PARAMS, DEFAULT_SPATIAL_GRIDS, ManufacturedSolution, temporal_convergence, verify_mms
from .params import to_dimensional
from .runner import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_MMS_ORDER,
    EXIT_OK,
    check_trajectory,
    resolve_output_dir,
    run,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def setup_logging(log_dir: Optional[Path] = None) -> None:
    level = os.getenv("ATMOCIRC_LOG_LEVEL", "INFO").upper()
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_dir / "atmocirc.log"))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def emit(summary: dict) -> None:
    print(json.dumps(summary, default=str))


def dimensional_report(config: RunConfig, t_end: float) -> dict:
    """Scales and wall values mapped back through to_dimensional, for checking a physical block"""
    phys = config.physical
    fields = to_dimensional(phys, State.zeros(config.grid, time=t_end))
    return {
        "velocity_scale": phys.kappa_T / phys.h,
        "time_scale": phys.h * phys.h / phys.kappa_T,
        "t_end": float(fields["t"]),
        "height": float(fields["x2"][0, -1]),
        "T_bottom": float(fields["T"][0, 0]),
        "T_top": float(fields["T"][0, -1]),
        "q_bottom": float(fields["q"][0, 0]),
        "q_top": float(fields["q"][0, -1]),
    }


def cmd_nondim(args) -> int:
    config = load_config(args.config)
    params = config.params()
    summary = {"success": True, "source": "physical" if config.physical else "dimensionless", **params.to_dict()}
    if config.physical is not None:
        step = config.nondimensional_step()
        summary.update({"dt": step.dt, "t_end": step.t_end, "dimensional": dimensional_report(config, step.t_end)})
    logger.info(f"✅ Dimensionless groups: Pr={params.Pr!r} Le={params.Le!r} R={params.R!r} R_tilde={params.R_tilde!r}")
    emit(summary)
    return EXIT_OK


def cmd_run(args) -> int:
    config = load_config(args.config)
    out_dir = resolve_output_dir(config, args.out)
    setup_logging(out_dir)
    code = run(config, str(out_dir))
    emit({"success": code == EXIT_OK, "exit_code": code, "output": str(out_dir)})
    return code


def cmd_verify_mms(args) -> int:
    params = DEFAULT_PARAMS
    operators = None
    sign = "paper"
    if args.config:
        config = load_config(args.config)
        params = config.params()
        operators = config.operators
        sign = config.step.coriolis_sign
    solution = ManufacturedSolution(params, args.amplitude, sign)
    kwargs = {"config": operators} if operators is not None else {}

    spatial = verify_mms(DEFAULT_SPATIAL_GRIDS[: args.levels], args.dt_factor, args.t_end, solution=solution,
                         **kwargs)
    temporal = temporal_convergence(solution=solution, **kwargs)
    passed = spatial.passed and temporal.passed
    if passed:
        logger.info("✅ MMS convergence orders meet the target")
    else:
        logger.warning(f"⚠️ MMS orders below target: spatial {spatial.orders}, temporal {temporal.orders}")
    emit({"success": passed, "spatial": spatial.to_dict(), "temporal": temporal.to_dict()})
    return EXIT_OK if passed else EXIT_MMS_ORDER


def cmd_check_trajectory(args) -> int:
    directory = args.out
    if directory is None and args.config:
        directory = str(resolve_output_dir(load_config(args.config)))
    if directory is None:
        raise ConfigError("check-trajectory needs --out <dir> or a --config naming an output directory")
    code, summary = check_trajectory(directory, args.max_window)
    emit(summary)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atmocirc", description="Moist Boussinesq channel simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("nondim", help="print the dimensionless groups of a configuration")
    p.add_argument("--config", required=True)
    p.set_defaults(handler=cmd_nondim)

    p = sub.add_parser("run", help="run a configuration and write snapshots and diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("verify-mms", help="manufactured-solution convergence study")
    p.add_argument("--config", default=None, help="take parameters and operators from this configuration")
    p.add_argument("--levels", type=int, default=len(DEFAULT_SPATIAL_GRIDS))
    p.add_argument("--dt-factor", type=float, default=0.5, help="dt = factor * dx2^2")
    p.add_argument("--t-end", type=float, default=0.1)
    p.add_argument("--amplitude", type=float, default=0.5)
    p.set_defaults(handler=cmd_verify_mms)

    p = sub.add_parser("check-trajectory", help="recompute diagnostics over a finished run")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--max-window", type=float, default=None)
    p.set_defaults(handler=cmd_check_trajectory)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, TrajectoryError) as e:
        logger.error(f"❌ {e}")
        emit({"success": False, "error": str(e)})
        return EXIT_CONFIG
    except AtmocircError as e:
        logger.error(f"❌ {e}")
        emit({"success": False, "error": str(e)})
        return EXIT_CHECK_FAILED if args.command == "check-trajectory" else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
