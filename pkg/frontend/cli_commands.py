import argparse
import logging

from backend.utils import parse_float_grid, parse_int_grid

logger = logging.getLogger(__name__)

SIMULATE_EPILOG = """\
outputs (in --out):
  distribution.csv  u, mass, stderr          law of S_N (lattice points u = k*h, else distinct values)
  covariance.csv    i, j, C, C_stderr, D, D_stderr
                    C_ij = Cov(S_iN, S_jN)/N, D_ij = C_ij/min(i, j)
  report.json       run report with KS statistic, sigma^2 used, seed, samples, workers
"""

LLT_EPILOG = """\
outputs (in --out):
  llt.csv      u, L, R, stderr
               L(u) = sigma*sqrt(2 pi N) * P{S_N = u} (lattice) or * E g(S_N - u) (triangle g),
               R(u) = h*exp(-u^2/(2 N sigma^2)) (lattice) or w*exp(...) (non-lattice)
  report.json  max deviation, noise share (3 x max stderr), bias share
"""

CF_EPILOG = """\
outputs (in --out):
  cf.csv           theta, N, abs_phi, mode, below_noise_floor
  contraction.csv  theta, prefix_index, rho    (prefixes in lexicographic order of state indices)
  report.json      q fits per theta with residuals, r fit, contraction summary
"""


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def seed_value(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {text}")
    return value


def positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def float_grid(text: str):
    try:
        return parse_float_grid(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad theta grid {text!r}: {e}")


def int_grid(text: str):
    try:
        grid = parse_int_grid(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad N grid {text!r}: {e}")
    if not grid or min(grid) < 1:
        raise argparse.ArgumentTypeError(f"N grid must hold positive integers, got {text!r}")
    return grid


def _add_sampling_flags(parser: argparse.ArgumentParser, section: str, settings_manager):
    parser.add_argument("--horizon", type=positive_int, default=None,
                        help=f"N (default {settings_manager.get_setting(section + '.horizon')})")
    parser.add_argument("--samples", type=positive_int, default=None,
                        help=f"M (default {settings_manager.get_setting(section + '.samples')})")
    parser.add_argument("--seed", type=seed_value, default=None,
                        help=f"64-bit seed (default {settings_manager.get_setting('simulation.seed')})")
    parser.add_argument("--workers", type=positive_int, default=None,
                        help="threads; changes speed only, never values (default: physical cores)")
    parser.add_argument("--sigma2", type=positive_float, default=None,
                        help="variance for the Gaussian comparison (default: var(S_N)/N from the sample)")
    parser.add_argument("--out", default=None, help="output directory")


def create_cli_parser(run_manager, settings_manager) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nllt",
        description="Local limit theorems for nonconventional sums of finite Markov chains.")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="decomposition, lattice verdict, mixing tables, s_ell^2, positivity")
    analyze.add_argument("instance")
    analyze.add_argument("--k-max", type=positive_int, default=None,
                         help=f"largest k for psi/delta/rho tables (default {settings_manager.get_setting('analysis.k_max')})")
    analyze.add_argument("--n0", type=positive_int, default=None, help="Doeblin step (default: first that works)")
    analyze.add_argument("--out", default=None, help="write report.json here")
    analyze.set_defaults(handler=lambda a: run_manager.cmd_analyze(a.instance, a.out, a.k_max, a.n0))

    simulate = sub.add_parser("simulate", help="Monte Carlo law of S_N, CLT distance, D matrix",
                              epilog=SIMULATE_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    simulate.add_argument("instance")
    _add_sampling_flags(simulate, "simulation", settings_manager)
    simulate.set_defaults(handler=lambda a: run_manager.cmd_simulate(
        a.instance, a.horizon, a.samples, a.seed, a.workers, a.out, a.sigma2))

    llt = sub.add_parser("llt", help="local limit comparison at horizon N",
                         epilog=LLT_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    llt.add_argument("instance")
    _add_sampling_flags(llt, "llt", settings_manager)
    llt.set_defaults(handler=lambda a: run_manager.cmd_llt(
        a.instance, a.horizon, a.samples, a.seed, a.workers, a.out, a.sigma2))

    cf = sub.add_parser("cf-scan", help="characteristic function decay and contraction numbers",
                        epilog=CF_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    cf.add_argument("instance")
    cf.add_argument("--theta-grid", type=float_grid, default=None,
                    help="comma list or start:stop:count (default from config.json)")
    cf.add_argument("--n-grid", type=int_grid, default=None, help="comma list or start:stop inclusive")
    cf.add_argument("--mode", choices=("exact", "monte_carlo"), default=None)
    cf.add_argument("--samples", type=positive_int, default=None, help="M for monte_carlo mode")
    cf.add_argument("--seed", type=seed_value, default=None)
    cf.add_argument("--workers", type=positive_int, default=None)
    cf.add_argument("--out", default=None, help="output directory")
    cf.set_defaults(handler=lambda a: run_manager.cmd_cf_scan(
        a.instance, a.theta_grid, a.n_grid, a.mode, a.samples, a.seed, a.workers, a.out))

    return parser
