import logging
import os
import platform
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TYPE_CHECKING

import numpy as np
import psutil

import config
from . import __version__
from .chain_core import mixing_profile
from .errors import DegenerateVariance, InvalidArgument, KindOther, PositivityWindowUnavailable
from .fourier_cf import cf_decay_scan, contraction_profile
from .instance_loader import InstanceFile, load_instance_file
from .lattice_classify import LatticeKind, lattice_mesh_check
from .observable_decomp import is_F_ell_zero, mean_square_of_sum, product_weights, reduce_arity
from .path_sampler import default_workers
from .sim_oracle import (NonconvInstance, SimConfig, build_instance, clt_check, distribution_from_samples,
                         exact_distribution, llt_check)
from .utils import write_csv, write_json
from .variance_engine import Verdict, covariance_from_samples, positivity_verdict, s_ell_squared

if TYPE_CHECKING:
    from .settings_manager import SettingsManager

logger = logging.getLogger(__name__)
audit_logger = logging.getLogger('run.audit')

DISTRIBUTION_COLUMNS = ("u", "mass", "stderr")
COVARIANCE_COLUMNS = ("i", "j", "C", "C_stderr", "D", "D_stderr")
LLT_COLUMNS = ("u", "L", "R", "stderr")
CF_COLUMNS = ("theta", "N", "abs_phi", "mode", "below_noise_floor")
CONTRACTION_COLUMNS = ("theta", "prefix_index", "rho")


@dataclass
class RunReport:
    command: str
    instance: str
    digest: str
    version: str = __version__
    flags: Dict = field(default_factory=dict)
    seeds: Dict = field(default_factory=dict)
    outputs: Dict = field(default_factory=dict)
    files: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    host: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command, "instance": self.instance, "digest": self.digest,
            "version": self.version, "flags": self.flags, "seeds": self.seeds,
            "outputs": self.outputs, "files": self.files, "wall_time": self.wall_time, "host": self.host,
        }


def _host_info() -> dict:
    return {
        "python": platform.python_version(),
        "platform": platform.platform(),
        "physical_cores": psutil.cpu_count(logical=False),
        "logical_cores": psutil.cpu_count(logical=True),
        "memory_bytes": psutil.virtual_memory().total,
    }


class RunManager:
    """Runs the analyze / simulate / llt / cf-scan commands and records a RunReport for each."""

    def __init__(self, settings_manager: "SettingsManager"):
        self.settings_manager = settings_manager

    # --- helpers ---

    def _setting(self, defaults: dict, key: str, section: str, value=None):
        if value is not None:
            return value
        if key in defaults:
            return defaults[key]
        return self.settings_manager.get_setting(f"{section}.{key}")

    def _load(self, path: str):
        source = load_instance_file(path)
        return source, build_instance(source.chain, source.observable)

    def _out_dir(self, out: Optional[str], command: str, digest: str) -> str:
        out = out or os.path.join(config.RESULTS_DIR, f"{command}-{digest[:12]}")
        os.makedirs(out, exist_ok=True)
        return out

    def _workers(self, workers: Optional[int]) -> int:
        if workers is None:
            workers = self.settings_manager.get_setting("simulation.workers", 0)
        return workers if workers and workers > 0 else default_workers()

    def _start(self, command: str, source: InstanceFile, flags: dict) -> RunReport:
        audit_logger.info(f"START {command} - instance: {source.path}, digest: {source.digest}, flags: {flags}")
        return RunReport(command, source.path, source.digest, flags=flags, host=_host_info())

    def _finish(self, report: RunReport, out_dir: Optional[str], started: float) -> RunReport:
        report.wall_time = round(time.time() - started, 3)
        if out_dir is not None:
            path = os.path.join(out_dir, "report.json")
            report.files.append(path)
            write_json(path, report.to_dict())
        audit_logger.info(f"END {report.command} - digest: {report.digest}, seeds: {report.seeds}, "
                          f"wall_time: {report.wall_time}s")
        return report

    def _verdict(self, instance: NonconvInstance, k_max: int, n0: Optional[int]):
        profile = mixing_profile(instance.chain, instance.ell, k_max, n0)
        s2 = s_ell_squared(instance.chain, instance.decomposition)
        return profile, s2, positivity_verdict(instance, profile, s2)

    # --- commands ---

    def cmd_analyze(self, path: str, out: Optional[str] = None, k_max: Optional[int] = None,
                    n0: Optional[int] = None) -> RunReport:
        started = time.time()
        source, instance = self._load(path)
        k_max = self._setting(source.defaults, "k_max", "analysis", k_max)
        n0 = n0 if n0 is not None else self.settings_manager.get_setting("analysis.doeblin_n0")
        report = self._start("analyze", source, {"k_max": k_max, "n0": n0})

        profile, s2, verdict = self._verdict(instance, k_max, n0)
        decomposition = instance.decomposition
        outputs = {
            "S": instance.chain.size,
            "ell": instance.ell,
            "stationary": instance.chain.stationary.tolist(),
            "F_bar": source.observable.mean,
            "b2": source.observable.second_moment,
            "centered_mean_square": mean_square_of_sum(decomposition, instance.chain),
            "decomposition": [{
                "index": i,
                "max_abs": float(np.abs(comp).max()),
                "mean_square": float(product_weights(instance.chain, i) @ comp.ravel() ** 2),
            } for i, comp in enumerate(decomposition.components, start=1)],
            "F_ell_zero": is_F_ell_zero(decomposition),
            "exact_values_dropped": instance.observable.exact_dropped,
            "lattice": instance.lattice.to_dict(),
            "mixing": profile.to_dict(),
            "s_ell2": s2,
            "variance": verdict.to_dict(),
        }
        if verdict.verdict is Verdict.DEGENERATE_F_ELL_ZERO and instance.ell > 1:
            outputs["reduced_ell"] = reduce_arity(source.observable, instance.chain).ell
        report.outputs = outputs

        out_dir = self._out_dir(out, "analyze", source.digest) if out else None
        logger.info(f"analyze: kind {instance.lattice.kind.value}, s_ell^2 {s2:.6g}, verdict {verdict.verdict.value}")
        return self._finish(report, out_dir, started)

    def cmd_simulate(self, path: str, horizon: Optional[int] = None, samples: Optional[int] = None,
                     seed: Optional[int] = None, workers: Optional[int] = None, out: Optional[str] = None,
                     sigma2: Optional[float] = None) -> RunReport:
        started = time.time()
        source, instance = self._load(path)
        d = source.defaults
        N = self._setting(d, "horizon", "simulation", horizon)
        M = self._setting(d, "samples", "simulation", samples)
        seed = self._setting(d, "seed", "simulation", seed)
        sigma2 = self._setting(d, "sigma2", "simulation", sigma2)
        workers = self._workers(workers)
        report = self._start("simulate", source, {"horizon": N, "samples": M, "workers": workers, "sigma2": sigma2})
        report.seeds = {"seed": seed}

        totals, comps = SimConfig(N, M, seed, workers).draw(instance)
        dist = distribution_from_samples(instance, totals)
        cov = covariance_from_samples(totals, comps, N, seed)
        sigma2_used = cov.sigma2_hat if sigma2 is None else sigma2

        outputs = {"N": N, "M": M, "seed": seed, "workers": workers, "support_points": int(dist.support.size),
                   "sigma2": sigma2_used, "sigma2_source": "sample" if sigma2 is None else "flag",
                   "covariance": cov.to_dict()}
        if instance.lattice.kind is LatticeKind.LATTICE:
            outputs["support_on_lattice"] = lattice_mesh_check(instance.lattice, dist)
        if sigma2_used > 0:
            clt = clt_check(instance, N, M, seed, sigma2_used, samples=totals)
            outputs["ks_statistic"] = clt.statistic
            outputs["ks_pvalue"] = clt.pvalue
        else:
            outputs["ks_statistic"] = None
            logger.warning("S_N is degenerate; skipping the CLT comparison")
        report.outputs = outputs

        out_dir = self._out_dir(out, "simulate", source.digest)
        report.files.append(write_csv(os.path.join(out_dir, "distribution.csv"), DISTRIBUTION_COLUMNS, dist.rows()))
        rows = [(i + 1, j + 1, cov.C[i, j], cov.C_stderr[i, j], cov.D[i, j], cov.D_stderr[i, j])
                for i in range(instance.ell) for j in range(instance.ell)]
        report.files.append(write_csv(os.path.join(out_dir, "covariance.csv"), COVARIANCE_COLUMNS, rows))
        return self._finish(report, out_dir, started)

    def cmd_llt(self, path: str, horizon: Optional[int] = None, samples: Optional[int] = None,
                seed: Optional[int] = None, workers: Optional[int] = None, out: Optional[str] = None,
                sigma2: Optional[float] = None) -> RunReport:
        started = time.time()
        source, instance = self._load(path)
        d = source.defaults
        N = self._setting(d, "horizon", "llt", horizon)
        M = self._setting(d, "samples", "llt", samples)
        seed = self._setting(d, "seed", "simulation", seed)
        sigma2 = self._setting(d, "sigma2", "llt", sigma2)
        workers = self._workers(workers)
        report = self._start("llt", source, {"horizon": N, "samples": M, "workers": workers, "sigma2": sigma2})
        report.seeds = {"seed": seed}

        if instance.lattice.kind is LatticeKind.OTHER:
            raise KindOther(f"lattice classification is Other: {instance.lattice.witness}")
        k_max = self.settings_manager.get_setting("analysis.k_max", config.DEFAULT_K_MAX)
        _, _, verdict = self._verdict(instance, k_max, self.settings_manager.get_setting("analysis.doeblin_n0"))
        if verdict.verdict in (Verdict.DEGENERATE_F_ELL_ZERO, Verdict.INCONCLUSIVE):
            raise DegenerateVariance(f"positivity verdict is {verdict.verdict.value}; {verdict.advice}")

        totals, _ = SimConfig(N, M, seed, workers).draw(instance)
        sigma2_used = float(totals.var() / N) if sigma2 is None else sigma2
        llt = llt_check(instance, N, M, seed, sigma2_used, samples=totals)

        report.outputs = {**llt.summary(), "workers": workers, "verdict": verdict.verdict.value,
                          "sigma2_source": "sample" if sigma2 is None else "flag"}
        out_dir = self._out_dir(out, "llt", source.digest)
        report.files.append(write_csv(os.path.join(out_dir, "llt.csv"), LLT_COLUMNS, llt.rows()))
        return self._finish(report, out_dir, started)

    def cmd_cf_scan(self, path: str, theta_grid: Optional[Sequence[float]] = None,
                    n_grid: Optional[Sequence[int]] = None, mode: Optional[str] = None,
                    samples: Optional[int] = None, seed: Optional[int] = None,
                    workers: Optional[int] = None, out: Optional[str] = None) -> RunReport:
        started = time.time()
        source, instance = self._load(path)
        d = source.defaults
        theta_grid = list(self._setting(d, "theta_grid", "cf_scan", theta_grid))
        n_grid = list(self._setting(d, "n_grid", "cf_scan", n_grid))
        mode = self._setting(d, "mode", "cf_scan", mode)
        if mode not in ("exact", "monte_carlo"):
            raise InvalidArgument(f"mode must be 'exact' or 'monte_carlo', got {mode!r}")
        monte_carlo = mode == "monte_carlo"
        M = self._setting(d, "samples", "cf_scan", samples) if monte_carlo else None
        seed = self._setting(d, "seed", "simulation", seed) if monte_carlo else None
        workers = self._workers(workers) if monte_carlo else None
        report = self._start("cf-scan", source, {"theta_grid": theta_grid, "n_grid": n_grid, "mode": mode,
                                                 "samples": M, "workers": workers})
        report.seeds = {"seed": seed}

        scan = cf_decay_scan(instance, theta_grid, n_grid, mode, M, seed, workers)
        outputs = {"scan": scan.summary(), "lattice": instance.lattice.to_dict()}
        if instance.lattice.kind is LatticeKind.LATTICE and mode == "exact":
            outputs["support_on_lattice"] = all(lattice_mesh_check(instance.lattice, exact_distribution(instance, n))
                                                for n in n_grid)

        positive = [t for t in theta_grid if t > 0]
        contraction_rows = []
        try:
            profile = contraction_profile(instance, positive)
            outputs["contraction"] = profile.summary()
            contraction_rows = profile.rows()
        except PositivityWindowUnavailable as e:
            logger.warning(f"Contraction profile skipped: {e}")
            outputs["contraction"] = {"unavailable": str(e)}
        report.outputs = outputs

        out_dir = self._out_dir(out, "cf-scan", source.digest)
        report.files.append(write_csv(os.path.join(out_dir, "cf.csv"), CF_COLUMNS, scan.rows()))
        report.files.append(write_csv(os.path.join(out_dir, "contraction.csv"), CONTRACTION_COLUMNS, contraction_rows))
        return self._finish(report, out_dir, started)
