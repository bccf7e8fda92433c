"""
Asymptotic variances of nonconventional sums.

s_ell^2 is exact: the asymptotic variance of F_ell along the product chain
P (x) P^2 (x) ... (x) P^ell, from one Poisson solve. sigma^2 and the
component covariances are Monte Carlo estimates. positivity_verdict turns
both into a certified or empirical statement about sigma^2 > 0.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

import config
from .chain_core import FiniteChain, MixingProfile, check_product_size, product_apply, product_chain
from .errors import BudgetExceeded, InvalidArgument, SolveFailed
from .observable_decomp import Decomposition, is_F_ell_zero, product_weights
from .path_sampler import PathSampler

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    POSITIVE_CERTIFIED = "PositiveCertified"
    POSITIVE_EMPIRICAL = "PositiveEmpirical"
    DEGENERATE_F_ELL_ZERO = "DegenerateFEllZero"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class SigmaEstimate:
    sigma2_hat: float
    stderr: float
    n_grid: Tuple[int, ...]
    per_n: Tuple[Tuple[int, float, float], ...]
    slope: float
    extrapolated: float
    samples: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "sigma2_hat": self.sigma2_hat, "stderr": self.stderr, "n_grid": list(self.n_grid),
            "per_n": [{"N": n, "value": v, "stderr": e} for n, v, e in self.per_n],
            "slope": self.slope, "extrapolated": self.extrapolated,
            "samples": self.samples, "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    N: int
    samples: int
    seed: int
    C: np.ndarray
    C_stderr: np.ndarray
    D: np.ndarray
    D_stderr: np.ndarray
    sigma2_hat: float
    sigma2_stderr: float

    @property
    def total(self) -> float:
        return float(self.C.sum())

    @property
    def reconciles(self) -> bool:
        """sum C_ij agrees with var(S_N)/N within three standard errors."""
        return abs(self.total - self.sigma2_hat) <= 3.0 * self.sigma2_stderr + 1e-12

    def to_dict(self) -> dict:
        return {
            "N": self.N, "samples": self.samples, "seed": self.seed,
            "C": self.C.tolist(), "C_stderr": self.C_stderr.tolist(),
            "D": self.D.tolist(), "D_stderr": self.D_stderr.tolist(),
            "sum_C": self.total, "sigma2_hat": self.sigma2_hat, "sigma2_stderr": self.sigma2_stderr,
            "reconciles": self.reconciles,
        }


@dataclass(frozen=True)
class VarianceReport:
    s_ell2: float
    lower_bound: float
    verdict: Verdict
    basis: List[str] = field(default_factory=list)
    sigma2_hat: Optional[SigmaEstimate] = None
    D_hat: Optional[CovarianceEstimate] = None
    advice: Optional[str] = None
    bound_consistent: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "s_ell2": self.s_ell2,
            "lower_bound": self.lower_bound,
            "verdict": self.verdict.value,
            "basis": list(self.basis),
            "sigma2_hat": None if self.sigma2_hat is None else self.sigma2_hat.to_dict(),
            "D_hat": None if self.D_hat is None else self.D_hat.to_dict(),
            "advice": self.advice,
            "bound_consistent": self.bound_consistent,
        }


def _last_component(chain: FiniteChain, decomposition: Decomposition, cap: Optional[int]):
    check_product_size(chain, decomposition.ell, cap)
    w = product_weights(chain, decomposition.ell)
    f = np.asarray(decomposition.last, dtype=float).ravel()
    return f - w @ f, w


def _transition_apply(chain: FiniteChain, ell: int) -> Callable[[np.ndarray], np.ndarray]:
    if chain.size ** ell <= config.DENSE_SOLVE_CAP:
        T = product_chain(chain, ell).transition
        return lambda v: T @ v
    return lambda v: product_apply(chain, ell, v)


def _dense_poisson(chain: FiniteChain, ell: int, f: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, float]:
    T = product_chain(chain, ell).transition
    size = T.shape[0]
    A = np.eye(size) - T + np.outer(np.ones(size), w)
    try:
        g = np.linalg.solve(A, f)
    except np.linalg.LinAlgError as exc:
        raise SolveFailed(f"Poisson equation on the product chain is singular: {exc}") from exc
    return g, float(np.abs(A @ g - f).max())


def _iterative_poisson(chain: FiniteChain, ell: int, f: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, float]:
    def matvec(v):
        v = np.ravel(v)
        return v - product_apply(chain, ell, v) + (w @ v)

    A = LinearOperator((f.size, f.size), matvec=matvec, dtype=float)
    g, info = gmres(A, f, rtol=config.ITERATIVE_SOLVE_TOL, atol=0.0,
                    restart=config.GMRES_RESTART, maxiter=config.GMRES_MAXITER)
    if info < 0:
        raise SolveFailed(f"GMRES broke down on the {f.size}-state product chain (info={info})")
    if info > 0:
        logger.warning(f"GMRES stopped after {info} iterations without reaching {config.ITERATIVE_SOLVE_TOL:g}")
    return g, float(np.abs(matvec(g) - f).max())


def s_ell_squared(chain: FiniteChain, decomposition: Decomposition, cap: Optional[int] = None) -> float:
    """
    2<f, g> - <f, f> in L2(mu^ell), where (I - T) g = f on mean-zero functions.

    Up to DENSE_SOLVE_CAP product states the system is solved densely; past
    it, GMRES runs on the Kronecker-structured operator.
    """
    f, w = _last_component(chain, decomposition, cap)
    if not np.any(f):
        return 0.0
    ell = decomposition.ell
    if f.size <= config.DENSE_SOLVE_CAP:
        g, residual = _dense_poisson(chain, ell, f, w)
        tol = config.POISSON_RESIDUAL_TOL
    else:
        g, residual = _iterative_poisson(chain, ell, f, w)
        tol = config.ITERATIVE_RESIDUAL_TOL
    if not np.isfinite(residual) or residual > tol * max(1.0, float(np.abs(f).max())):
        raise SolveFailed(f"Poisson solve residual {residual:.3g}; the product chain has a second unit eigenvalue")

    value = float(2.0 * (w @ (f * g)) - w @ (f * f))
    if value < -config.S_ELL_CLAMP_TOL:
        raise SolveFailed(f"s_ell^2 came out negative ({value:.3g})")
    if value < 0.0:
        logger.warning(f"Clamping s_ell^2 = {value:.3g} to zero")
        value = 0.0
    return value


def s_ell_squared_series(chain: FiniteChain, decomposition: Decomposition, K: int = config.SERIES_TERMS,
                         cap: Optional[int] = None) -> float:
    """<f, f> + 2 sum_{k=1}^{K} <f, T^k f>, the truncated covariance series."""
    f, w = _last_component(chain, decomposition, cap)
    apply = _transition_apply(chain, decomposition.ell)
    total = float(w @ (f * f))
    v = f
    for _ in range(K):
        v = apply(v)
        total += 2.0 * float(w @ (f * v))
    return total


def _check_grid(n_grid: Sequence[int]) -> Tuple[int, ...]:
    grid = tuple(int(n) for n in n_grid)
    if len(grid) < 3:
        raise InvalidArgument(f"N-grid needs at least 3 points, got {len(grid)}")
    if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise InvalidArgument(f"N-grid must be positive and strictly ascending, got {list(grid)}")
    return grid


def _variance_with_stderr(x: np.ndarray) -> Tuple[float, float]:
    # stderr of the sample variance from the fourth central moment
    centered = x - x.mean()
    var = float(np.mean(centered ** 2))
    m4 = float(np.mean(centered ** 4))
    return var, float(np.sqrt(max(m4 - var * var, 0.0) / x.size))


def sigma_squared_estimate(instance, n_grid: Sequence[int], samples_per_n: int, seed: int,
                           workers: Optional[int] = None) -> SigmaEstimate:
    grid = _check_grid(n_grid)
    steps = float(samples_per_n) * sum(instance.ell * n + 1 for n in grid)
    if steps > config.SIM_STEP_BUDGET:
        raise BudgetExceeded(f"{steps:.3g} chain steps over the N-grid, budget is {config.SIM_STEP_BUDGET:.3g}")

    sampler = PathSampler(instance, workers)
    per_n = []
    for n in grid:
        totals, _ = sampler.sample(n, samples_per_n, seed)
        var, err = _variance_with_stderr(totals)
        per_n.append((n, var / n, err / n))

    inv = np.array([1.0 / n for n, _, _ in per_n])
    values = np.array([v for _, v, _ in per_n])
    slope, intercept = np.polyfit(inv, values, 1)
    _, top, top_err = per_n[-1]
    logger.info(f"sigma^2 estimate {top:.6g} +/- {top_err:.2g} at N={grid[-1]}, grid slope {slope:.3g}")
    return SigmaEstimate(top, top_err, grid, tuple(per_n), float(slope), float(intercept), samples_per_n, seed)


def _cross_stderr(a: np.ndarray, b: np.ndarray) -> float:
    prod = (a - a.mean()) * (b - b.mean())
    return float(prod.std() / np.sqrt(a.size))


def covariance_matrix(instance, N: int, samples: int, seed: int, workers: Optional[int] = None) -> CovarianceEstimate:
    totals, comps = PathSampler(instance, workers).sample(N, samples, seed)
    return covariance_from_samples(totals, comps, N, seed)


def covariance_from_samples(totals: np.ndarray, comps: np.ndarray, N: int, seed: int) -> CovarianceEstimate:
    """C_ij = Cov(S_{i,N}, S_{j,N}) / N and D_ij = C_ij / min(i, j)."""
    ell = comps.shape[1]
    centered = comps - comps.mean(axis=0)
    C = (centered.T @ centered) / comps.shape[0] / N
    C_err = np.empty((ell, ell))
    for i in range(ell):
        for j in range(ell):
            C_err[i, j] = _cross_stderr(comps[:, i], comps[:, j]) / N
    idx = np.arange(1, ell + 1)
    scale = np.minimum.outer(idx, idx).astype(float)
    var, err = _variance_with_stderr(totals)
    return CovarianceEstimate(N, int(totals.size), seed, C, C_err, C / scale, C_err / scale, var / N, err / N)


def positivity_verdict(instance, mixing_profile: MixingProfile, s_ell2: float,
                       sigma2_hat: Optional[SigmaEstimate] = None,
                       d_hat: Optional[CovarianceEstimate] = None) -> VarianceReport:
    ell = instance.ell
    lower = s_ell2 / (2 * ell)
    basis = []
    advice = None

    if is_F_ell_zero(instance.decomposition):
        verdict = Verdict.DEGENERATE_F_ELL_ZERO
        basis.append("F_ell == 0")
        advice = (f"F does not depend on its last coordinate; reduce the arity to {ell - 1}"
                  if ell > 1 else "F is constant; S_N vanishes after centering")
    else:
        basis.append("F_ell != 0")
        rho_ok = mixing_profile.rho[ell] < 1.0
        delta_ok = mixing_profile.delta[ell] < 1.0
        if rho_ok:
            basis.append(f"rho_ell < 1 ({mixing_profile.rho[ell]:.6g})")
            # finite chain with mu > 0: P(x, .) is absolutely continuous w.r.t. mu
            basis.append("absolute continuity: sigma^2 = 0 only if F = 0")
        if delta_ok:
            basis.append(f"delta_ell < 1 ({mixing_profile.delta[ell]:.6g})")
        overlap = mixing_profile.cond_2_20
        if overlap.rows and overlap.columns:
            basis.append("P^ell row and column overlap")
        if mixing_profile.doeblin is not None:
            basis.append(f"Doeblin at n0={mixing_profile.doeblin.n0}")

        if rho_ok or delta_ok:
            verdict = Verdict.POSITIVE_CERTIFIED
        elif s_ell2 > config.S_ELL_CLAMP_TOL:
            verdict = Verdict.POSITIVE_EMPIRICAL
            basis.append(f"s_ell^2 > 0, sigma^2 >= {lower:.6g}")
        else:
            verdict = Verdict.INCONCLUSIVE
            advice = "F_ell may be a coboundary along the product chain; no positivity claim"

    consistent = None
    if sigma2_hat is not None and verdict in (Verdict.POSITIVE_CERTIFIED, Verdict.POSITIVE_EMPIRICAL):
        consistent = sigma2_hat.sigma2_hat >= lower - 3.0 * sigma2_hat.stderr
        if not consistent:
            logger.warning(f"sigma^2 estimate {sigma2_hat.sigma2_hat:.6g} is below the bound {lower:.6g}")

    return VarianceReport(s_ell2, lower, verdict, basis, sigma2_hat, d_hat, advice, consistent)
