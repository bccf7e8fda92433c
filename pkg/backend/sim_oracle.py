"""
Simulation and the exact oracle for S_N = sum_{n<=N} F(xi_n, xi_2n, ..., xi_ell*n).

Exact laws come from enumerating every path of a stationary chain; the
Monte Carlo side goes through PathSampler. Both feed the characteristic
function, CLT and local limit comparisons.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

import config
from .chain_core import FiniteChain
from .errors import CapExceeded, DegenerateVariance, InvalidArgument, KindMismatch, KindOther, LengthMismatch
from .exact_field import SQRT2, QSqrt2
from .lattice_classify import LatticeClassification, LatticeKind, classify
from .observable_decomp import Decomposition, Observable, center_and_decompose
from .path_sampler import PathSampler

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NonconvInstance:
    chain: FiniteChain
    observable: Observable
    decomposition: Decomposition
    lattice: LatticeClassification

    @property
    def ell(self) -> int:
        return self.observable.ell

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.observable.values == 0.0))


def build_instance(chain: FiniteChain, observable: Observable) -> NonconvInstance:
    """Centers, decomposes and classifies `observable` on `chain`."""
    if observable.values.size != chain.size ** observable.ell:
        raise LengthMismatch(f"observable table has {observable.values.size} entries for a "
                             f"{chain.size}-state chain at ell={observable.ell}")
    centered, decomposition = center_and_decompose(observable, chain)
    if decomposition.ell != centered.ell:
        raise LengthMismatch("decomposition length differs from the observable arity")
    return NonconvInstance(chain, centered, decomposition, classify(centered, chain))


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo request. Validates once; `draw` runs it."""
    horizon: int
    samples: int
    seed: int
    workers: Optional[int] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidArgument(f"horizon must be >= 1, got {self.horizon}")
        if self.samples < 1:
            raise InvalidArgument(f"samples must be >= 1, got {self.samples}")
        if self.workers is not None and self.workers < 1:
            raise InvalidArgument(f"workers must be >= 1, got {self.workers}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidArgument(f"seed must fit in 64 bits, got {self.seed}")

    def draw(self, instance: "NonconvInstance") -> Tuple[np.ndarray, np.ndarray]:
        """S_N and the component sums for every sample."""
        return PathSampler(instance, self.workers).sample(self.horizon, self.samples, self.seed)


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    kind: str
    support: np.ndarray
    mass: np.ndarray
    sample_count: Optional[int] = None
    stderr: Optional[np.ndarray] = None
    exact_support: Optional[Tuple[QSqrt2, ...]] = None

    def probability(self, value: float, tol: float = 1e-9) -> float:
        hit = np.abs(self.support - value) <= tol * max(1.0, abs(value))
        return float(self.mass[hit].sum())

    def total_variation(self, other: "EmpiricalDistribution", tol: float = 1e-9) -> float:
        points = np.union1d(self.support, other.support)
        return 0.5 * sum(abs(self.probability(u, tol) - other.probability(u, tol)) for u in points)

    def rows(self) -> List[tuple]:
        err = self.stderr if self.stderr is not None else np.zeros_like(self.mass)
        return [(float(u), float(p), float(e)) for u, p, e in zip(self.support, self.mass, err)]


@dataclass(frozen=True, eq=False)
class CFSample:
    theta_grid: np.ndarray
    n_grid: Tuple[int, ...]
    phi_values: np.ndarray
    mode: str
    sample_count: Optional[int] = None
    seed: Optional[int] = None
    periodicity_error: Optional[float] = None
    fitted_q: Optional[np.ndarray] = None
    fitted_r: Optional[float] = None


def evaluate_path(instance: NonconvInstance, path: Sequence[int]) -> Tuple[float, np.ndarray]:
    """S_N and the component sums S_{i,N} along a path xi_0..xi_{ell N} of state indices."""
    path = np.asarray(path, dtype=np.int64)
    ell = instance.ell
    if path.ndim != 1 or path.size < ell + 1 or (path.size - 1) % ell:
        raise InvalidArgument(f"path length {path.size} is not ell*N + 1 for ell={ell}")
    if path.min() < 0 or path.max() >= instance.chain.size:
        raise InvalidArgument("path contains an unknown state index")
    N = (path.size - 1) // ell
    totals, comps = PathSampler(instance, workers=1).path_sums(path[None, :], N)
    return float(totals[0]), comps[0]


def sample_S_N(instance: NonconvInstance, N: int, stream: np.random.Generator) -> Tuple[float, np.ndarray]:
    if N < 1:
        raise InvalidArgument(f"N must be >= 1, got {N}")
    sampler = PathSampler(instance, workers=1)
    totals, comps = sampler.path_sums(sampler.simulate_paths(N, stream, 1), N)
    return float(totals[0]), comps[0]


def _check_enum_cap(instance: NonconvInstance, N: int, max_enum: Optional[int]) -> None:
    cap = config.MAX_ENUM if max_enum is None else max_enum
    paths = instance.chain.size ** (instance.ell * N + 1)
    if paths > cap:
        raise CapExceeded(f"exact enumeration needs {instance.chain.size}^{instance.ell * N + 1} paths, "
                          f"cap is {cap} (set NLLT_MAX_ENUM to raise it)")


def _enumerate(chain: FiniteChain, ell: int, N: int, tables: Sequence[np.ndarray]):
    """
    Yields (prob, totals) per first state xi_1, flattened over xi_2..xi_{ell N}.
    xi_0 never enters the sum, and xi_1 is mu-distributed by stationarity.
    """
    S, L = chain.size, ell * N
    P, mu = chain.transition, chain.stationary
    dims = L - 1
    for first in range(S):
        if dims == 0:
            prob = np.array(mu[first])
        else:
            prob = mu[first] * P[first]
            for _ in range(dims - 1):
                prob = prob[..., :, None] * P
        totals = [np.zeros((1,) * dims, dtype=t.dtype) for t in tables]
        for n in range(1, N + 1):
            times = [n * i for i in range(1, ell + 1)]
            shape = [1] * dims
            for t in times[1:] if n == 1 else times:
                shape[t - 2] = S
            for k, table in enumerate(tables):
                term = table[first] if n == 1 else table
                totals[k] = totals[k] + term.reshape(shape)
        yield prob.ravel(), [np.broadcast_to(t, prob.shape).ravel() for t in totals]


def _scaled_exact_tables(observable: Observable, S: int):
    vals = observable.exact_values
    den = 1
    for v in vals:
        den = math.lcm(den, v.a.denominator, v.b.denominator)
    a = np.array([int(v.a * den) for v in vals], dtype=np.int64).reshape((S,) * observable.ell)
    b = np.array([int(v.b * den) for v in vals], dtype=np.int64).reshape((S,) * observable.ell)
    return den, a, b


def exact_distribution(instance: NonconvInstance, N: int, max_enum: Optional[int] = None) -> EmpiricalDistribution:
    if N < 1:
        raise InvalidArgument(f"N must be >= 1, got {N}")
    _check_enum_cap(instance, N, max_enum)
    chain, obs = instance.chain, instance.observable
    S = chain.size

    if obs.has_exact:
        den, a_tab, b_tab = _scaled_exact_tables(obs, S)
        probs, keys = [], []
        for prob, (a, b) in _enumerate(chain, obs.ell, N, [a_tab, b_tab]):
            keep = prob > 0
            probs.append(prob[keep])
            keys.append(np.stack([a[keep], b[keep]], axis=1))
        prob = np.concatenate(probs)
        uniq, inverse = np.unique(np.concatenate(keys), axis=0, return_inverse=True)
        mass = np.bincount(inverse.ravel(), weights=prob, minlength=len(uniq))
        support = uniq[:, 0] / den + (uniq[:, 1] / den) * SQRT2
        order = np.argsort(support, kind="stable")
        exact_support = tuple(QSqrt2(Fraction(int(uniq[i, 0]), den), Fraction(int(uniq[i, 1]), den))
                              for i in order)
        return EmpiricalDistribution("exact", support[order], mass[order], exact_support=exact_support)

    probs, values = [], []
    for prob, (total,) in _enumerate(chain, obs.ell, N, [obs.table(S)]):
        keep = prob > 0
        probs.append(prob[keep])
        values.append(total[keep])
    prob, value = np.concatenate(probs), np.concatenate(values)
    order = np.argsort(value, kind="stable")
    value, prob = value[order], prob[order]
    gaps = np.diff(value) > 1e-12 * np.maximum(1.0, np.abs(value[1:]))
    starts = np.concatenate([[0], np.flatnonzero(gaps) + 1])
    mass = np.add.reduceat(prob, starts)
    support = np.add.reduceat(value * prob, starts) / np.where(mass > 0, mass, 1.0)
    return EmpiricalDistribution("exact", support, mass)


def _bin_lattice(values: np.ndarray, h: float) -> np.ndarray:
    k = np.rint(values / h)
    residual = np.abs(values - k * h)
    if residual.max(initial=0.0) >= h * config.LATTICE_BIN_TOL:
        raise KindMismatch(f"sample off the lattice hZ with h={h:g} (residual {residual.max():.3g})")
    return k.astype(np.int64)


def empirical_distribution(instance: NonconvInstance, N: int, M: int, seed: int,
                           workers: Optional[int] = None) -> EmpiricalDistribution:
    totals, _ = SimConfig(N, M, seed, workers).draw(instance)
    return distribution_from_samples(instance, totals)


def distribution_from_samples(instance: NonconvInstance, totals: np.ndarray) -> EmpiricalDistribution:
    M = totals.size
    if instance.lattice.kind is LatticeKind.LATTICE:
        h = instance.lattice.h_float
        k, counts = np.unique(_bin_lattice(totals, h), return_counts=True)
        support = k * h
    else:
        support, counts = np.unique(totals, return_counts=True)
    mass = counts / M
    return EmpiricalDistribution("monte_carlo", support.astype(float), mass, M,
                                 np.sqrt(mass * (1.0 - mass) / M))


def _phi_from_distribution(dist: EmpiricalDistribution, theta: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.outer(theta, dist.support)) @ dist.mass


def _phi_from_samples(samples: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.array([np.exp(1j * t * samples).mean() for t in theta])


def characteristic_function(instance: NonconvInstance, N: Union[int, Sequence[int]], theta_grid,
                            mode: str = "exact", M: Optional[int] = None, seed: Optional[int] = None,
                            workers: Optional[int] = None) -> CFSample:
    """
    phi_N(theta) = E exp(i theta S_N) for each N and theta. Exact mode
    also measures the lattice periodicity defect at period 2*pi/h.
    """
    n_grid = (N,) if isinstance(N, (int, np.integer)) else tuple(int(n) for n in N)
    theta = np.asarray(theta_grid, dtype=float)
    if mode not in ("exact", "monte_carlo"):
        raise InvalidArgument(f"mode must be 'exact' or 'monte_carlo', got {mode!r}")
    if mode == "monte_carlo" and (M is None or seed is None):
        raise InvalidArgument("monte_carlo mode needs samples and a seed")

    lattice = instance.lattice.kind is LatticeKind.LATTICE
    phi = np.empty((len(n_grid), theta.size), dtype=complex)
    period_error = 0.0 if (mode == "exact" and lattice) else None
    for row, n in enumerate(n_grid):
        if mode == "exact":
            dist = exact_distribution(instance, n)
            phi[row] = _phi_from_distribution(dist, theta)
            if lattice:
                shifted = _phi_from_distribution(dist, theta + 2.0 * np.pi / instance.lattice.h_float)
                period_error = max(period_error, float(np.abs(shifted - phi[row]).max(initial=0.0)))
        else:
            totals, _ = SimConfig(n, M, seed, workers).draw(instance)
            phi[row] = _phi_from_samples(totals, theta)
    phi[:, theta == 0.0] = 1.0

    if period_error is not None and period_error > 1e-10:
        logger.warning(f"Characteristic function periodicity defect {period_error:.3g} exceeds 1e-10")
    return CFSample(theta, n_grid, phi, mode, M if mode == "monte_carlo" else None,
                    seed if mode == "monte_carlo" else None, period_error)


@dataclass(frozen=True)
class CLTReport:
    statistic: float
    pvalue: float
    N: int
    M: int
    seed: int
    sigma2: float


def clt_check(instance: NonconvInstance, N: int, M: int, seed: int, sigma2: float,
              workers: Optional[int] = None, samples: Optional[np.ndarray] = None) -> CLTReport:
    """Kolmogorov-Smirnov distance between N^{-1/2} S_N and Normal(0, sigma2)."""
    if not sigma2 > 0:
        raise DegenerateVariance(f"CLT comparison needs sigma2 > 0, got {sigma2!r}")
    if samples is None:
        samples, _ = SimConfig(N, M, seed, workers).draw(instance)
    result = stats.kstest(samples / math.sqrt(N), "norm", args=(0.0, math.sqrt(sigma2)))
    return CLTReport(float(result.statistic), float(result.pvalue), N, int(samples.size), seed, sigma2)


@dataclass(frozen=True, eq=False)
class LLTReport:
    kind: LatticeKind
    N: int
    M: int
    seed: int
    sigma2: float
    scale: float
    u: np.ndarray
    L: np.ndarray
    R: np.ndarray
    stderr: np.ndarray
    h: Optional[float] = None
    half_width: Optional[float] = None

    @property
    def max_deviation(self) -> float:
        return float(np.abs(self.L - self.R).max(initial=0.0))

    @property
    def noise_share(self) -> float:
        return float(3.0 * self.stderr.max(initial=0.0))

    @property
    def bias_share(self) -> float:
        return max(0.0, self.max_deviation - self.noise_share)

    def rows(self) -> List[tuple]:
        return [(float(u), float(l), float(r), float(e)) for u, l, r, e in zip(self.u, self.L, self.R, self.stderr)]

    def summary(self) -> dict:
        return {
            "kind": self.kind.value, "N": self.N, "M": self.M, "seed": self.seed, "sigma2": self.sigma2,
            "h": self.h, "half_width": self.half_width, "points": int(self.u.size),
            "max_deviation": self.max_deviation, "noise_share": self.noise_share, "bias_share": self.bias_share,
        }


def _triangle(x: np.ndarray, half_width: float) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(x) / half_width)


def llt_check(instance: NonconvInstance, N: int, M: int, seed: int, sigma2: float,
              half_width: Optional[float] = None, workers: Optional[int] = None,
              samples: Optional[np.ndarray] = None) -> LLTReport:
    """
    Lattice: sigma*sqrt(2 pi N) P{S_N = u} against h exp(-u^2 / (2 N sigma2))
    for u in hZ within two standard deviations. Non-lattice: the same with the
    triangle test function of the given half-width, over a fixed u-grid.
    """
    kind = instance.lattice.kind
    if kind is LatticeKind.OTHER:
        raise KindOther(f"local limit comparison is not defined for kind Other ({instance.lattice.witness})")
    if not sigma2 > 0:
        raise DegenerateVariance(f"local limit comparison needs sigma2 > 0, got {sigma2!r}")
    if samples is None:
        samples, _ = SimConfig(N, M, seed, workers).draw(instance)
    M = int(samples.size)
    sigma = math.sqrt(sigma2)
    scale = sigma * math.sqrt(2.0 * math.pi * N)
    bound = 2.0 * sigma * math.sqrt(N)

    if kind is LatticeKind.LATTICE:
        h = instance.lattice.h_float
        ks = np.arange(math.ceil(-bound / h), math.floor(bound / h) + 1)
        binned = _bin_lattice(samples, h)
        lo = int(binned.min())
        counts = np.bincount(binned - lo)
        idx = ks - lo
        inside = (idx >= 0) & (idx < counts.size)
        p = np.zeros(ks.size)
        p[inside] = counts[idx[inside]] / M
        u = ks * h
        return LLTReport(kind, N, M, seed, sigma2, scale, u, scale * p,
                         h * np.exp(-u ** 2 / (2.0 * N * sigma2)),
                         scale * np.sqrt(p * (1.0 - p) / M), h=h)

    w = config.TRIANGLE_HALF_WIDTH if half_width is None else half_width
    u = np.linspace(-bound, bound, config.NON_LATTICE_U_POINTS)
    means = np.empty(u.size)
    errs = np.empty(u.size)
    for j, point in enumerate(u):
        g = _triangle(samples - point, w)
        means[j] = g.mean()
        errs[j] = g.std() / math.sqrt(M)
    return LLTReport(kind, N, M, seed, sigma2, scale, u, scale * means,
                     w * np.exp(-u ** 2 / (2.0 * N * sigma2)), scale * errs, half_width=w)


@dataclass(frozen=True)
class LLTTrend:
    reports: Tuple[LLTReport, ...]
    bias_shares: Tuple[float, ...]
    non_increasing: bool


def llt_trend(instance: NonconvInstance, horizons: Sequence[int], M: int, seed: int, sigma2: float,
              workers: Optional[int] = None) -> LLTTrend:
    """
    LLT deviation over increasing horizons. The bias share counts as
    non-increasing when each step rises by no more than the later noise share.
    """
    horizons = sorted(int(n) for n in horizons)
    reports = tuple(llt_check(instance, n, M, seed, sigma2, workers=workers) for n in horizons)
    shares = tuple(r.bias_share for r in reports)
    ok = all(later.bias_share <= earlier.bias_share + later.noise_share
             for earlier, later in zip(reports, reports[1:]))
    return LLTTrend(reports, shares, ok)
