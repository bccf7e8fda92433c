"""
Fourier operators Phi_x(theta) = P^ell diag(exp(i theta F(x, .))) on a finite
state space, their two-block contraction numbers rho_theta(x), and scans
of the characteristic-function decay |phi_N(theta)| in N.
"""

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

import config
from .chain_core import FiniteChain, positivity_index
from .errors import InvalidArgument, PositivityWindowUnavailable
from .lattice_classify import LatticeKind
from .observable_decomp import Observable
from .sim_oracle import CFSample, NonconvInstance, characteristic_function

logger = logging.getLogger(__name__)

EXACT_PHI_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class FourierOperator:
    prefix: Tuple[int, ...]
    theta: float
    matrix: np.ndarray
    block_length: int

    def sup_norm(self) -> float:
        return float(np.abs(self.matrix).sum(axis=1).max())


@dataclass(frozen=True, eq=False)
class ContractionProfile:
    """
    rho_theta per (theta, prefix). r_fit is one quadratic rate, fitted at
    small theta to the smallest gap 1 - rho_theta over the prefixes that
    contract at all; r_by_prefix holds the per-prefix rates.
    """
    theta_grid: np.ndarray
    prefixes: Tuple[Tuple[int, ...], ...]
    prefix_mass: np.ndarray
    rho: np.ndarray
    block_length: int
    r_fit: float
    r_by_prefix: np.ndarray
    curvature: np.ndarray

    @property
    def rho_min(self) -> np.ndarray:
        return self.rho.min(axis=1)

    @property
    def rho_max(self) -> np.ndarray:
        return self.rho.max(axis=1)

    @property
    def rho_mean(self) -> np.ndarray:
        return self.rho.mean(axis=1)

    def contracting(self, row: int) -> List[int]:
        """Prefix indices with rho < 1 at theta_grid[row] (the set G)."""
        return [int(i) for i in np.flatnonzero(self.rho[row] < 1.0 - 1e-12)]

    def contracting_mass(self, row: int) -> float:
        return float(self.prefix_mass[self.contracting(row)].sum())

    def rows(self) -> List[tuple]:
        return [(float(t), j, float(self.rho[i, j]))
                for i, t in enumerate(self.theta_grid) for j in range(len(self.prefixes))]

    def summary(self) -> dict:
        return {
            "block_length": self.block_length,
            "r_fit": self.r_fit,
            "r_prefixes": int(np.count_nonzero(self.r_by_prefix > 1e-12)),
            "curvature_min": float(self.curvature.min()),
            "per_theta": [{
                "theta": float(t), "rho_min": float(self.rho_min[i]), "rho_max": float(self.rho_max[i]),
                "rho_mean": float(self.rho_mean[i]), "contracting": len(self.contracting(i)),
                "contracting_mass": self.contracting_mass(i),
            } for i, t in enumerate(self.theta_grid)],
        }


@dataclass(frozen=True, eq=False)
class ContractionScan:
    cf: CFSample
    abs_phi: np.ndarray
    q_fit: np.ndarray
    q_residual: np.ndarray
    q_in_window: np.ndarray
    r_fit: Optional[float]
    r_residual: Optional[float]
    below_noise_floor: np.ndarray
    noise_floor: Optional[float]
    rho_values: Optional[np.ndarray] = None

    @property
    def theta_grid(self) -> np.ndarray:
        return self.cf.theta_grid

    def rows(self) -> List[tuple]:
        out = []
        for i, n in enumerate(self.cf.n_grid):
            for j, t in enumerate(self.theta_grid):
                out.append((float(t), n, float(self.abs_phi[i, j]), self.cf.mode, bool(self.below_noise_floor[i, j])))
        return out

    def summary(self) -> dict:
        return {
            "mode": self.cf.mode,
            "n_grid": list(self.cf.n_grid),
            "noise_floor": self.noise_floor,
            "periodicity_error": self.cf.periodicity_error,
            "q_fit": [{"theta": float(t), "q": None if np.isnan(q) else float(q),
                       "residual": None if np.isnan(res) else float(res), "in_window": bool(w)}
                      for t, q, res, w in zip(self.theta_grid, self.q_fit, self.q_residual, self.q_in_window)],
            "r_fit": self.r_fit,
            "r_residual": self.r_residual,
            "below_noise_floor": int(self.below_noise_floor.sum()),
        }


def block_length(chain: FiniteChain, ell: int, override: Optional[int] = None) -> int:
    """Smallest m with (m - 2) ell >= k, k the least positivity exponent of P."""
    k = positivity_index(chain)
    if k is None:
        raise PositivityWindowUnavailable(f"no power P^k with k <= {chain.size ** 2} is strictly positive")
    m = 2 + math.ceil(k / ell)
    if override is not None:
        if override < m:
            raise PositivityWindowUnavailable(f"block length {override} too short: need (m-2)*{ell} >= {k}")
        m = override
    if m > config.BLOCK_LENGTH_CAP:
        raise PositivityWindowUnavailable(f"block length {m} exceeds cap {config.BLOCK_LENGTH_CAP}")
    return m


def _last_slice(chain: FiniteChain, observable: Observable, prefix: Sequence[int]) -> np.ndarray:
    prefix = tuple(int(x) for x in prefix)
    if len(prefix) != observable.ell - 1:
        raise InvalidArgument(f"prefix {prefix} has length {len(prefix)}, expected {observable.ell - 1}")
    return np.asarray(observable.table(chain.size)[prefix], dtype=float)


def _phase(chain, observable, prefix, theta) -> np.ndarray:
    return np.exp(1j * theta * _last_slice(chain, observable, prefix))


def phi_operator(chain: FiniteChain, observable: Observable, prefix: Sequence[int], theta: float,
                 m: Optional[int] = None) -> FourierOperator:
    m = block_length(chain, observable.ell, m)
    Pl = chain.power(observable.ell)
    matrix = Pl * _phase(chain, observable, prefix, theta)[None, :]
    matrix.setflags(write=False)
    return FourierOperator(tuple(int(x) for x in prefix), float(theta), matrix, m)


def rho_theta(chain: FiniteChain, observable: Observable, prefix: Sequence[int], theta: float,
              m: Optional[int] = None) -> float:
    """max_a sum_b p^((m-2)ell)_ab sum_d |sum_c p^(ell)_bc exp(i theta F(prefix, c)) p^(ell)_cd|"""
    ell = observable.ell
    m = block_length(chain, ell, m)
    phase = _phase(chain, observable, prefix, theta)
    if theta == 0.0:
        return 1.0
    Pl = chain.power(ell)
    bridge = np.abs((Pl * phase[None, :]) @ Pl).sum(axis=1)
    value = float((chain.power((m - 2) * ell) @ bridge).max())
    return min(max(value, 0.0), 1.0)


def phase_constant_on_bridges(chain: FiniteChain, observable: Observable, prefix: Sequence[int],
                              theta: float, tol: float = 1e-12) -> bool:
    """True iff exp(i theta F(prefix, c)) is constant over each {c : p_bc > 0, p_cd > 0}."""
    Pl = chain.power(observable.ell)
    phase = _phase(chain, observable, prefix, theta)
    S = chain.size
    for b in range(S):
        for d in range(S):
            bridge = np.flatnonzero((Pl[b] > 0) & (Pl[:, d] > 0))
            if bridge.size > 1 and np.abs(phase[bridge] - phase[bridge[0]]).max() > tol:
                return False
    return True


def curvature_coefficient(chain: FiniteChain, observable: Observable, prefix: Sequence[int],
                          m: Optional[int] = None) -> float:
    """
    Leading coefficient r with 1 - rho_theta(prefix) ~ r theta^2 as theta -> 0:
    half the smallest P^((m-2)ell)-average of the bridge-weighted variance of F(prefix, .).
    """
    ell = observable.ell
    m = block_length(chain, ell, m)
    Pl = chain.power(ell)
    F = _last_slice(chain, observable, prefix)
    w = Pl[:, :, None] * Pl[None, :, :]  # w[b, c, d] = p_bc p_cd
    mass = w.sum(axis=1)
    mean = (w * F[None, :, None]).sum(axis=1) / np.where(mass > 0, mass, 1.0)
    kappa = (w * (F[None, :, None] - mean[:, None, :]) ** 2).sum(axis=(1, 2))
    return float(0.5 * (chain.power((m - 2) * ell) @ kappa).min())


def operator_product_norm(chain: FiniteChain, observable: Observable, prefixes: Sequence[Sequence[int]],
                          theta: float) -> float:
    """Sup-norm of Phi_{x_1}(theta) ... Phi_{x_m}(theta)."""
    if not prefixes:
        raise InvalidArgument("need at least one prefix")
    Pl = chain.power(observable.ell)
    product = np.eye(chain.size, dtype=complex)
    for prefix in prefixes:
        product = product @ (Pl * _phase(chain, observable, prefix, theta)[None, :])
    return float(np.abs(product).sum(axis=1).max())


def cf_via_operator(chain: FiniteChain, observable: Observable, N: int, theta: float) -> complex:
    """mu^T Phi(theta)^N 1, the characteristic function of S_N when ell = 1."""
    if observable.ell != 1:
        raise InvalidArgument("a single transfer operator generates phi_N only for ell = 1")
    op = chain.transition * _phase(chain, observable, (), theta)[None, :]
    v = np.ones(chain.size, dtype=complex)
    for _ in range(N):
        v = op @ v
    return complex(chain.stationary @ v)


def _prefixes(instance: NonconvInstance) -> Tuple[Tuple[Tuple[int, ...], ...], np.ndarray]:
    mu = instance.chain.stationary
    prefixes, mass = [], []
    for prefix in itertools.product(range(instance.chain.size), repeat=instance.ell - 1):
        weight = float(np.prod([mu[i] for i in prefix]))
        if weight > 0.0:
            prefixes.append(prefix)
            mass.append(weight)
    return tuple(prefixes), np.array(mass)


def _fit_through_origin(x: np.ndarray, y: np.ndarray) -> Tuple[Optional[float], Optional[float]]:
    if x.size == 0 or not np.any(x):
        return None, None
    coef = float(x @ y / (x @ x))
    norm = float(np.linalg.norm(y))
    return coef, float(np.linalg.norm(y - coef * x) / norm) if norm > 0 else 0.0


def _small_theta_grid() -> np.ndarray:
    return np.linspace(config.SMALL_THETA_MAX / 10.0, config.SMALL_THETA_MAX, 10)


def contraction_profile(instance: NonconvInstance, theta_grid: Sequence[float],
                        m: Optional[int] = None) -> ContractionProfile:
    chain, obs = instance.chain, instance.observable
    m = block_length(chain, obs.ell, m)
    theta = np.asarray(theta_grid, dtype=float)
    if instance.lattice.kind is LatticeKind.LATTICE:
        top = math.pi / instance.lattice.h_float
        if np.any((theta <= 0) | (theta > top + 1e-12)):
            logger.warning(f"theta grid leaves (0, pi/h] = (0, {top:.6g}] for a lattice instance")

    prefixes, mass = _prefixes(instance)
    rho = np.array([[rho_theta(chain, obs, p, t, m) for p in prefixes] for t in theta]).reshape(theta.size, len(prefixes))

    small = _small_theta_grid()
    gaps = np.array([[1.0 - rho_theta(chain, obs, p, t, m) for t in small] for p in prefixes])
    r_by_prefix = np.array([_fit_through_origin(small ** 2, gap)[0] for gap in gaps])
    # one r for all contracting prefixes: fit their pointwise smallest gap
    contracting = r_by_prefix > 1e-12
    r_fit = _fit_through_origin(small ** 2, gaps[contracting].min(axis=0))[0] if contracting.any() else 0.0
    curvature = np.array([curvature_coefficient(chain, obs, p, m) for p in prefixes])
    return ContractionProfile(theta, prefixes, mass, rho, m, float(r_fit), r_by_prefix, curvature)


def _q_window(instance: NonconvInstance) -> Tuple[float, float]:
    margin = config.LARGE_THETA_MARGIN
    if instance.lattice.kind is LatticeKind.LATTICE:
        return margin, math.pi / instance.lattice.h_float - margin
    return margin, config.NON_LATTICE_THETA_MAX


def cf_decay_scan(instance: NonconvInstance, theta_list: Sequence[float], n_grid: Sequence[int],
                  mode: str = "exact", M: Optional[int] = None, seed: Optional[int] = None,
                  workers: Optional[int] = None, with_rho: bool = False,
                  m: Optional[int] = None) -> ContractionScan:
    """
    Fits -log|phi_N(theta)| ~ q N per theta, and -log|phi_N(theta)| ~ r N theta^2
    over the small-theta family. Theta = 0 stays in the table but never in a fit.
    """
    cf = characteristic_function(instance, n_grid, theta_list, mode, M, seed, workers)
    theta = cf.theta_grid
    ns = np.array(cf.n_grid, dtype=float)
    abs_phi = np.minimum(np.abs(cf.phi_values), 1.0)

    if mode == "monte_carlo":
        floor = config.NOISE_FLOOR_FACTOR / math.sqrt(M)
        below = abs_phi < floor
        if below.any():
            logger.warning(f"{int(below.sum())} CF points below the noise floor {floor:.3g}")
    else:
        floor = None
        below = np.zeros_like(abs_phi, dtype=bool)
    usable = ~below & (abs_phi > EXACT_PHI_FLOOR)

    lo, hi = _q_window(instance)
    q = np.full(theta.size, np.nan)
    q_res = np.full(theta.size, np.nan)
    in_window = (theta >= lo) & (theta <= hi)
    for j, t in enumerate(theta):
        if t == 0.0:
            q[j], q_res[j] = 0.0, 0.0
            in_window[j] = False
            continue
        keep = usable[:, j]
        if keep.sum() < 2:
            continue
        y = -np.log(abs_phi[keep, j])
        x = ns[keep]
        slope, intercept = np.polyfit(x, y, 1)
        norm = float(np.linalg.norm(y))
        q[j] = float(slope)
        q_res[j] = float(np.linalg.norm(y - (slope * x + intercept)) / norm) if norm > 0 else 0.0

    small = (theta > 0.0) & (theta <= config.SMALL_THETA_MAX)
    xs, ys = [], []
    for j in np.flatnonzero(small):
        keep = usable[:, j]
        xs.extend(ns[keep] * theta[j] ** 2)
        ys.extend(-np.log(abs_phi[keep, j]))
    r, r_res = _fit_through_origin(np.array(xs), np.array(ys))

    rho_values = None
    if with_rho:
        prefixes, _ = _prefixes(instance)
        rho_values = np.array([[rho_theta(instance.chain, instance.observable, p, t, m) for p in prefixes]
                               for t in theta]).reshape(theta.size, len(prefixes))

    cf = replace(cf, fitted_q=q, fitted_r=r)
    return ContractionScan(cf, abs_phi, q, q_res, in_window, r, r_res, below, floor, rho_values)
