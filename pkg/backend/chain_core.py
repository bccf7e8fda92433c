"""
Finite-state Markov chains and the chain-level coefficients the limit
theorems consume: k-step kernels, psi-mixing, Dobrushin contraction,
maximal correlation, Doeblin certificates, the row-overlap
conditions and the product chain of copies run at speeds 1..ell.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

import config
from .errors import CapExceeded, InvalidArgument, NonStochastic, NotConverged, ZeroMassState
from .exact_field import to_fraction

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FiniteChain:
    states: Tuple
    transition: np.ndarray
    stationary: np.ndarray
    exact_transition: Optional[Tuple[Tuple[Fraction, ...], ...]] = None
    exact_stationary: Optional[Tuple[Fraction, ...]] = None

    @property
    def size(self) -> int:
        return len(self.states)

    def power(self, k: int) -> np.ndarray:
        return _matrix_power(self, k)


@lru_cache(maxsize=256)
def _cached_power(k: int, transition_bytes: bytes, size: int) -> np.ndarray:
    P = np.frombuffer(transition_bytes, dtype=float).reshape(size, size)
    out = np.linalg.matrix_power(P, k)
    out.setflags(write=False)
    return out


def _matrix_power(chain: FiniteChain, k: int) -> np.ndarray:
    return _cached_power(k, chain.transition.tobytes(), chain.size)


@dataclass(frozen=True)
class DoeblinCertificate:
    gamma: float
    n0: int
    reference: Tuple[float, ...]


@dataclass(frozen=True)
class OverlapConditions:
    rows: bool
    columns: bool
    row_overlap: float
    column_overlap: float
    positivity_index: Optional[int]

    def __iter__(self):
        # unpacks as the (bool, bool) pair
        return iter((self.rows, self.columns))


@dataclass(frozen=True)
class MixingProfile:
    ell: int
    psi: Dict[int, float]
    delta: Dict[int, float]
    rho: Dict[int, float]
    doeblin: Optional[DoeblinCertificate]
    cond_2_13: bool
    cond_2_13_plus: bool
    cond_2_20: OverlapConditions
    psi_alpha: Optional[float] = None
    ergodicity_rate: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ell": self.ell,
            "psi": {str(k): v for k, v in self.psi.items()},
            "delta": {str(k): v for k, v in self.delta.items()},
            "rho": {str(k): v for k, v in self.rho.items()},
            "doeblin": None if self.doeblin is None else {
                "gamma": self.doeblin.gamma, "n0": self.doeblin.n0, "reference": "stationary"},
            "cond_2_13": self.cond_2_13,
            "cond_2_13_plus": self.cond_2_13_plus,
            "cond_2_20": {
                "rows": self.cond_2_20.rows,
                "columns": self.cond_2_20.columns,
                "row_overlap": self.cond_2_20.row_overlap,
                "column_overlap": self.cond_2_20.column_overlap,
                "positivity_index": self.cond_2_20.positivity_index,
            },
            "psi_alpha": self.psi_alpha,
            "ergodicity_rate": self.ergodicity_rate,
            "notes": list(self.notes),
        }


def _exact_rows(transition) -> Optional[Tuple[Tuple[Fraction, ...], ...]]:
    try:
        rows = tuple(tuple(to_fraction(x) for x in row) for row in transition)
    except (TypeError, ValueError, ZeroDivisionError):
        return None
    if any(sum(row) != 1 for row in rows):
        return None
    return rows


def _exact_stationary(rows) -> Optional[Tuple[Fraction, ...]]:
    """Exact left null vector of (P - I) normalized to mass one, if unique."""
    size = len(rows)
    if size > config.EXACT_STATIONARY_MAX_STATES:
        return None
    P = sympy.Matrix(size, size, lambda i, j: sympy.Rational(rows[i][j].numerator, rows[i][j].denominator))
    null = (P.T - sympy.eye(size)).nullspace()
    if len(null) != 1:
        return None
    v = null[0]
    total = sum(v)
    if total == 0:
        return None
    v = v / total
    return tuple(Fraction(int(sympy.Rational(x).p), int(sympy.Rational(x).q)) for x in v)


def _power_iteration(P: np.ndarray) -> np.ndarray:
    size = P.shape[0]
    mu = np.full(size, 1.0 / size)
    for _ in range(config.MAX_POWER_ITERATIONS):
        nxt = mu @ P
        nxt /= nxt.sum()
        if np.abs(nxt - mu).sum() < config.POWER_ITERATION_TOL:
            return nxt
        mu = nxt
    raise NotConverged(
        f"power iteration did not reach {config.POWER_ITERATION_TOL} residual "
        f"in {config.MAX_POWER_ITERATIONS} steps; supply the stationary vector explicitly")


def validate_chain(transition, labels: Optional[Sequence] = None, stationary=None) -> FiniteChain:
    """
    Validates a transition matrix and attaches its stationary distribution.

    Entries may be floats, ints, Fractions or "p/q" strings; when every row
    sums to one exactly in rational arithmetic, the exact stationary vector
    is kept alongside the float one.
    """
    exact = _exact_rows(transition)
    try:
        P = np.array([[float(to_fraction(x)) for x in row] for row in transition], dtype=float)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        # ragged rows, NaN/Infinity, non-numeric entries
        raise InvalidArgument(f"transition must be a square matrix of finite numbers: {e}") from e
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidArgument(f"transition must be square, got shape {P.shape}")
    size = P.shape[0]
    if size < 2:
        raise InvalidArgument("a chain needs at least two states")
    if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
        raise NonStochastic("entries must be probabilities in [0, 1]")
    row_sums = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(row_sums - 1.0) > config.ROW_SUM_TOL)
    if bad.size:
        raise NonStochastic(f"row {int(bad[0])} sums to {row_sums[bad[0]]!r}")
    P = P / row_sums[:, None]

    labels = tuple(labels) if labels is not None else tuple(range(size))
    if len(labels) != size:
        raise InvalidArgument(f"{len(labels)} labels for {size} states")

    if stationary is not None:
        try:
            mu = np.asarray([float(to_fraction(x)) for x in stationary], dtype=float)
        except (TypeError, ValueError, ZeroDivisionError) as e:
            raise InvalidArgument(f"stationary vector must hold finite numbers: {e}") from e
        if mu.shape != (size,) or abs(mu.sum() - 1.0) > 1e-12:
            raise InvalidArgument("supplied stationary vector must be a probability vector of length S")
        if np.abs(mu @ P - mu).max() > config.STATIONARY_TOL:
            raise InvalidArgument("supplied stationary vector is not invariant under the transition matrix")
    else:
        unit = np.sum(np.abs(np.linalg.eigvals(P)) > 1.0 - 1e-9)
        if unit > 1:
            raise NotConverged(
                f"{unit} eigenvalues on the unit circle (periodic or reducible chain); "
                "supply the stationary vector explicitly")
        mu = _power_iteration(P)

    zero = np.flatnonzero(mu < config.ZERO_MASS_TOL)
    if zero.size:
        raise ZeroMassState(f"state {labels[int(zero[0])]!r} has stationary mass {mu[zero[0]]:.3g}")

    exact_mu = _exact_stationary(exact) if exact is not None else None
    if exact_mu is not None and np.abs(np.array([float(x) for x in exact_mu]) - mu).max() > 1e-9:
        logger.warning("Exact stationary vector disagrees with the numerical one; dropping it.")
        exact_mu = None

    P.setflags(write=False)
    mu.setflags(write=False)
    logger.debug(f"Validated {size}-state chain, stationary={mu}")
    return FiniteChain(labels, P, mu, exact, exact_mu)


def k_step(chain: FiniteChain, k: int) -> np.ndarray:
    if k < 1:
        raise InvalidArgument(f"k must be >= 1, got {k}")
    return chain.power(k)


def doeblin_delta(chain: FiniteChain, k: int) -> float:
    """Largest total-variation distance between two rows of P^k."""
    Pk = k_step(chain, k)
    diff = np.abs(Pk[:, None, :] - Pk[None, :, :]).sum(axis=2) / 2.0
    return float(min(max(diff.max(), 0.0), 1.0))


def rho_correlation(chain: FiniteChain, k: int) -> float:
    """Norm of Q^k on the mean-zero subspace of L2(mu)."""
    Pk = k_step(chain, k)
    root = np.sqrt(chain.stationary)
    A = (root[:, None] * Pk) / root[None, :]
    A = A - np.outer(root, root)
    return float(min(np.linalg.svd(A, compute_uv=False)[0], 1.0))


def psi_coefficient(chain: FiniteChain, m: int) -> float:
    Pm = k_step(chain, m)
    return float(np.abs(Pm / chain.stationary[None, :] - 1.0).max())


def check_doeblin(chain: FiniteChain, n0: int) -> Optional[DoeblinCertificate]:
    """Doeblin constant with reference measure mu; None when P^n0 has a zero entry."""
    Pn = k_step(chain, n0)
    if np.any(Pn <= 0.0):
        return None
    ratio = Pn / chain.stationary[None, :]
    gamma = min(ratio.min(), 1.0 / ratio.max())
    return DoeblinCertificate(float(min(gamma, 1.0)), n0, tuple(chain.stationary.tolist()))


def positivity_index(chain: FiniteChain) -> Optional[int]:
    """Least k <= S^2 with P^k strictly positive."""
    Pk = np.eye(chain.size)
    for k in range(1, chain.size ** 2 + 1):
        Pk = Pk @ chain.transition
        if np.all(Pk > 0):
            return k
    return None


def check_2_20(chain: FiniteChain, ell: int) -> OverlapConditions:
    Pl = k_step(chain, ell)
    rows = np.minimum(Pl[:, None, :], Pl[None, :, :]).sum(axis=2).min()
    cols = np.minimum(Pl[:, :, None], Pl[:, None, :]).sum(axis=0).min()
    return OverlapConditions(bool(rows > 0), bool(cols > 0), float(rows), float(cols), positivity_index(chain))


def check_product_size(chain: FiniteChain, ell: int, cap: int = None) -> int:
    """Number of product states S^ell; CapExceeded above `cap`."""
    if ell < 1:
        raise InvalidArgument(f"ell must be >= 1, got {ell}")
    cap = config.PRODUCT_STATE_CAP if cap is None else cap
    states = chain.size ** ell
    if states > cap:
        raise CapExceeded(f"product chain has {chain.size}^{ell} states, cap is {cap}")
    return states


def product_chain(chain: FiniteChain, ell: int, cap: int = None) -> FiniteChain:
    """
    Chain of (xi1_n, xi2_2n, ..., xiell_ell*n) for independent copies:
    transition P (x) P^2 (x) ... (x) P^ell, stationary mu^ell, last coordinate fastest.

    The transition is dense; use product_apply past DENSE_SOLVE_CAP states.
    """
    states = check_product_size(chain, ell, cap)
    if ell == 1:
        return chain
    if states > config.DENSE_SOLVE_CAP:
        raise CapExceeded(f"dense product transition would be {states}x{states}, "
                          f"cap is {config.DENSE_SOLVE_CAP} states (NLLT_DENSE_CAP)")
    T = chain.power(1)
    mu = chain.stationary
    for i in range(2, ell + 1):
        T = np.kron(T, chain.power(i))
        mu = np.kron(mu, chain.stationary)
    T = np.ascontiguousarray(T)
    T.setflags(write=False)
    mu.setflags(write=False)
    labels = tuple(np.ndindex(*([chain.size] * ell)))
    return FiniteChain(labels, T, mu)


def product_apply(chain: FiniteChain, ell: int, v: np.ndarray) -> np.ndarray:
    """(P (x) P^2 (x) ... (x) P^ell) v without forming the Kronecker product."""
    S = chain.size
    V = np.asarray(v, dtype=float).reshape((S,) * ell)
    for i in range(ell):
        V = np.moveaxis(np.tensordot(chain.power(i + 1), V, axes=([1], [i])), 0, i)
    return V.reshape(-1)


def fit_psi_decay(psi: Dict[int, float]) -> Optional[float]:
    """
    Largest alpha in (0, 10] with psi(m) <= exp(-alpha*m)/alpha over the
    supplied range, or None when no such alpha exists.
    """
    pts = [(m, v) for m, v in sorted(psi.items()) if v > 0]
    if not pts:
        return 10.0

    def holds(alpha):
        return all(v <= np.exp(-alpha * m) / alpha for m, v in pts)

    lo, hi = 1e-9, 10.0
    if not holds(lo):
        return None
    if holds(hi):
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


def geometric_rate(values: Dict[int, float], floor: float = 1e-13) -> Optional[float]:
    """Slope of -log(value) against the index over the values above `floor`."""
    pts = [(m, v) for m, v in sorted(values.items()) if v > floor]
    if len(pts) < 2:
        return None if pts else float("inf")
    x = np.array([m for m, _ in pts], dtype=float)
    y = -np.log([v for _, v in pts])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def ergodicity_rate(chain: FiniteChain, horizon: int = config.PSI_FIT_RANGE) -> Optional[float]:
    tv = {n: float(0.5 * np.abs(k_step(chain, n) - chain.stationary[None, :]).sum(axis=1).max())
          for n in range(1, horizon + 1)}
    return geometric_rate(tv)


def mixing_profile(chain: FiniteChain, ell: int, k_max: int = config.DEFAULT_K_MAX,
                   n0: Optional[int] = None) -> MixingProfile:
    k_top = max(k_max, ell)
    psi = {m: psi_coefficient(chain, m) for m in range(1, max(k_top, config.PSI_FIT_RANGE) + 1)}
    delta = {k: doeblin_delta(chain, k) for k in range(1, k_top + 1)}
    rho = {k: rho_correlation(chain, k) for k in range(1, k_top + 1)}

    notes = []
    doeblin = None
    candidates = [n0] if n0 else range(1, chain.size ** 2 + 1)
    for n in candidates:
        doeblin = check_doeblin(chain, n)
        if doeblin is not None:
            break
    if doeblin is None:
        notes.append("no Doeblin certificate with the stationary reference measure")

    fit_range = {m: v for m, v in psi.items() if m <= config.PSI_FIT_RANGE}
    alpha = fit_psi_decay(fit_range)
    if alpha is None:
        notes.append("psi(m) exceeds every exponential envelope on the computed range")

    return MixingProfile(
        ell=ell,
        psi={m: v for m, v in psi.items() if m <= k_top},
        delta=delta,
        rho=rho,
        doeblin=doeblin,
        cond_2_13=rho[ell] < 1.0,
        cond_2_13_plus=delta[ell] < 1.0,
        cond_2_20=check_2_20(chain, ell),
        psi_alpha=alpha,
        ergodicity_rate=ergodicity_rate(chain),
        notes=notes,
    )
