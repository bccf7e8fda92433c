import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

import config
from .chain_core import FiniteChain
from .errors import InconsistentExactValue, InvalidArgument, LengthMismatch, NonFiniteValue, NotCentered
from .exact_field import QSqrt2

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Observable:
    """F on X^ell as a dense table, row-major with the last coordinate fastest."""
    ell: int
    values: np.ndarray
    mean: float
    second_moment: float
    exact_values: Optional[Tuple[Optional[QSqrt2], ...]] = None
    exact_dropped: bool = False

    def table(self, states: int) -> np.ndarray:
        return self.values.reshape((states,) * self.ell)

    @property
    def has_exact(self) -> bool:
        return self.exact_values is not None and all(v is not None for v in self.exact_values)


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Components F_1..F_ell; component i is a dense table on X^i."""
    components: Tuple[np.ndarray, ...]
    exact_last: Optional[Tuple[QSqrt2, ...]] = None

    @property
    def ell(self) -> int:
        return len(self.components)

    @property
    def last(self) -> np.ndarray:
        return self.components[-1]


def product_weights(chain: FiniteChain, ell: int) -> np.ndarray:
    """mu^ell as a flat vector in table order."""
    w = np.ones(1)
    for _ in range(ell):
        w = np.kron(w, chain.stationary)
    return w


def _exact_weights(chain: FiniteChain, ell: int) -> Optional[List[Fraction]]:
    if chain.exact_stationary is None:
        return None
    w = [Fraction(1)]
    for _ in range(ell):
        w = [a * b for a in w for b in chain.exact_stationary]
    return w


def build_observable(ell: int, values, chain: FiniteChain, exact_values: Optional[Sequence] = None) -> Observable:
    if ell < 1:
        raise InvalidArgument(f"ell must be >= 1, got {ell}")
    arr = np.asarray(values, dtype=float).ravel()
    expected = chain.size ** ell
    if arr.size != expected:
        raise LengthMismatch(f"table has {arr.size} entries, expected S^ell = {expected}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"entry {int(np.flatnonzero(~np.isfinite(arr))[0])} is not finite")

    exact = None
    if exact_values is not None:
        if len(exact_values) != expected:
            raise LengthMismatch(f"exact table has {len(exact_values)} entries, expected {expected}")
        exact = tuple(None if v is None else QSqrt2.parse(v) for v in exact_values)
        for i, v in enumerate(exact):
            if v is not None and abs(float(v) - arr[i]) > 1e-12 * max(1.0, abs(arr[i])):
                raise InconsistentExactValue(f"exact entry {i} = {v} differs from float {arr[i]!r}")

    w = product_weights(chain, ell)
    arr.setflags(write=False)
    return Observable(ell, arr, float(w @ arr), float(w @ (arr * arr)), exact)


def exact_mean(observable: Observable, chain: FiniteChain) -> Optional[QSqrt2]:
    if not observable.has_exact:
        return None
    if chain.size ** observable.ell > config.EXACT_TABLE_CAP:
        return None
    w = _exact_weights(chain, observable.ell)
    if w is None:
        return None
    total = QSqrt2()
    for v, p in zip(observable.exact_values, w):
        total = total + v * p
    return total


def center(observable: Observable, chain: FiniteChain) -> Observable:
    """Shifts F by -F_bar. Exact values are shifted exactly or dropped."""
    exact_bar = exact_mean(observable, chain)
    if observable.mean == 0.0 and (exact_bar is None or exact_bar.is_zero()):
        return observable

    shifted = observable.values - observable.mean
    w = product_weights(chain, observable.ell)
    # second pass removes the rounding left by the first
    shifted = shifted - float(w @ shifted)
    shifted.setflags(write=False)

    exact = None
    dropped = observable.exact_dropped
    if observable.exact_values is not None:
        if exact_bar is None:
            logger.warning("Mean is not exactly computable (no exact stationary vector); dropping exact values.")
            dropped = True
        else:
            exact = tuple(v - exact_bar for v in observable.exact_values)
            # keep floats consistent with the exact table
            shifted = np.array([float(v) for v in exact])
            shifted.setflags(write=False)

    return Observable(observable.ell, shifted, float(w @ shifted), float(w @ (shifted * shifted)),
                      exact, dropped)


def _average_last(table: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return np.tensordot(table, mu, axes=([table.ndim - 1], [0]))


def decompose(observable: Observable, chain: FiniteChain) -> Decomposition:
    """
    F - F_bar = F_1(x1) + F_2(x1,x2) + ... + F_ell(x1..x_ell) where
    F_i = G_i - G_{i-1} and G_i averages F over the coordinates after i.
    """
    if abs(observable.mean) >= config.CENTERING_TOL:
        raise NotCentered(f"observable mean is {observable.mean!r}; center it first")
    S, ell, mu = chain.size, observable.ell, chain.stationary

    averages = [observable.table(S)]
    for _ in range(ell):
        averages.append(_average_last(averages[-1], mu))
    averages.reverse()  # averages[i] = G_i on X^i, averages[0] = F_bar

    components = []
    for i in range(1, ell + 1):
        comp = averages[i] - np.expand_dims(averages[i - 1], axis=i - 1)
        comp = np.ascontiguousarray(comp)
        comp.setflags(write=False)
        components.append(comp)

    exact_last = None
    if observable.has_exact and chain.exact_stationary is not None \
            and S ** ell <= config.EXACT_TABLE_CAP:
        exact_last = []
        vals = observable.exact_values
        for start in range(0, len(vals), S):
            block = vals[start:start + S]
            avg = QSqrt2()
            for v, p in zip(block, chain.exact_stationary):
                avg = avg + v * p
            exact_last.extend(v - avg for v in block)
        exact_last = tuple(exact_last)

    return Decomposition(tuple(components), exact_last)


def is_F_ell_zero(decomposition: Decomposition, tol: float = config.F_ELL_ZERO_TOL) -> bool:
    if decomposition.exact_last is not None:
        return all(v.is_zero() for v in decomposition.exact_last)
    return bool(np.abs(decomposition.last).max() <= tol)


def reduce_arity(observable: Observable, chain: FiniteChain) -> Observable:
    """
    Drops trailing coordinates F does not depend on (F_ell == 0), so the
    result is the same function of ell' < ell variables with F_ell' != 0.
    """
    current = observable
    while current.ell > 1 and is_F_ell_zero(decompose(center(current, chain), chain)):
        S = chain.size
        table = current.table(S)
        # F does not depend on x_ell: any slice represents it
        reduced = np.ascontiguousarray(table[..., 0]).ravel()
        exact = None
        if current.exact_values is not None:
            exact = [v.to_json() if v is not None else None for v in current.exact_values[::S]]
        current = build_observable(current.ell - 1, reduced, chain, exact)
        logger.info(f"F_ell vanishes; reduced arity to {current.ell}")
    return current


def mean_square_of_sum(decomposition: Decomposition, chain: FiniteChain) -> float:
    """E_{mu^ell}[(F_1 + ... + F_ell)^2], equal to b^2 for centered F."""
    S, ell = chain.size, decomposition.ell
    total = np.zeros((S,) * ell)
    for i, comp in enumerate(decomposition.components, start=1):
        total = total + comp.reshape(comp.shape + (1,) * (ell - i))
    w = product_weights(chain, ell)
    return float(w @ (total.ravel() ** 2))


def center_and_decompose(observable: Observable, chain: FiniteChain) -> Tuple[Observable, Decomposition]:
    centered = center(observable, chain)
    return centered, decompose(centered, chain)

