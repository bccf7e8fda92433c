"""
Lattice / non-lattice / other classification of a centered observable.

For each prefix x_bar the span h(x_bar) is the largest h with every
difference F(x_bar, x) - F(x_bar, y) in hZ (the gcd of the differences).
The case is lattice when all spans agree and every value of F(x_bar, .)
lies in hZ, non-lattice when some prefix has incommensurable differences,
and other in every remaining case.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

import config
from .chain_core import FiniteChain
from .errors import KindMismatch, MixedRepresentation, NotCentered
from .exact_field import QSqrt2, divides, rational_gcd, span_of

logger = logging.getLogger(__name__)


class LatticeKind(str, Enum):
    LATTICE = "Lattice"
    NON_LATTICE = "NonLattice"
    OTHER = "Other"


@dataclass(frozen=True)
class PrefixSpan:
    span: Optional[float]
    exact_span: Optional[QSqrt2]
    commensurable: bool
    span_in_values_lattice: bool

    @property
    def unbounded(self) -> bool:
        return self.commensurable and self.span is None


@dataclass(frozen=True)
class LatticeClassification:
    kind: LatticeKind
    h: Optional[QSqrt2] = None
    witness: Optional[object] = None
    heuristic: bool = False
    per_prefix: Dict[Tuple[int, ...], PrefixSpan] = field(default_factory=dict)
    diagnostics: List[str] = field(default_factory=list)

    @property
    def h_float(self) -> Optional[float]:
        return None if self.h is None else float(self.h)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "h": None if self.h is None else self.h.to_json(),
            "witness": list(self.witness) if isinstance(self.witness, tuple) else self.witness,
            "heuristic": self.heuristic,
            "diagnostics": list(self.diagnostics),
        }


def _exact_prefix_span(values: List[QSqrt2]) -> PrefixSpan:
    span, commensurable = span_of(values)
    if span is None:
        return PrefixSpan(None, None, commensurable, False)
    return PrefixSpan(float(span), span, True, all(divides(span, v) for v in values))


def _float_prefix_span(values: np.ndarray) -> PrefixSpan:
    tol = config.HEURISTIC_LATTICE_TOL
    diffs = values[1:] - values[0]
    diffs = diffs[np.abs(diffs) > tol]
    if diffs.size == 0:
        return PrefixSpan(None, None, True, False)
    unit = abs(diffs[0])
    ratios = []
    for d in diffs:
        r = Fraction(float(d / unit)).limit_denominator(config.HEURISTIC_MAX_DENOMINATOR)
        if abs(float(r) * unit - d) > tol * max(1.0, abs(d)):
            return PrefixSpan(None, None, False, False)
        ratios.append(r)
    span = unit * float(rational_gcd(ratios))
    q = values / span
    in_lattice = bool(np.all(np.abs(q - np.rint(q)) <= tol * np.maximum(1.0, np.abs(q))))
    return PrefixSpan(span, None, True, in_lattice)


def classify(observable, chain: FiniteChain) -> LatticeClassification:
    if abs(observable.mean) >= config.CENTERING_TOL:
        raise NotCentered(f"observable mean is {observable.mean!r}; classify the centered table")
    if observable.exact_values is not None and not observable.has_exact:
        raise MixedRepresentation("exact table has missing entries; supply all or none")

    S, ell = chain.size, observable.ell
    exact = observable.has_exact
    mu = chain.stationary
    per_prefix: Dict[Tuple[int, ...], PrefixSpan] = {}

    for offset, prefix in enumerate(itertools.product(range(S), repeat=ell - 1)):
        if np.prod([mu[i] for i in prefix]) <= 0.0:
            continue
        lo, hi = offset * S, (offset + 1) * S
        if exact:
            per_prefix[prefix] = _exact_prefix_span(list(observable.exact_values[lo:hi]))
        else:
            per_prefix[prefix] = _float_prefix_span(np.asarray(observable.values[lo:hi]))

    heuristic = not exact
    if heuristic:
        logger.warning("Lattice verdict computed from float values; it is heuristic.")
    return _aggregate(per_prefix, heuristic)


def _aggregate(per_prefix: Dict[Tuple[int, ...], PrefixSpan], heuristic: bool) -> LatticeClassification:
    diagnostics = []
    for prefix, ps in per_prefix.items():
        if not ps.commensurable:
            return LatticeClassification(LatticeKind.NON_LATTICE, None, prefix, heuristic, per_prefix,
                                         [f"prefix {prefix}: differences are incommensurable (B empty)"])

    unbounded = [p for p, ps in per_prefix.items() if ps.unbounded]
    if len(unbounded) == len(per_prefix):
        return LatticeClassification(
            LatticeKind.OTHER, None, "F(x_bar,.) constant for every prefix: F_ell vanishes, reduce the arity",
            heuristic, per_prefix, ["span unbounded on every prefix"])
    if unbounded:
        return LatticeClassification(
            LatticeKind.OTHER, None, f"F(x_bar,.) constant at prefix {unbounded[0]}: span unbounded there",
            heuristic, per_prefix, [f"{len(unbounded)} prefixes with unbounded span"])

    items = list(per_prefix.items())
    ref_prefix, ref = items[0]
    for prefix, ps in items[1:]:
        same = (ps.exact_span == ref.exact_span) if not heuristic else \
            abs(ps.span - ref.span) <= config.HEURISTIC_LATTICE_TOL * max(1.0, ref.span)
        if not same:
            return LatticeClassification(
                LatticeKind.OTHER, None,
                f"h(x_bar) non-constant across prefixes: {ref.span:g} at {ref_prefix}, {ps.span:g} at {prefix}",
                heuristic, per_prefix, diagnostics)
    for prefix, ps in items:
        if not ps.span_in_values_lattice:
            return LatticeClassification(
                LatticeKind.OTHER, None, f"h(x_bar) not in A_x_bar at prefix {prefix}: values off the span lattice",
                heuristic, per_prefix, diagnostics)

    h = ref.exact_span if not heuristic else QSqrt2.coerce(Fraction(ref.span).limit_denominator(10**9))
    if not h.is_rational():
        diagnostics.append("irrational_span: the span is an irrational multiple in Q+Q*sqrt(2)")
    return LatticeClassification(LatticeKind.LATTICE, h, None, heuristic, per_prefix, diagnostics)


def lattice_mesh_check(classification: LatticeClassification, distribution) -> bool:
    """True iff every support point of an exact S_N distribution lies in hZ."""
    if classification.kind is not LatticeKind.LATTICE:
        raise KindMismatch(f"mesh check needs a lattice classification, got {classification.kind.value}")
    h = classification.h
    if getattr(distribution, "exact_support", None) is not None:
        return all(divides(h, QSqrt2.coerce(v) if not isinstance(v, QSqrt2) else v)
                   for v in distribution.exact_support)
    hf = float(h)
    q = np.asarray(distribution.support, dtype=float) / hf
    return bool(np.all(np.abs(q - np.rint(q)) <= config.LATTICE_BIN_TOL))
