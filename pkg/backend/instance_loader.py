"""
Instance files:

    {
      "chain": {"states": [-1, 1], "transition": [[0.7, 0.3], [0.3, 0.7]],
                "stationary": [0.5, 0.5]},              # stationary optional
      "observable": {"ell": 2, "values": [-2, 0, 0, 2],
                     "exact_values": ["-2", "0", "0", "2"]},   # optional
      "defaults": {"seed": 7, "samples": 100000, "horizon": 1024}   # optional
    }

A top-level "ell" may repeat the observable arity. Entries of
"exact_values" are rationals ("p/q", ints) or [a, b] for a + b*sqrt(2).
"""

import json
import logging
from dataclasses import dataclass, field
from numbers import Real
from typing import Dict, Optional

from .chain_core import FiniteChain, validate_chain
from .errors import NLLTError, ParseError
from .exact_field import QSqrt2, to_fraction
from .observable_decomp import Observable, build_observable
from .utils import content_digest

logger = logging.getLogger(__name__)

DEFAULT_KEYS = {"seed", "samples", "horizon", "n_grid", "theta_grid", "workers", "mode", "k_max", "sigma2"}


@dataclass(frozen=True, eq=False)
class InstanceFile:
    path: Optional[str]
    digest: str
    chain: FiniteChain
    observable: Observable
    defaults: Dict = field(default_factory=dict)


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", where or "<root>")
    if key not in obj:
        raise ParseError(f"missing required field '{key}'", where or "<root>")
    return obj[key]


def _check_number(value, where: str):
    if isinstance(value, bool):
        raise ParseError(f"expected a number, got {value!r}", where)
    if isinstance(value, Real):
        return value
    if isinstance(value, str):
        try:
            to_fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"cannot read {value!r} as a number", where)
        return value
    raise ParseError(f"expected a number, got {type(value).__name__}", where)


def _parse_chain(raw: dict):
    transition = _require(raw, "transition", "chain")
    if not isinstance(transition, list) or not transition:
        raise ParseError("expected a non-empty list of rows", "chain.transition")
    size = len(transition)
    for i, row in enumerate(transition):
        where = f"chain.transition[{i}]"
        if not isinstance(row, list):
            raise ParseError("row must be a list", where)
        if len(row) != size:
            raise ParseError(f"row has {len(row)} entries, expected {size}", where)
        for j, x in enumerate(row):
            _check_number(x, f"{where}[{j}]")

    states = raw.get("states")
    if states is not None and (not isinstance(states, list) or len(states) != size):
        raise ParseError(f"expected a list of {size} labels", "chain.states")

    stationary = raw.get("stationary")
    if stationary is not None:
        if not isinstance(stationary, list) or len(stationary) != size:
            raise ParseError(f"expected a list of {size} probabilities", "chain.stationary")
        for i, x in enumerate(stationary):
            _check_number(x, f"chain.stationary[{i}]")
    return transition, states, stationary


def _parse_observable(raw: dict, ell_hint):
    ell = _require(raw, "ell", "observable")
    if not isinstance(ell, int) or isinstance(ell, bool) or ell < 1:
        raise ParseError(f"expected a positive integer, got {ell!r}", "observable.ell")
    if ell_hint is not None and ell_hint != ell:
        raise ParseError(f"top-level ell={ell_hint!r} disagrees with observable.ell={ell}", "ell")
    values = _require(raw, "values", "observable")
    if not isinstance(values, list):
        raise ParseError("expected a flat list", "observable.values")
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, Real):
            raise ParseError(f"expected a number, got {v!r}", f"observable.values[{i}]")

    exact = raw.get("exact_values")
    if exact is not None:
        if not isinstance(exact, list):
            raise ParseError("expected a flat list", "observable.exact_values")
        for i, v in enumerate(exact):
            if v is None:
                continue
            try:
                QSqrt2.parse(v)
            except (TypeError, ValueError, ZeroDivisionError) as e:
                raise ParseError(f"cannot read {v!r}: {e}", f"observable.exact_values[{i}]")
    return ell, values, exact


def parse_instance(raw: dict, path: Optional[str] = None) -> InstanceFile:
    if not isinstance(raw, dict):
        raise ParseError("instance file must hold a JSON object", "<root>")
    transition, states, stationary = _parse_chain(_require(raw, "chain", ""))
    ell, values, exact = _parse_observable(_require(raw, "observable", ""), raw.get("ell"))

    defaults = raw.get("defaults", {})
    if not isinstance(defaults, dict):
        raise ParseError("expected an object", "defaults")
    unknown = set(defaults) - DEFAULT_KEYS
    if unknown:
        raise ParseError(f"unknown keys {sorted(unknown)}", "defaults")

    try:
        chain = validate_chain(transition, states, stationary)
    except NLLTError as e:
        raise type(e)(str(e), "chain") from e
    try:
        observable = build_observable(ell, values, chain, exact)
    except NLLTError as e:
        raise type(e)(str(e), "observable") from e
    return InstanceFile(path, content_digest(raw), chain, observable, dict(defaults))


def load_instance_file(path: str) -> InstanceFile:
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise ParseError(f"cannot read instance file: {e.strerror}", path)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", f"line {e.lineno}, column {e.colno}")
    instance = parse_instance(raw, path)
    logger.info(f"Loaded instance {path} (digest {instance.digest[:12]}, S={instance.chain.size}, "
                f"ell={instance.observable.ell})")
    return instance
