import itertools

import numpy as np
from hypothesis import strategies as st

from backend.chain_core import validate_chain
from backend.observable_decomp import build_observable
from backend.sim_oracle import build_instance

SIGNS = (-1, 1)
COIN = [[0.5, 0.5], [0.5, 0.5]]
STICKY = [[0.7, 0.3], [0.3, 0.7]]
FLIP = [[0.0, 1.0], [1.0, 0.0]]


def table_of(fn, states, ell):
    """Flat table of fn over states^ell, last coordinate fastest."""
    return [fn(*args) for args in itertools.product(states, repeat=ell)]


def make_instance(transition, fn, ell, states=SIGNS, exact=True, stationary=None):
    chain = validate_chain(transition, list(states), stationary)
    values = table_of(fn, states, ell)
    exact_values = [str(v) for v in values] if exact else None
    return build_instance(chain, build_observable(ell, values, chain, exact_values))


@st.composite
def stochastic_matrices(draw, min_states=2, max_states=4):
    size = draw(st.integers(min_value=min_states, max_value=max_states))
    rows = []
    for _ in range(size):
        weights = draw(st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=size, max_size=size))
        total = sum(weights)
        rows.append([w / total for w in weights])
    return rows


@st.composite
def random_instances(draw, max_states=4, max_ell=3):
    """Strictly positive chains with arbitrary observable tables."""
    rows = draw(stochastic_matrices(max_states=max_states))
    size = len(rows)
    ell = draw(st.integers(min_value=1, max_value=max_ell))
    values = draw(st.lists(st.floats(min_value=-5.0, max_value=5.0), min_size=size ** ell, max_size=size ** ell))
    chain = validate_chain(rows)
    return chain, build_observable(ell, values, chain)


def reconstruct(decomposition, size):
    ell = decomposition.ell
    total = np.zeros((size,) * ell)
    for i, comp in enumerate(decomposition.components, start=1):
        total = total + comp.reshape(comp.shape + (1,) * (ell - i))
    return total
