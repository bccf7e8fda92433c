import json

import pytest

import config
from tests.helpers import COIN, STICKY, make_instance


@pytest.fixture
def instance_a():
    """Fair +-1 coin (i.i.d.), F(x, y) = x + y."""
    return make_instance(COIN, lambda x, y: x + y, 2)


@pytest.fixture
def instance_b():
    """Sticky +-1 chain, F(x, y) = x + y."""
    return make_instance(STICKY, lambda x, y: x + y, 2)


@pytest.fixture
def coin_walk():
    """Classical simple random walk: ell = 1, F(x) = x."""
    return make_instance(COIN, lambda x: x, 1)


@pytest.fixture
def zero_instance():
    return make_instance(STICKY, lambda x, y: 0, 2)


@pytest.fixture
def first_only():
    """F(x, y) = x: the last component vanishes."""
    return make_instance(STICKY, lambda x, y: x, 2)


@pytest.fixture
def product_instance():
    """F(x, y) = x*y on the fair coin: kind Other."""
    return make_instance(COIN, lambda x, y: x * y, 2)


@pytest.fixture
def isolated_dirs(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "LOGS_DIR", str(tmp_path / "logs"))
    monkeypatch.setattr(config, "RESULTS_DIR", str(tmp_path / "results"))
    return tmp_path


@pytest.fixture
def write_instance(tmp_path):
    def _write(data, name="instance.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)
    return _write


@pytest.fixture
def instance_a_file(write_instance):
    return write_instance({
        "chain": {"states": [-1, 1], "transition": COIN},
        "observable": {"ell": 2, "values": [-2, 0, 0, 2], "exact_values": ["-2", "0", "0", "2"]},
    })
