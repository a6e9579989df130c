import json
import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from amdkit._util import (atomic_write_text, canonical_json, fmt, logsumexp,
                          sha256_of_text)


def test_canonical_json_sorts_keys():
    a = canonical_json({"b": 1, "a": [2, 3]})
    b = canonical_json({"a": [2, 3], "b": 1})
    assert a == b
    assert json.loads(a) == {"a": [2, 3], "b": 1}


def test_fmt_round_trips_floats():
    for x in (0.1, 1 / 3, 1e-300, -0.0, 12345.6789):
        assert float(fmt(x)) == x


def test_sha256_stability():
    assert sha256_of_text("abc") == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")


def test_atomic_write(tmp_path):
    p = tmp_path / "x.txt"
    atomic_write_text(p, "hello")
    assert p.read_text() == "hello"
    atomic_write_text(p, "world")
    assert p.read_text() == "world"
    assert list(tmp_path.iterdir()) == [p]  # no temp file left behind


def test_logsumexp_matches_direct():
    x = np.log([0.2, 0.3, 0.5])
    assert math.isclose(logsumexp(x), 0.0, abs_tol=1e-15)


def test_logsumexp_handles_neg_inf():
    x = np.array([-np.inf, 0.0, -np.inf])
    assert logsumexp(x) == 0.0
    assert logsumexp(np.array([-np.inf, -np.inf])) == -np.inf


@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=30))
def test_logsumexp_property(xs):
    x = np.array(xs)
    direct = math.log(np.exp(x).sum())
    assert math.isclose(logsumexp(x), direct, rel_tol=1e-12, abs_tol=1e-12)
