import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsloss.numerics import BracketError, find_root
from tlsloss.tlsmodel import TlsParams, default_kernel, q_total_inv


def test_linear():
    assert find_root(lambda x: x - 2.0, (0.0, 5.0)) == pytest.approx(2.0, abs=1e-12)


def test_tanh():
    assert find_root(lambda x: math.tanh(x) - 0.5, (0.0, 2.0)) == pytest.approx(math.atanh(0.5), abs=1e-12)


def test_root_at_endpoint():
    assert find_root(lambda x: x, (0.0, 1.0)) == 0.0


def test_no_sign_change():
    with pytest.raises(BracketError):
        find_root(lambda x: x * x + 1.0, (-1.0, 1.0))


def test_loss_curve_root_matches_dense_scan():
    p = TlsParams(0.12 * 1.4e-3, 30.0, 0.12 * 3.4e-3, 0.5, 2, 5e-6)
    k = default_kernel(2)
    n = 1e6
    q = lambda T: float(q_total_inv(n, T, 6e9, p, k))
    grid = np.geomspace(0.01, 4.0, 20001)
    vals = np.array([q(t) for t in grid[::100]])
    target = 0.5 * (vals.min() + vals.max())
    root = find_root(lambda T: q(T) - target, (0.01, 4.0), tol=1e-12)
    # dense-scan oracle: first crossing on the fine grid
    fine = np.array([q(t) for t in grid])
    i = np.flatnonzero(np.diff(np.sign(fine - target)))[0]
    assert grid[i] <= root <= grid[i + 1]


@settings(max_examples=60, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 10))
def test_cubic_roots(r, s):
    f = lambda x: (x - r) * (1 + (x - r) ** 2)
    x = find_root(f, (r - s, r + 2 * s), tol=1e-12)
    assert abs(x - r) <= 1e-9 * max(1.0, abs(r))


def test_deterministic():
    f = lambda x: math.cos(x) - x
    assert find_root(f, (0, 1)) == find_root(f, (0, 1))
