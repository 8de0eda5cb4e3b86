import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weakkam import _backend, _fallback
from weakkam.grid import GridFunction, PeriodicGrid
from weakkam.model import pendulum_model
from weakkam.semigroup import build_kernel, solve_weak_kam

try:
    from weakkam import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled extension not built")


def test_backend_name():
    assert _backend.BACKEND in ("cython", "python")
    if _core is not None and not os.environ.get("WEAKKAM_PURE_PYTHON"):
        assert _backend.BACKEND == "cython"


def test_env_forces_fallback():
    code = "import weakkam; print(weakkam.BACKEND)"
    env = dict(os.environ, WEAKKAM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def _random_table(rng, n, m):
    idx = rng.integers(0, n, size=(m, n)).astype(np.int64)
    W = rng.normal(size=(m, n))
    return idx, W


@needs_core
@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(3, 40), st.integers(1, 7))
def test_minplus_identical(seed, n, m):
    rng = np.random.default_rng(seed)
    idx, W = _random_table(rng, n, m)
    u = rng.normal(size=n)
    np.testing.assert_array_equal(_core.minplus_apply(u, idx, W), _fallback.minplus_apply(u, idx, W))
    # ties: integer data forces repeated minima
    Wi = rng.integers(0, 3, size=W.shape).astype(float)
    ui = rng.integers(0, 3, size=n).astype(float)
    a = _core.minplus_argmin(ui, idx, Wi)
    b = _fallback.minplus_argmin(ui, idx, Wi)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


@needs_core
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(3, 20), st.integers(1, 5))
def test_karp_table_identical(seed, n, m):
    rng = np.random.default_rng(seed)
    idx, W = _random_table(rng, n, m)
    np.testing.assert_array_equal(_core.karp_table(idx, W, n), _fallback.karp_table(idx, W, n))


@needs_core
def test_full_solve_identical(monkeypatch):
    k = build_kernel(pendulum_model(), PeriodicGrid.circle(128), 0.05, 4.0)
    seed = GridFunction(k.grid, np.random.default_rng(7).random(128))
    fast = solve_weak_kam(k, seed=seed)
    for name in ("minplus_apply", "minplus_argmin", "karp_table"):
        monkeypatch.setattr(_backend, name, getattr(_fallback, name))
    slow = solve_weak_kam(k, seed=seed)
    np.testing.assert_array_equal(fast.u.values, slow.u.values)
    assert fast.c_est == slow.c_est and fast.iters == slow.iters
