import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmcp_bandit import _cd_py, kernels

compiled = pytest.importorskip("gmcp_bandit._cd", reason="compiled extension not built")


def _problem(seed, p):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3 * p, p))
    H = A.T @ A / (3 * p)
    lin = rng.standard_normal(p)
    w = rng.uniform(0.0, 0.5, p)
    return H, lin, w


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), p=st.integers(1, 25))
def test_backends_agree(seed, p):
    H, lin, w = _problem(seed, p)
    b_c, b_p = np.zeros(p), np.zeros(p)
    tr_c, tr_p = np.zeros(50), np.zeros(50)
    s_c, r_c = compiled.cd_quadratic(H, lin, w, b_c, 1e-10, 5000, tr_c)
    s_p, r_p = _cd_py.cd_quadratic(H, lin, w, b_p, 1e-10, 5000, tr_p)
    assert s_c == s_p
    np.testing.assert_allclose(b_c, b_p, atol=1e-10)
    np.testing.assert_allclose(tr_c, tr_p, rtol=1e-9, atol=1e-12)
    assert r_c <= 1e-10 and r_p <= 1e-10


@pytest.mark.parametrize("impl", [compiled.cd_quadratic, _cd_py.cd_quadratic])
def test_trace_monotone_and_max_sweeps(impl):
    H, lin, w = _problem(4, 30)
    b, tr = np.zeros(30), np.zeros(3)
    sweeps, _ = impl(H, lin, w, b, 0.0, 3, tr)
    assert sweeps == 3
    assert np.all(np.diff(tr) <= 1e-12)


@pytest.mark.parametrize("impl", [compiled.cd_quadratic, _cd_py.cd_quadratic])
def test_diagonal_problem_closed_form(impl):
    H = np.diag([2.0, 1.0, 4.0])
    lin = np.array([-3.0, 0.2, 5.0])
    w = np.array([1.0, 1.0, 1.0])
    b = np.zeros(3)
    impl(H, lin, w, b, 1e-14, 100, np.zeros(0))
    np.testing.assert_allclose(b, [1.0, 0.0, -1.0], atol=1e-14)


def test_env_var_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, GMCP_BANDIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from gmcp_bandit.kernels import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
