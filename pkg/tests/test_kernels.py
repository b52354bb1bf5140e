import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperfill import _pykernels, kernels

try:
    from hyperfill import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def _problem(seed, n=30, m=120):
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, m)
    j = (i + rng.integers(1, n, m)) % n
    return i.astype(np.int64), j.astype(np.int64), rng.random(m), rng.standard_normal(n)


@needs_c
@pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 1.2])
def test_backends_agree(p):
    i, j, w, u = _problem(1)
    e_py, g_py = _pykernels.pair_energy_grad(i, j, w, u, p)
    e_c, g_c = _ckernels.pair_energy_grad(i, j, w, u, p)
    assert e_c == pytest.approx(e_py, rel=1e-12)
    np.testing.assert_allclose(g_c, g_py, rtol=1e-11, atol=1e-13)
    assert _ckernels.pair_energy(i, j, w, u, p) == pytest.approx(_pykernels.pair_energy(i, j, w, u, p), rel=1e-12)


@needs_c
def test_ball_masses_agree():
    rng = np.random.default_rng(3)
    x = rng.random((25, 2))
    d = np.linalg.norm(x[:, None] - x[None], axis=2)
    m = rng.random(25) + 0.1
    np.testing.assert_allclose(_ckernels.open_ball_masses(d, m), _pykernels.open_ball_masses(d, m), rtol=1e-14)


def test_open_ball_masses_brute_force():
    rng = np.random.default_rng(4)
    x = np.round(rng.random(12), 1)  # repeated distances exercise the open-ball rule
    d = np.abs(x[:, None] - x[None])
    m = rng.random(12) + 0.1
    got = kernels.open_ball_masses(d, m)
    for z in range(12):
        for w in range(12):
            assert got[z, w] == pytest.approx(m[d[z] < d[z, w]].sum(), abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.1, 4.0))
def test_gradient_matches_finite_differences(seed, p):
    i, j, w, u = _problem(seed, n=8, m=20)
    _, g = kernels.pair_energy_grad(i, j, w, u, p)
    h = 1e-6
    for k in range(u.size):
        e = np.zeros_like(u)
        e[k] = h
        fd = (kernels.pair_energy(i, j, w, u + e, p) - kernels.pair_energy(i, j, w, u - e, p)) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-4, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.1, 4.0), st.floats(-3, 3))
def test_energy_homogeneous_and_shift_invariant(seed, p, lam):
    i, j, w, u = _problem(seed, n=10, m=30)
    e = kernels.pair_energy(i, j, w, u, p)
    assert kernels.pair_energy(i, j, w, lam * u, p) == pytest.approx(abs(lam) ** p * e, rel=1e-10, abs=1e-300)
    assert kernels.pair_energy(i, j, w, u + 7.0, p) == pytest.approx(e, rel=1e-10)


def test_backend_name():
    assert kernels.BACKEND in ("numpy", "cython")
