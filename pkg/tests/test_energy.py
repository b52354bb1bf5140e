from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import heap_dijkstra
from hyperfill.energy import (DiagonalForm, besov_energy, dirichlet_energy, filling_hardy_form, filling_hardy_lhs,
                              frac_hardy_lhs, restricted_besov_energy)
from hyperfill.filling import make_filling
from hyperfill.fixtures import cantor, fix_a, fix_b, grid1d, grid2d
from hyperfill.space import SubsetMask, from_coords


def _besov_oracle(space, theta, p, u):
    """Ordered double loop with open balls."""
    total = 0.0
    for z in range(space.n):
        for w in range(space.n):
            if z == w:
                continue
            d = space.dist[z, w]
            ball = space.mass[space.dist[z] < d].sum()
            total += abs(u[z] - u[w]) ** p * space.mass[z] * space.mass[w] / (d ** (theta * p) * ball)
    return total


def _path(lengths, masses):
    """A metric path graph carrying the attributes the Dirichlet energy reads."""
    n = len(lengths) + 1
    return SimpleNamespace(src=np.arange(n - 1), dst=np.arange(1, n), length=np.asarray(lengths, float),
                           mass=np.asarray(masses, float), n_nodes=n)


# ---------------------------------------------------------------- Besov


def test_besov_constant_is_zero(fixb):
    assert besov_energy(fixb.space, 0.5, 2.0, np.full(8, 3.0)) == 0.0


def test_besov_fix_a(fixa):
    u = np.array([0.0, 1.0])
    assert besov_energy(fixa.space, 0.5, 2.0, u) == pytest.approx(4.0, rel=1e-15)
    assert _besov_oracle(fixa.space, 0.5, 2.0, u) == pytest.approx(4.0, rel=1e-15)


@pytest.mark.parametrize("make", [fix_b, lambda: cantor(2), lambda: grid2d(3)])
@pytest.mark.parametrize("theta, p", [(0.3, 1.5), (0.5, 2.0), (0.7, 3.0)])
def test_besov_matches_oracle(make, theta, p):
    space = make().space
    u = np.random.default_rng(0).standard_normal(space.n)
    assert besov_energy(space, theta, p, u) == pytest.approx(_besov_oracle(space, theta, p, u), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-5, 5), st.floats(1.1, 4.0), st.floats(0.05, 0.95))
def test_besov_homogeneous_and_permutation_invariant(seed, lam, p, theta):
    rng = np.random.default_rng(seed)
    x = rng.random(7)
    m = rng.random(7) + 0.1
    s = from_coords(x, m)
    u = rng.standard_normal(7)
    e = besov_energy(s, theta, p, u)
    assert e >= 0
    assert besov_energy(s, theta, p, lam * u) == pytest.approx(abs(lam) ** p * e, rel=1e-9, abs=1e-300)
    perm = rng.permutation(7)
    sp = from_coords(x[perm], m[perm])
    assert besov_energy(sp, theta, p, u[perm]) == pytest.approx(e, rel=1e-12)


def test_restricted_energy(fixb):
    s = fixb.space
    u = np.linspace(0, 1, 8) ** 2
    everything = SubsetMask(np.ones(8, bool))
    assert restricted_besov_energy(s, everything, 0.5, 2.0, u) == pytest.approx(besov_energy(s, 0.5, 2.0, u))
    assert restricted_besov_energy(s, SubsetMask.from_ids(8, [3]), 0.5, 2.0, u) == 0.0
    assert restricted_besov_energy(s, SubsetMask.from_ids(8, [1, 2, 5]), 0.5, 2.0, np.ones(8)) == 0.0


def test_exponent_ranges(fixb):
    with pytest.raises(ValueError):
        besov_energy(fixb.space, 1.0, 2.0, np.zeros(8))
    with pytest.raises(ValueError):
        besov_energy(fixb.space, 0.5, 1.0, np.zeros(8))


# ---------------------------------------------------------------- fractional Hardy LHS


def test_frac_lhs_fix_a(fixa):
    assert frac_hardy_lhs(fixa.space, fixa.E, 0.5, 2.0, [0.0, 1.0]) == pytest.approx(2.0, rel=1e-15)
    assert frac_hardy_lhs(fixa.space, fixa.E, 0.5, 2.0, [0.0, 0.0]) == 0.0
    assert frac_hardy_lhs(fixa.space, fixa.E, 0.5, 2.0, [0.0, -3.0]) == pytest.approx(18.0)
    with pytest.raises(ValueError, match="vanish"):
        frac_hardy_lhs(fixa.space, fixa.E, 0.5, 2.0, [1.0, 1.0])


# ---------------------------------------------------------------- Dirichlet


def test_dirichlet_single_edge():
    g = _path([0.5], [0.25])
    assert dirichlet_energy(g, 2.0, [0.0, 1.0]) == pytest.approx(1.0, rel=1e-15)
    assert dirichlet_energy(g, 2.0, [4.0, 4.0]) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 3), st.floats(0.01, 3), st.floats(-4, 4), st.floats(1.1, 4))
def test_dirichlet_midpoint_refinement_identity(ell, m, du, p):
    whole = dirichlet_energy(_path([ell], [m]), p, [0.0, du])
    halves = dirichlet_energy(_path([ell / 2, ell / 2], [m / 2, m / 2]), p, [0.0, du / 2, du])
    assert halves == pytest.approx(whole, rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 3), st.floats(0.01, 3), st.floats(-4, 4), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(1.1, 4))
def test_linear_profile_minimizes_edge_energy(ell, m, du, a, b, p):
    linear = dirichlet_energy(_path([ell], [m]), p, [0.0, du])
    # three equal segments with the two interior values perturbed
    bumpy = dirichlet_energy(_path([ell / 3] * 3, [m / 3] * 3), p, [0.0, du / 3 + a, 2 * du / 3 + b, du])
    assert linear <= bumpy * (1 + 1e-12)


def test_dirichlet_on_filling_nonnegative(fixb):
    f = make_filling(fixb.space, 0.5)
    u = np.random.default_rng(1).standard_normal(f.n_nodes)
    assert dirichlet_energy(f, 2.5, u) > 0
    assert dirichlet_energy(f, 2.5, np.ones(f.n_nodes)) == 0.0


# ---------------------------------------------------------------- filling Hardy LHS


def test_filling_lhs_one_term():
    # one free vertex with m(v) = 0.2 at d_eps 0.4 from E
    assert DiagonalForm(np.array([0.2 / 0.4**2]), 2.0)(np.array([1.0])) == pytest.approx(1.25)


@pytest.mark.parametrize("make", [fix_a, fix_b, lambda: grid1d(16)])
def test_filling_lhs_weights(make):
    inst = make()
    f = make_filling(inst.space, 0.5)
    e_nodes = f.boundary[inst.E.mask]
    d = heap_dijkstra(f.n_nodes, f.src, f.dst, f.length, e_nodes)
    # node mass = half the incident edge masses
    nm = np.zeros(f.n_nodes)
    for a, b, m in zip(f.src, f.dst, f.mass):
        nm[a] += m / 2
        nm[b] += m / 2
    form = filling_hardy_form(f, inst.E, 2.0)
    free = np.ones(f.n_nodes, bool)
    free[e_nodes] = False
    np.testing.assert_allclose(form.a[free], nm[free] / d[free] ** 2, rtol=1e-12)
    assert np.all(form.a[~free] == 0)


@pytest.mark.parametrize("make", [fix_a, fix_b, lambda: grid1d(32), lambda: cantor(4), lambda: grid2d(6)])
def test_quadrature_refinement_factor(make):
    inst = make()
    f = make_filling(inst.space, 0.5)
    rng = np.random.default_rng(2)
    for p in (1.5, 2.0, 3.0):
        u = np.abs(rng.standard_normal(f.n_nodes))
        u[f.boundary[inst.E.mask]] = 0
        lumped = filling_hardy_lhs(f, inst.E, p, u)
        refined = filling_hardy_lhs(f, inst.E, p, u, refine=True)
        assert 0.5 <= refined / lumped <= 2.0


def test_filling_lhs_errors(fixb):
    f = make_filling(fixb.space, 0.5)
    with pytest.raises(ValueError, match="nonempty"):
        filling_hardy_lhs(f, SubsetMask(np.zeros(8, bool)), 2.0, np.zeros(f.n_nodes))
    u = np.ones(f.n_nodes)
    with pytest.raises(ValueError, match="vanish"):
        filling_hardy_lhs(f, fixb.E, 2.0, u)
    assert filling_hardy_lhs(f, fixb.E, 2.0, np.zeros(f.n_nodes)) == 0.0
