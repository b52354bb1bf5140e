import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperfill.energy import (DiagonalForm, PairEnergy, besov_form, dirichlet_form, filling_hardy_form,
                              frac_hardy_form, restricted_besov_energy)
from hyperfill.filling import make_filling
from hyperfill.fixtures import cantor, fix_a, fix_b, grid1d, grid2d
from hyperfill.solver import (SolveOptions, SolverError, best_constant_filling, best_constant_fractional,
                              brute_force_oracle, min_quotient_general, min_quotient_quadratic,
                              reduce_quotient, vcap)
from hyperfill.space import SubsetMask, from_coords


def _dense_min(energy: PairEnergy, lhs: DiagonalForm, zero):
    """Smallest generalized eigenvalue of the reduced p = 2 problem by dense eigh."""
    n = energy.n
    L = np.zeros((n, n))
    for i, j, w in zip(energy.i, energy.j, energy.w):
        L[i, i] += w
        L[j, j] += w
        L[i, j] -= w
        L[j, i] -= w
    free = np.flatnonzero(~np.asarray(zero, bool))
    return scipy.linalg.eigh(L[np.ix_(free, free)], np.diag(lhs.a[free]), eigvals_only=True)[0]


def _random_instance(seed, n=8, k_e=2):
    rng = np.random.default_rng(seed)
    s = from_coords(rng.random(n), rng.random(n) + 0.2)
    E = SubsetMask.from_ids(n, rng.choice(n, k_e, replace=False))
    return s, E


def _path_pair(n):
    i = np.arange(n - 1)
    return PairEnergy(i, i + 1, np.ones(n - 1), n, 2.0)


# ---------------------------------------------------------------- p = 2


def test_identity_quotient():
    A = np.eye(4)
    rep = min_quotient_quadratic(A, A)
    assert rep.lam == pytest.approx(1.0, rel=1e-12)
    assert rep.best_constant * rep.lam == pytest.approx(1.0)


def test_path_graph_three_free_nodes():
    energy = _path_pair(5)
    lhs = DiagonalForm(np.array([0.0, 1.0, 2.0, 0.5, 0.0]), 2.0)
    zero = np.array([True, False, False, False, True])
    rep = min_quotient_quadratic(energy, lhs, zero)
    assert rep.lam == pytest.approx(_dense_min(energy, lhs, zero), rel=1e-10)
    assert np.all(rep.minimizer[zero] == 0)


def test_no_free_variables():
    with pytest.raises(SolverError, match="no free"):
        min_quotient_quadratic(_path_pair(3), DiagonalForm(np.ones(3), 2.0), np.ones(3, bool))


@pytest.mark.parametrize("seed", range(6))
def test_inverse_iteration_matches_eigh_up_to_40(seed):
    rng = np.random.default_rng(seed)
    n = 42
    s = from_coords(rng.random((n, 2)))
    E = SubsetMask.from_ids(n, [0, 1])
    energy = besov_form(s, 0.5, 2.0)
    lhs = frac_hardy_form(s, E, 0.5, 2.0)
    rep = min_quotient_quadratic(energy, lhs, E.mask)
    assert rep.lam == pytest.approx(_dense_min(energy, lhs, E.mask), rel=1e-8)


def test_general_matches_quadratic_on_fixtures():
    for inst in (fix_b(), grid1d(16), cantor(2)):
        e = besov_form(inst.space, 0.5, 2.0)
        lhs = frac_hardy_form(inst.space, inst.E, 0.5, 2.0)
        q = min_quotient_quadratic(e, lhs, inst.E.mask).lam
        g = min_quotient_general(2.0, e, lhs, inst.E.mask).lam
        assert g == pytest.approx(q, rel=1e-6)


def test_pg_engine_matches_lbfgs(fixb):
    e = besov_form(fixb.space, 0.5, 3.0)
    lhs = frac_hardy_form(fixb.space, fixb.E, 0.5, 3.0)
    a = min_quotient_general(3.0, e, lhs, fixb.E.mask).lam
    b = min_quotient_general(3.0, e, lhs, fixb.E.mask, SolveOptions(engine="pg", restarts=2)).lam
    assert b == pytest.approx(a, rel=1e-5)


def test_minimizer_is_normalized(fixb):
    e = besov_form(fixb.space, 0.4, 2.5)
    lhs = frac_hardy_form(fixb.space, fixb.E, 0.4, 2.5)
    rep = min_quotient_general(2.5, e, lhs, fixb.E.mask)
    assert lhs(rep.minimizer) == pytest.approx(1.0, rel=1e-12)
    assert e(rep.minimizer) == pytest.approx(rep.lam, rel=1e-12)
    assert e(3 * rep.minimizer) / lhs(3 * rep.minimizer) == pytest.approx(rep.lam, rel=1e-12)


# ---------------------------------------------------------------- oracle


def test_oracle_identity_quotient():
    # pure killing weights to a zero node: sum u^2 / sum u^2
    e = PairEnergy(np.array([0, 0]), np.array([1, 2]), np.array([1.0, 1.0]), 3, 2.0)
    lhs = DiagonalForm(np.array([0.0, 1.0, 1.0]), 2.0)
    assert brute_force_oracle(2.0, e, lhs, [0], n_starts=500) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_oracle_matches_eigh(seed):
    s, E = _random_instance(seed, n=7, k_e=2)
    e = besov_form(s, 0.5, 2.0)
    lhs = frac_hardy_form(s, E, 0.5, 2.0)
    assert brute_force_oracle(2.0, e, lhs, E.mask, n_starts=2000) == pytest.approx(_dense_min(e, lhs, E.mask),
                                                                                   rel=1e-8)


def test_oracle_ignores_uncoupled_free_node():
    energy = _path_pair(4)
    lhs = DiagonalForm(np.array([0.0, 1.0, 3.0, 0.0]), 2.0)
    zero = [0, 3]
    base = brute_force_oracle(2.0, energy, lhs, zero, n_starts=1000)
    bigger = PairEnergy(energy.i, energy.j, energy.w, 5, 2.0)
    lhs5 = DiagonalForm(np.array([0.0, 1.0, 3.0, 0.0, 0.0]), 2.0)
    assert brute_force_oracle(2.0, bigger, lhs5, zero, n_starts=1000) == pytest.approx(base, rel=1e-9)


def test_oracle_limit():
    s, E = _random_instance(0, n=9, k_e=2)
    with pytest.raises(SolverError, match="6 free"):
        brute_force_oracle(2.0, besov_form(s, 0.5, 2.0), frac_hardy_form(s, E, 0.5, 2.0), E.mask)


def test_four_free_nodes_p3():
    s, E = _random_instance(11, n=6, k_e=2)
    e = besov_form(s, 0.5, 3.0)
    lhs = frac_hardy_form(s, E, 0.5, 3.0)
    ours = min_quotient_general(3.0, e, lhs, E.mask).lam
    oracle = brute_force_oracle(3.0, e, lhs, E.mask, n_starts=2000)
    assert abs(ours - oracle) <= 0.01 * oracle


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1.5, 2.0, 3.0]))
def test_lambda_below_test_fields(seed, p):
    s, E = _random_instance(seed, n=10, k_e=3)
    e = besov_form(s, 0.5, p)
    lhs = frac_hardy_form(s, E, 0.5, p)
    lam = min_quotient_general(p, e, lhs, E.mask, SolveOptions(restarts=3)).lam
    rng = np.random.default_rng(seed)
    for _ in range(20):
        u = rng.standard_normal(s.n)
        u[E.mask] = 0
        assert lam <= e(u) / lhs(u) * (1 + 1e-9)


# ---------------------------------------------------------------- Hardy constants


def test_fix_a_fractional_constant(fixa):
    rep = best_constant_fractional(fixa.space, fixa.E, 0.5, 2.0)
    assert rep.lam == pytest.approx(2.0, rel=1e-12)
    assert rep.best_constant == pytest.approx(0.5, rel=1e-12)
    for p in (1.5, 3.0):
        # one free value t: both sides carry the same d^(-theta p) factor
        rep = best_constant_fractional(fixa.space, fixa.E, 0.5, p)
        assert rep.lam == pytest.approx(2.0, rel=1e-9)


def test_empty_E_rejected(fixa):
    with pytest.raises(ValueError):
        best_constant_fractional(fixa.space, SubsetMask(np.zeros(2, bool)), 0.5, 2.0)


@pytest.mark.parametrize("make", [fix_b, lambda: grid1d(16), lambda: cantor(2), lambda: grid2d(4)])
def test_positive_lambda_and_small_spread(make):
    inst = make()
    for p in (1.5, 3.0):
        rep = best_constant_fractional(inst.space, inst.E, 0.5, p)
        assert rep.lam > 0
        assert rep.spread <= 1.01
        # the constant field on Omega is admissible and couples to E
        u = (~inst.E.mask).astype(float)
        e = besov_form(inst.space, 0.5, p)
        lhs = frac_hardy_form(inst.space, inst.E, 0.5, p)
        assert rep.lam <= e(u) / lhs(u)


def test_filling_constant_matches_oracle(fixa):
    f = make_filling(fixa.space, 0.5)
    for p in (1.5, 2.0, 3.0):
        rep = best_constant_filling(make_filling(fixa.space, 0.25 * p * 0.5), fixa.E, p)
        g = make_filling(fixa.space, 0.25 * p * 0.5)
        e = dirichlet_form(g, p)
        lhs = filling_hardy_form(g, fixa.E, p)
        oracle = brute_force_oracle(p, e, lhs, g.boundary_mask(fixa.E.mask), n_starts=2000)
        assert abs(rep.lam - oracle) <= 0.01 * oracle
    assert f.n_nodes - 1 <= 6


def test_filling_constant_grows_as_E_shrinks():
    inst = grid1d(16)
    f = make_filling(inst.space, 0.25)
    lams = []
    for ids in ([0, 5, 10, 15], [0, 10, 15], [0, 15], [0]):
        lams.append(best_constant_filling(f, SubsetMask.from_ids(16, ids), 2.0).lam)
    assert all(a >= b for a, b in zip(lams, lams[1:]))


def test_solve_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(tolerance=0)
    with pytest.raises(ValueError):
        SolveOptions(restarts=0)
    with pytest.raises(ValueError):
        SolveOptions(engine="newton")


def test_degenerate_lhs():
    with pytest.raises(SolverError, match="degenerate"):
        reduce_quotient(_path_pair(3), DiagonalForm(np.zeros(3), 2.0), [0])


# ---------------------------------------------------------------- capacity


def _line(n=41):
    return from_coords(np.linspace(-1, 1, n) * 0.25)


def test_vcap_empty_set():
    s = _line()
    assert vcap(s, [], 20, 0.05, 4, 0.5, 2.0).value == 0.0


def test_vcap_full_inner_ball_matches_oracle():
    s = from_coords(np.arange(-2, 3) * 0.1)  # 5 points, all inside the window
    c, r, lam = 2, 0.1, 2.5
    inner = s.dist[c] < 2 * r
    # E_cap = 2B: truncation at 1 lowers the energy, so the optimum is u = 1 on 2B
    res = vcap(s, SubsetMask(inner), c, r, lam, 0.5, 2.0)
    cut = 0.0
    for z in range(5):
        for x in range(5):
            if inner[z] != inner[x]:
                d = s.dist[z, x]
                cut += s.mass[z] * s.mass[x] / (d ** 1.0 * s.mass[s.dist[z] < d].sum())
    assert res.value > 0
    assert res.value == pytest.approx(cut, rel=1e-9)
    np.testing.assert_allclose(res.field[inner], 1.0, atol=1e-8)


def test_vcap_bound_by_tent_family():
    s = _line(81)
    c, r = 40, 0.05
    d0 = s.dist[c]
    window = SubsetMask(d0 < 4 * r)
    cap = vcap(s, [c], c, r, 4, 0.4, 2.0)
    for eta in np.geomspace(0.01, r, 5):
        u = np.maximum(0, 1 - d0 / eta)
        assert cap.value <= restricted_besov_energy(s, window, 0.4, 2.0, u) * (1 + 1e-9)


def test_vcap_monotone():
    s = _line(81)
    c = 40
    small = vcap(s, [c], c, 0.05, 4, 0.4, 2.0).value
    larger_set = vcap(s, [c - 1, c, c + 1], c, 0.05, 4, 0.4, 2.0).value
    assert larger_set >= small * (1 - 1e-9)
    wider = vcap(s, [c], c, 0.08, 4 * 0.05 / 0.08, 0.4, 2.0).value
    assert wider <= small * (1 + 1e-6)


def test_vcap_errors():
    s = _line()
    with pytest.raises(ValueError, match="Lambda"):
        vcap(s, [20], 20, 0.05, 1.5, 0.5, 2.0)
    with pytest.raises(ValueError, match="closed ball"):
        vcap(s, [0], 20, 0.05, 4, 0.5, 2.0)
