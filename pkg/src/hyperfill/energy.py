"""Energies and Hardy left-hand sides as exact finite sums.

Every energy here has the shape sum_k w_k |u[i_k] - u[j_k]|^p (a
:class:`PairEnergy`) and every left-hand side has the shape
sum_v a_v |u_v|^p (a :class:`DiagonalForm`); the solvers work with these
two shapes only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import kernels
from .filling import Filling, d_eps_from_set, edge_midpoint_distance
from .space import PointCloudSpace, SubsetMask, distance_to_set


@dataclass(frozen=True, eq=False)
class PairEnergy:
    """u -> sum_k w[k] |u[i[k]] - u[j[k]]|^p on a vector of length n."""

    i: np.ndarray
    j: np.ndarray
    w: np.ndarray
    n: int
    p: float

    def __call__(self, u):
        return kernels.pair_energy(self.i, self.j, self.w, u, self.p)

    def value_and_grad(self, u):
        return kernels.pair_energy_grad(self.i, self.j, self.w, u, self.p)

    def matrix(self) -> sparse.csr_matrix:
        """Quadratic form of the p = 2 version (a weighted graph Laplacian)."""
        n = self.n
        off = sparse.coo_matrix((self.w, (self.i, self.j)), shape=(n, n))
        off = off + off.T
        deg = np.asarray(off.sum(axis=1)).ravel()
        return (sparse.diags(deg) - off).tocsr()

    def degree(self) -> np.ndarray:
        return np.bincount(self.i, self.w, self.n) + np.bincount(self.j, self.w, self.n)


@dataclass(frozen=True, eq=False)
class DiagonalForm:
    """u -> sum_v a[v] |u_v|^p."""

    a: np.ndarray
    p: float

    def __call__(self, u):
        return float(np.dot(self.a, np.abs(u) ** self.p))

    def value_and_grad(self, u):
        au = np.abs(u)
        val = float(np.dot(self.a, au**self.p))
        return val, self.p * self.a * au ** (self.p - 1) * np.sign(u)


def _check_exponents(theta, p):
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0,1), got {theta}")
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")


# ---------------------------------------------------------------- Besov side


def besov_form(space: PointCloudSpace, theta: float, p: float,
               window: SubsetMask | None = None) -> PairEnergy:
    """Besov energy as symmetric pair weights over unordered pairs z < w.

    The ordered kernel nu_z nu_w / (d^{theta p} nu(B(z, d))) is not
    symmetric, so the two orientations are summed.
    """
    _check_exponents(theta, p)
    balls = kernels.open_ball_masses(space.dist, space.mass)
    idx = np.arange(space.n) if window is None else window.ids
    sub = np.ix_(idx, idx)
    d = space.dist[sub]
    m = space.mass[idx]
    a, b = np.triu_indices(idx.size, k=1)
    dab = d[a, b] ** (theta * p)
    bz = balls[sub]
    w = m[a] * m[b] / dab * (1.0 / bz[a, b] + 1.0 / bz[b, a])
    return PairEnergy(idx[a].astype(np.int64), idx[b].astype(np.int64), w, space.n, float(p))


def besov_energy(space: PointCloudSpace, theta: float, p: float, u) -> float:
    return besov_form(space, theta, p)(np.asarray(u, dtype=float))


def restricted_besov_energy(space: PointCloudSpace, window: SubsetMask, theta: float, p: float, u) -> float:
    """Besov energy with both sums over the window; ball masses stay those of Z."""
    return besov_form(space, theta, p, window)(np.asarray(u, dtype=float))


def frac_hardy_form(space: PointCloudSpace, E: SubsetMask, theta: float, p: float) -> DiagonalForm:
    _check_exponents(theta, p)
    dE = distance_to_set(space, E)
    a = np.zeros(space.n)
    om = ~E.mask
    a[om] = dE[om] ** (-theta * p) * space.mass[om]
    return DiagonalForm(a, float(p))


def _assert_vanishes(u, mask, what):
    if np.any(u[mask] != 0):
        raise ValueError(f"field must vanish on {what}")


def frac_hardy_lhs(space: PointCloudSpace, E: SubsetMask, theta: float, p: float, u) -> float:
    u = np.asarray(u, dtype=float)
    _assert_vanishes(u, E.mask, "E")
    return frac_hardy_form(space, E, theta, p)(u)


# ---------------------------------------------------------------- filling side


def dirichlet_form(filling: Filling, p: float) -> PairEnergy:
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    w = filling.mass / filling.length**p
    return PairEnergy(filling.src, filling.dst, w, filling.n_nodes, float(p))


def dirichlet_energy(filling: Filling, p: float, u) -> float:
    """sum over edges of (|du| / length)^p * mass, tails included."""
    return dirichlet_form(filling, p)(np.asarray(u, dtype=float))


def _e_nodes(filling: Filling, E) -> np.ndarray:
    mask = E.mask if isinstance(E, SubsetMask) else np.asarray(E, dtype=bool)
    if not mask.any():
        raise ValueError("E must be nonempty")
    return filling.boundary_mask(mask)


def filling_hardy_form(filling: Filling, E, p: float) -> DiagonalForm:
    """Vertex-lumped weights d_eps(v, E)^{-p} m(v), zero on the E boundary nodes."""
    e_nodes = _e_nodes(filling, E)
    dist = d_eps_from_set(filling, e_nodes)
    a = np.zeros(filling.n_nodes)
    free = ~e_nodes
    a[free] = dist[free] ** (-p) * filling.node_mass[free]
    return DiagonalForm(a, float(p))


def filling_hardy_lhs(filling: Filling, E, p: float, u, refine: bool = False) -> float:
    """Hardy left-hand side on the filling.

    ``refine`` adds each edge midpoint as a quadrature node carrying half the
    edge mass, with the linear midpoint value; endpoints keep a quarter of
    the edge mass each.
    """
    u = np.asarray(u, dtype=float)
    e_nodes = _e_nodes(filling, E)
    _assert_vanishes(u, e_nodes, "the boundary nodes of E")
    if not refine:
        return filling_hardy_form(filling, E, p)(u)
    dist = d_eps_from_set(filling, e_nodes)
    free = ~e_nodes
    node_w = 0.5 * filling.node_mass
    total = float(np.dot(node_w[free] * dist[free] ** (-p), np.abs(u[free]) ** p))
    mid_u = 0.5 * (u[filling.src] + u[filling.dst])
    mid_d = edge_midpoint_distance(filling, dist)
    total += float(np.dot(0.5 * filling.mass * mid_d ** (-p), np.abs(mid_u) ** p))
    return total
