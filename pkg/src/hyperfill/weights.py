"""Regularizable weights: ball averages, discrete convolution and the explicit constants."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .covers import Domain, partition_of_unity, whitney_cover
from .filling import Filling, d_eps_from_set
from .space import PointCloudSpace, SubsetMask, distance_to_set, min_separation


@dataclass(frozen=True, eq=False)
class WeightField:
    values: np.ndarray
    tag: str = ""

    def __mul__(self, other: "WeightField") -> "WeightField":
        return WeightField(self.values * other.values, f"{self.tag}*{other.tag}")


def distance_power_weight(obj, E, sigma: float) -> WeightField:
    """dist(., E)^sigma on the samples of a space, a filling (vertices) or a Domain.

    On a space the values on E itself are NaN (E is outside the domain).
    On a Domain the distance is d_Omega.
    """
    sigma = float(sigma)
    if isinstance(obj, PointCloudSpace):
        d = distance_to_set(obj, E)
        vals = np.full(obj.n, np.nan)
        om = ~E.mask
        vals[om] = d[om] ** sigma
        return WeightField(vals, f"d(.,E)^{sigma:g}")
    if isinstance(obj, Filling):
        mask = E.mask if isinstance(E, SubsetMask) else np.asarray(E, dtype=bool)
        d = d_eps_from_set(obj, obj.boundary_mask(mask))[:obj.n_vertices]
    elif isinstance(obj, Domain):
        d = obj.d_omega
    else:
        raise TypeError(f"unsupported domain type {type(obj).__name__}")
    if np.any(d <= 0):
        raise ValueError("distance vanishes at a sample point of the domain")
    return WeightField(d**sigma, f"d(.,E)^{sigma:g}")


def _values(w, domain: Domain) -> np.ndarray:
    vals = w.values if isinstance(w, WeightField) else np.asarray(w, dtype=float)
    if vals.shape != (domain.n,):
        raise ValueError(f"weight has shape {vals.shape}, domain has {domain.n} samples")
    return vals


def whitney_ball_averages(domain: Domain, w) -> tuple[np.ndarray, np.ndarray]:
    """Centers and mass-weighted averages w_B over the Whitney balls B(x, d_Omega(x)/8)."""
    vals = _values(w, domain)
    centers = np.flatnonzero(domain.omega)
    r = domain.d_omega[centers] / 8.0
    ball = domain.dist[centers] < r[:, None]
    wm = np.where(ball, vals * domain.mass, 0.0).sum(axis=1)
    return centers, wm / (ball @ domain.mass)


def delta_star(domain: Domain, w) -> float:
    """Least delta with |w_{B_x} - w_{B_x'}| <= delta w_{B_x} over all 2B_x' ∩ B_x ≠ ∅."""
    centers, wb = whitney_ball_averages(domain, w)
    r = domain.d_omega[centers] / 8.0
    d = domain.dist[centers]
    inside = (d < r[:, None]).astype(np.float64)
    double = (d < 2 * r[:, None]).astype(np.float64)
    meet = (inside @ double.T) > 0  # meet[x, x']
    np.fill_diagonal(meet, False)
    if not meet.any():
        warnings.warn("no intersecting Whitney pairs; delta_star is 0", stacklevel=2)
        return 0.0
    rel = np.abs(wb[:, None] - wb[None, :]) / wb[:, None]
    return float(rel[meet].max())


def discrete_convolution(domain: Domain, w) -> WeightField:
    """w~(x) = sum_i w_{B_i} phi_i(x) over the Whitney cover of the domain."""
    cover = whitney_cover(domain)
    pu = partition_of_unity(cover)
    _, wb = whitney_ball_averages(domain, w)
    vals = np.full(domain.n, np.nan)
    vals[cover.centers] = pu.phi @ wb
    return WeightField(vals, "conv")


def comparability(domain: Domain, w) -> tuple[float, float]:
    """Range of w~_B / w_B over the Whitney balls."""
    wt = discrete_convolution(domain, w).values
    centers, wb = whitney_ball_averages(domain, w)
    _, wtb = whitney_ball_averages(domain, np.nan_to_num(wt))
    ratio = wtb / wb
    return float(ratio.min()), float(ratio.max())


def regularized_gradient_check(domain: Domain, w, delta: float):
    """Least C0 with |w~(x) - w~(y)| / d(x, y) <= C0 delta w~ / d_Omega at both ends.

    Returns (holds, C0); C0 = 0 for a constant weight.
    """
    ds = delta_star(domain, w)
    if delta < ds * (1 - 1e-12):
        raise ValueError(f"delta = {delta} is below the measured delta_star = {ds}")
    _, wb = whitney_ball_averages(domain, w)
    if np.ptp(wb) == 0:
        return True, 0.0
    wt = discrete_convolution(domain, w).values
    a, b = domain.pairs[:, 0], domain.pairs[:, 1]
    keep = domain.omega[a] & domain.omega[b]
    a, b = a[keep], b[keep]
    if a.size == 0:
        return True, 0.0
    slope = np.abs(wt[a] - wt[b]) / domain.dist[a, b]
    bound = delta * np.minimum(wt[a] / domain.d_omega[a], wt[b] / domain.d_omega[b])
    c0 = float((slope / bound).max())
    return bool(np.isfinite(c0)), c0


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class SigmaBound:
    sigma0: float
    sigmas: tuple   # sigma_1 .. sigma_4
    taus: tuple     # tau_1 .. tau_4
    C1: float
    capped: bool    # True when kappa/2 is the active bound


def sigma_bound(delta: float, kappa: float, C: float) -> SigmaBound:
    """Explicit sigma_0 for dist(., E)^sigma to be delta-regularizable."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0,1), got {delta}")
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if not C >= 1:
        raise ValueError(f"C must be at least 1, got {C}")
    log = math.log
    s1 = min(log(delta + 1) / log(11 / 4), log(1 / (1 - delta)) / log(16 / 3))
    t1 = 0.7 * (1 / C * (1 - 1 / (1 + delta / 2))) ** (1 / kappa)
    t2 = (2 / 3) * (delta / (2 * C)) ** (1 / kappa)
    up = log((1 + delta) / (1 + delta / 2))
    down = log((1 - delta / 2) / (1 - delta))
    s2 = min(up / log(8 / t1), down / log(15 / t2))
    s3 = min(log(1 / (1 - delta)) / log(11 / 4), log(1 + delta) / log(16 / 3))
    C1 = C * 2 ** (kappa / 2) / (1 - 2 ** (-kappa / 2))
    t3 = (delta / (2 * C1)) ** (1 / kappa)
    t4 = (1 / C1 * (1 / (1 - delta / 2) - 1)) ** (1 / kappa)
    s4 = min(up / log(8 / min(0.7 * t3, t4)), down / log(15 / min(t3, 2 * t4 / 3)))
    sig = min(s1, s2, s3, s4)
    return SigmaBound(min(sig, kappa / 2), (s1, s2, s3, s4), (t1, t2, t3, t4), C1, kappa / 2 < sig)


def delta_p_threshold(p: float, C0: float, Cp: float, variant: str = "half") -> float:
    """delta_p = p/(2 C0) (2 Cp)^(-1/p); ``variant="full"`` drops the factor 1/2 in front."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if C0 < 1 or Cp < 1:
        raise ValueError("C0 and Cp must be at least 1")
    lead = {"half": p / (2 * C0), "full": p / C0}[variant]
    return lead * (2 * Cp) ** (-1 / p)


# ---------------------------------------------------------------- porosity layers


@dataclass(frozen=True, eq=False)
class LayerFit:
    kappa: float
    C: float
    t: np.ndarray        # rho / r values
    envelope: np.ndarray  # max layer fraction at each t


def layer_fractions(dist, mass, dE, r, rho) -> np.ndarray:
    """mu({y in B(x, r): d(y, E) < rho}) / mu(B(x, r)) for every sample x."""
    ball = dist < r
    return (ball @ (mass * (dE < rho))) / (ball @ mass)


def porosity_layers(dist, mass, dE, r_max: float, rho_min: float,
                    n_r: int = 8, n_t: int = 10) -> LayerFit:
    """Fit mu(layer) <= C (rho/r)^kappa mu(B) over rho_min <= rho <= r < r_max.

    The upper envelope over x and r at each ratio t = rho/r is fit in
    log-log; C is then the least constant making the bound hold on all data.
    """
    if not 0 < rho_min < r_max:
        raise ValueError("need 0 < rho_min < r_max")
    radii = np.geomspace(rho_min, r_max, n_r + 1)[1:] * (1 - 1e-9)
    ts = np.geomspace(rho_min / radii[-1], 1.0, n_t)
    env = np.zeros(n_t)
    for r in radii:
        for k, t in enumerate(ts):
            if t * r >= rho_min * (1 - 1e-12):
                env[k] = max(env[k], layer_fractions(dist, mass, dE, r, t * r).max())
    ok = env > 0
    if ok.sum() < 2:
        raise ValueError("not enough resolved layers to fit")
    kappa = float(np.polyfit(np.log(ts[ok]), np.log(env[ok]), 1)[0])
    C = max(1.0, float((env[ok] / ts[ok] ** kappa).max())) if kappa > 0 else math.inf
    return LayerFit(kappa, C, ts, env)


def space_layers(space: PointCloudSpace, E: SubsetMask, **kw) -> LayerFit:
    """Layers of E in Z; the radius cap is diam(E) (diam(Z) for a single point)."""
    dE = distance_to_set(space, E)
    dE_diam = space.dist[np.ix_(E.ids, E.ids)].max()
    r_max = dE_diam if dE_diam > 0 else space.diam
    return porosity_layers(space.dist, space.mass, dE, r_max, min_separation(space), **kw)


def filling_layers(filling: Filling, **kw) -> LayerFit:
    """Layers of Z inside the filling, node-lumped, resolved down to the tail length."""
    dist = filling.all_distances()
    dZ = filling.boundary_distances
    tail = float(filling.length[filling.kind == 2].max())
    return porosity_layers(dist, filling.node_mass, dZ, filling.space.diam, tail, **kw)


# ---------------------------------------------------------------- Poincare at Whitney scales


def poincare_ratio(filling: Filling, center_dist, r: float, u, p: float, node_w=None) -> float:
    """avg_B |u - u_B| / (r (avg_B g^p)^(1/p)) on B = {d < r} with edge slopes as g.

    Node values are lumped with node masses; the gradient integral uses the
    exact inside length of each edge. Weights are node values, averaged on edges.
    """
    u = np.asarray(u, dtype=float)
    w = np.ones(filling.n_nodes) if node_w is None else np.asarray(node_w, dtype=float)
    inb = center_dist < r
    rho = filling.node_mass * w * inb
    ub = np.dot(rho, u) / rho.sum()
    lhs = np.dot(rho, np.abs(u - ub)) / rho.sum()
    du, dv = center_dist[filling.src], center_dist[filling.dst]
    ell = filling.length
    frac = np.minimum(ell, np.maximum(r - du, 0) + np.maximum(r - dv, 0)) / ell
    em = filling.mass * frac * 0.5 * (w[filling.src] + w[filling.dst])
    g = np.abs(u[filling.src] - u[filling.dst]) / ell
    rhs = r * (np.dot(em, g**p) / em.sum()) ** (1 / p)
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return float(lhs / rhs)


def _node_weights(filling: Filling, w) -> np.ndarray:
    nv = filling.n_vertices
    out = np.empty(filling.n_nodes)
    out[:nv] = w
    z = filling.node_z[nv:]
    out[nv:] = [w[filling.node(zz, filling.L)] for zz in z]
    return out


def poincare_whitney_diagnostic(domain: Domain, w, p: float, n_samples: int = 32, seed: int = 0) -> dict:
    """Worst sampled (1, p)-Poincare ratio over balls with r <= 3 d_Omega(x) / 4."""
    filling = domain.filling
    if filling is None:
        raise ValueError("the diagnostic needs a filling domain (edge slopes)")
    rng = np.random.default_rng(seed)
    node_w = None if w is None else _node_weights(filling, _values(w, domain))
    omega = np.flatnonzero(domain.omega)
    worst, arg = 0.0, None
    for k in range(n_samples):
        x = int(rng.choice(omega))
        r = rng.uniform(0.1, 1.0) * 0.75 * domain.d_omega[x]
        cd = d_eps_from_set(filling, [int(domain.nodes[x])])
        if k % 2:
            u = d_eps_from_set(filling, [int(rng.integers(filling.n_nodes))])
        else:
            u = rng.standard_normal(filling.n_nodes)
        q = poincare_ratio(filling, cd, r, u, p, node_w)
        if q > worst:
            worst, arg = q, (x, float(r), k)
    return {"worst_ratio": worst, "center": None if arg is None else arg[0],
            "radius": None if arg is None else arg[1], "sample": None if arg is None else arg[2]}

