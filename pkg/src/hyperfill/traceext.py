"""Extension of boundary data into a filling and the trace back to the boundary."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import spsolve

from .energy import besov_form, dirichlet_form
from .filling import Filling, d_eps_from_set
from .space import PointCloudSpace


def extend(filling: Filling, space: PointCloudSpace | None, f) -> np.ndarray:
    """Ef: nu-average of f over the open ball B_Z(z, alpha^-i) at (z, i), f(z) at b_z."""
    space = space or filling.space
    f = np.asarray(f, dtype=float)
    nv = filling.n_vertices
    z = filling.node_z[:nv]
    rad = filling.params.alpha ** (-filling.node_level[:nv].astype(float))
    inside = space.dist[z] < rad[:, None]
    out = np.empty(filling.n_nodes)
    out[:nv] = (inside @ (space.mass * f)) / (inside @ space.mass)
    out[nv:] = f[filling.node_z[nv:]]
    return out


def harmonic_extension(filling: Filling, f) -> np.ndarray:
    """Minimizer of the p = 2 filling energy with boundary values u(b_z) = f(z)."""
    f = np.asarray(f, dtype=float)
    nv = filling.n_vertices
    lap = dirichlet_form(filling, 2.0).matrix()
    u = np.empty(filling.n_nodes)
    u[nv:] = f[filling.node_z[nv:]]
    u[:nv] = spsolve(lap[:nv, :nv].tocsc(), -(lap[:nv, nv:] @ u[nv:]))
    return u


def _ball_average(filling: Filling, u, node_dist, r):
    """mu_beta-average over {d < r} of the edgewise-linear extension of u."""
    du, dv = node_dist[filling.src], node_dist[filling.dst]
    ell = filling.length
    ua, ub = u[filling.src], u[filling.dst]
    slope = (ub - ua) / ell
    # inside part of [0, ell] is [0, s_a) from the src end and (ell - s_b, ell] from the dst end
    s_a = np.clip(r - du, 0.0, ell)
    s_b = np.clip(r - dv, 0.0, ell)
    whole = s_a + s_b >= ell
    s_a = np.where(whole, ell, s_a)
    s_b = np.where(whole, 0.0, s_b)
    integral = ua * s_a + slope * s_a**2 / 2.0 + ub * s_b - slope * s_b**2 / 2.0
    density = filling.mass / ell
    return float(np.dot(density, integral) / np.dot(density, s_a + s_b))


def trace(filling: Filling, u, via_averages: bool = False, radii=None) -> np.ndarray:
    """Tu(z) = u(b_z).

    With ``via_averages`` the small-ball averages at ``radii`` (default three
    radii inside the tail) are returned as an array of shape (len(radii), n),
    for cross-checking the limit definition.
    """
    u = np.asarray(u, dtype=float)
    if not via_averages:
        return u[filling.boundary].copy()
    if radii is None:
        tail = float(filling.length[filling.kind == 2].min())
        radii = tail * np.array([1e-2, 1e-4, 1e-6])
    out = np.empty((len(radii), filling.space.n))
    for z, b in enumerate(filling.boundary):
        dist = d_eps_from_set(filling, [b])
        for k, r in enumerate(radii):
            out[k, z] = _ball_average(filling, u, dist, r)
    return out


@dataclass
class BoundednessReport:
    r_trace: float
    r_extend: float
    trace_argmax: int
    extend_argmax: int
    trace_ratios: np.ndarray
    extend_ratios: np.ndarray

    def as_dict(self) -> dict:
        return {"R_T": self.r_trace, "R_E": self.r_extend,
                "trace_argmax": self.trace_argmax, "extend_argmax": self.extend_argmax}


def boundedness_report(filling: Filling, space: PointCloudSpace | None, theta: float, p: float,
                       n_samples: int = 64, seed: int = 0, rtol: float = 1e-9) -> BoundednessReport:
    """Sampled lower bounds R_T >= sup B(Tu)/D(u) and R_E >= sup D(Ef)/B(f).

    Boundary samples: sample 0 is the indicator of the first atom, the rest
    are Gaussian. Filling samples alternate between harmonic extensions of
    Gaussian boundary data (near-extremal for the trace) and E f plus small
    vertex noise.
    """
    space = space or filling.space
    target = p * (1.0 - theta)
    ratio = filling.beta / filling.params.eps
    if abs(ratio - target) > rtol * max(1.0, target):
        raise ValueError(f"beta/eps = {ratio} but p(1-theta) = {target}")
    rng = np.random.default_rng(seed)
    besov = besov_form(space, theta, p)
    dirichlet = dirichlet_form(filling, p)

    f_samples = rng.standard_normal((n_samples, space.n))
    f_samples[0] = 0.0
    f_samples[0, 0] = 1.0
    ext = []
    for f in f_samples:
        b = besov(f)
        ext.append(dirichlet(extend(filling, space, f)) / b if b > 0 else np.nan)
    ext = np.array(ext)

    tr = []
    for k in range(n_samples):
        g = rng.standard_normal(space.n)
        if k % 2 == 0:
            u = harmonic_extension(filling, g)
        else:
            u = extend(filling, space, g)
            u[:filling.n_vertices] += 0.1 * rng.standard_normal(filling.n_vertices)
        d = dirichlet(u)
        tr.append(besov(trace(filling, u)) / d if d > 0 else np.nan)
    tr = np.array(tr)
    it, ie = int(np.nanargmax(tr)), int(np.nanargmax(ext))
    return BoundednessReport(float(tr[it]), float(ext[ie]), it, ie, tr, ext)

