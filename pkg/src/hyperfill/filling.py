"""Uniformized hyperbolic filling of a finite space as a weighted metric graph.

Nodes are the vertices (z, i), z in A_i, i <= L, followed by one boundary
node b_z per point. Each boundary node hangs from (z, L) by a tail edge that
stands in for the infinite vertical ray below level L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .space import NetHierarchy, PointCloudSpace, SpaceError, build_nets, min_level

ALPHA = math.exp(0.25)
TAU = 2.0

HORIZONTAL, VERTICAL, TAIL = 0, 1, 2
KIND_NAMES = ("horizontal", "vertical", "tail")


class FillingError(RuntimeError):
    """Structural failure while building or checking a filling."""


@dataclass(frozen=True)
class FillingParams:
    beta: float
    L: int
    alpha: float = ALPHA
    tau: float = TAU

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1")

    @property
    def eps(self) -> float:
        return math.log(self.alpha)


def vertical_length(k, alpha=ALPHA):
    """Uniformized length of a vertical edge between levels k and k+1."""
    return (1.0 - 1.0 / alpha) * alpha ** (-np.asarray(k, dtype=float)) / math.log(alpha)


def ray_distance(i, alpha=ALPHA):
    """Uniformized distance from level i straight down to the boundary."""
    return alpha ** (-np.asarray(i, dtype=float)) / math.log(alpha)


def tail_mass(nu_z, beta, L):
    """Total mass of the vertical ray below (z, L) for an isolated atom."""
    q = math.exp(-beta)
    return nu_z * (1.0 + q) * math.exp(-beta * L) / (1.0 - q)


@dataclass(frozen=True, eq=False)
class Filling:
    space: PointCloudSpace
    params: FillingParams
    node_z: np.ndarray        # point id carried by each node
    node_level: np.ndarray    # level i; boundary nodes carry L + 1
    n_vertices: int           # nodes [0, n_vertices) are vertices
    ball_nu: np.ndarray       # nu(B_Z(z, alpha^-i)) per vertex (0 on boundary nodes)
    hat_mu: np.ndarray        # vertex weights e^{-beta i} ball_nu
    src: np.ndarray
    dst: np.ndarray
    kind: np.ndarray
    length: np.ndarray
    mass: np.ndarray
    boundary: np.ndarray      # boundary[z] = node index of b_z
    index: dict = field(repr=False)  # (z, i) -> node index

    @property
    def n_nodes(self) -> int:
        return self.node_z.shape[0]

    @property
    def beta(self) -> float:
        return self.params.beta

    @property
    def L(self) -> int:
        return self.params.L

    @property
    def is_boundary(self) -> np.ndarray:
        out = np.zeros(self.n_nodes, dtype=bool)
        out[self.n_vertices:] = True
        return out

    @cached_property
    def node_mass(self) -> np.ndarray:
        """Half the sum of incident edge masses (vertex-lumped quadrature weight)."""
        n = self.n_nodes
        return 0.5 * (np.bincount(self.src, self.mass, n) + np.bincount(self.dst, self.mass, n))

    @cached_property
    def graph(self):
        n = self.n_nodes
        g = coo_matrix((self.length, (self.src, self.dst)), shape=(n, n)).tocsr()
        return g

    @cached_property
    def boundary_distances(self) -> np.ndarray:
        """Distance from every node to the boundary (all b_z)."""
        return d_eps_from_set(self, self.boundary)

    def node(self, z: int, i: int) -> int:
        return self.index[(int(z), int(i))]

    def all_distances(self) -> np.ndarray:
        return dijkstra(self.graph, directed=False)

    def total_mass(self) -> float:
        return float(self.mass.sum())

    def boundary_mask(self, E_mask: np.ndarray) -> np.ndarray:
        """Node mask of the boundary nodes b_z with z in E."""
        out = np.zeros(self.n_nodes, dtype=bool)
        out[self.boundary[np.asarray(E_mask, dtype=bool)]] = True
        return out


def _ball_masses(space, levels, alpha):
    return [(space.dist[lv] < alpha ** (-i)) @ space.mass for i, lv in enumerate(levels)]


def _hat_mu(ball_nu, node_level, n_vertices, beta):
    out = np.zeros_like(ball_nu)
    out[:n_vertices] = np.exp(-beta * node_level[:n_vertices]) * ball_nu[:n_vertices]
    return out


def build_filling(space: PointCloudSpace, nets: NetHierarchy, params: FillingParams) -> Filling:
    if not math.isclose(nets.alpha, params.alpha, rel_tol=0, abs_tol=1e-15):
        raise FillingError("nets were built with a different alpha")
    if params.L < nets.i_star:
        raise SpaceError(f"depth L={params.L} is below i*={nets.i_star}")
    if nets.L < params.L:
        raise FillingError(f"nets only reach level {nets.L}, need {params.L}")
    alpha, tau, beta, L = params.alpha, params.tau, params.beta, params.L
    levels = nets.levels[: L + 1]
    d = space.dist

    node_z, node_level, index = [], [], {}
    for i, lv in enumerate(levels):
        for z in lv:
            index[(int(z), i)] = len(node_z)
            node_z.append(int(z))
            node_level.append(i)
    n_vert = len(node_z)
    boundary = np.arange(n_vert, n_vert + space.n)
    node_z.extend(range(space.n))
    node_level.extend([L + 1] * space.n)
    node_z = np.array(node_z)
    node_level = np.array(node_level)
    start = np.cumsum([0] + [len(lv) for lv in levels])

    ball_nu = np.concatenate(_ball_masses(space, levels, alpha) + [np.zeros(space.n)])
    hat_mu = _hat_mu(ball_nu, node_level, n_vert, beta)

    src, dst, kind, length = [], [], [], []
    for i, lv in enumerate(levels):
        # horizontal: the tau-enlarged balls share a point of Z
        ball = (d[lv] < tau * alpha ** (-i)).astype(float)
        a, b = np.nonzero(np.triu(ball @ ball.T > 0, k=1))
        src.append(start[i] + a)
        dst.append(start[i] + b)
        kind.append(np.full(a.size, HORIZONTAL))
        length.append(np.full(a.size, alpha ** (-i)))
        if i < L:
            nxt = levels[i + 1]
            lower = (d[nxt] < alpha ** (-(i + 1))).astype(float)
            a, b = np.nonzero((d[lv] < alpha ** (-i)).astype(float) @ lower.T > 0)
            src.append(start[i] + a)
            dst.append(start[i + 1] + b)
            kind.append(np.full(a.size, VERTICAL))
            length.append(np.full(a.size, float(vertical_length(i, alpha))))
    tops = np.array([index[(z, L)] for z in range(space.n)])
    src.append(tops)
    dst.append(boundary)
    kind.append(np.full(space.n, TAIL))
    length.append(np.full(space.n, float(ray_distance(L, alpha))))

    src = np.concatenate(src).astype(np.int64)
    dst = np.concatenate(dst).astype(np.int64)
    kind = np.concatenate(kind).astype(np.int8)
    length = np.concatenate(length)
    mass = _edge_masses(space, hat_mu, src, dst, kind, beta, L)

    n = len(node_z)
    g = coo_matrix((np.ones(src.size), (src, dst)), shape=(n, n))
    ncomp, _ = connected_components(g, directed=False)
    if ncomp != 1:
        raise FillingError(f"filling graph has {ncomp} components")
    for arr in (node_z, node_level, ball_nu, hat_mu, src, dst, kind, length, mass, boundary):
        arr.setflags(write=False)
    return Filling(space, params, node_z, node_level, n_vert, ball_nu, hat_mu, src, dst, kind,
                   length, mass, boundary, index)


def _edge_masses(space, hat_mu, src, dst, kind, beta, L):
    mass = hat_mu[src] + hat_mu[dst]
    tails = kind == TAIL
    zs = dst[tails] - (len(hat_mu) - space.n)
    mass[tails] = np.array([tail_mass(space.mass[z], beta, L) for z in zs])
    return mass


def make_filling(space: PointCloudSpace, beta: float, L: int | None = None,
                 alpha: float = ALPHA, tau: float = TAU) -> Filling:
    """Nets plus filling in one call; depth defaults to i*."""
    if L is None:
        L = min_level(space, alpha)
    nets = build_nets(space, alpha, L)
    return build_filling(space, nets, FillingParams(beta, L, alpha, tau))


def d_eps_from_set(filling: Filling, sources) -> np.ndarray:
    """Multi-source shortest-path distances along uniformized edge lengths."""
    src = np.asarray(sources)
    if src.dtype == bool:
        src = np.flatnonzero(src)
    if src.size == 0:
        raise ValueError("sources must be nonempty")
    return dijkstra(filling.graph, directed=False, indices=src, min_only=True)


def ray_length(filling: Filling, z: int, i: int) -> float:
    """Length of the vertical chain (z,i) -> (z,L) -> b_z."""
    alpha = filling.params.alpha
    return float(vertical_length(np.arange(i, filling.L), alpha).sum()
                 + ray_distance(filling.L, alpha))


# ---------------------------------------------------------------- reweighting


def with_beta(filling: Filling, beta: float) -> Filling:
    """Same graph, masses recomputed for a new beta."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    p = filling.params
    params = FillingParams(beta, p.L, p.alpha, p.tau)
    hat_mu = _hat_mu(filling.ball_nu, filling.node_level, filling.n_vertices, beta)
    mass = _edge_masses(filling.space, hat_mu, filling.src, filling.dst, filling.kind, beta, p.L)
    hat_mu.setflags(write=False)
    mass.setflags(write=False)
    return Filling(filling.space, params, filling.node_z, filling.node_level, filling.n_vertices,
                   filling.ball_nu, hat_mu, filling.src, filling.dst, filling.kind, filling.length, mass,
                   filling.boundary, filling.index)


def edge_midpoint_distance(filling: Filling, node_dist: np.ndarray) -> np.ndarray:
    """Distance from each edge midpoint to a set, given node distances to it."""
    half = 0.5 * filling.length
    return np.minimum(node_dist[filling.src], node_dist[filling.dst]) + half


def reweight(filling: Filling, sigma: float):
    """Filling with beta' = beta + eps*sigma and the per-edge comparison ratios.

    The ratio for edge e is m_{beta'}(e) / (d_eps(mid e, Z)^sigma m_beta(e)).
    """
    beta2 = filling.beta + filling.params.eps * sigma
    if not beta2 > 0:
        raise ValueError(f"beta + eps*sigma = {beta2} must be positive")
    new = with_beta(filling, beta2)
    mid = edge_midpoint_distance(filling, filling.boundary_distances)
    ratio = new.mass / (mid**sigma * filling.mass)
    return new, ratio


# ---------------------------------------------------------------- diagnostics


@dataclass
class WhitneyFillingReport:
    overlap: int
    covered: bool
    per_node: np.ndarray


def verify_whitney_filling(filling: Filling) -> WhitneyFillingReport:
    """Overlap of the balls B((z,i), alpha^-i) at vertices, and the edge cover check."""
    nv = filling.n_vertices
    alpha = filling.params.alpha
    dist = filling.all_distances()[:nv, :nv]
    rad = alpha ** (-filling.node_level[:nv].astype(float))
    inside = dist < rad[:, None]  # inside[v, x]: x in ball of v
    per_node = inside.sum(axis=0)
    inner = filling.kind != TAIL
    r_src = rad[filling.src[inner]]
    r_dst = rad[filling.dst[inner]]
    covered = bool(np.all(filling.length[inner] < r_src + r_dst))
    if not covered or per_node.min() < 1:
        raise FillingError("vertex balls do not cover the filling")
    return WhitneyFillingReport(int(per_node.max()), covered, per_node)


def ball_measure(filling: Filling, node_dist: np.ndarray, r: float) -> float:
    """mu_beta of the open ball {x : d(x, c) < r}, given node distances to the center c.

    A point at arclength s from u on edge [u, v] is at distance
    min(d_u + s, d_v + l - s), so the inside part has length
    min(l, (r - d_u)_+ + (r - d_v)_+).
    """
    du = node_dist[filling.src]
    dv = node_dist[filling.dst]
    inside = np.minimum(filling.length, np.maximum(r - du, 0) + np.maximum(r - dv, 0))
    return float(np.dot(filling.mass, inside / filling.length))


@dataclass
class CodimRelation:
    kmin: float
    kmax: float
    radii: np.ndarray
    table: np.ndarray  # table[z, k] = K(z, r_k)

    @property
    def spread(self) -> float:
        return self.kmax / self.kmin


def boundary_resolution(filling: Filling) -> float:
    """Largest d_eps from a boundary node to its nearest other boundary node.

    Balls around b_z below this radius can hold a single atom of Z only.
    """
    if filling.space.n < 2:
        return math.inf
    d = dijkstra(filling.graph, directed=False, indices=filling.boundary)[:, filling.boundary]
    np.fill_diagonal(d, np.inf)
    return float(d.min(axis=1).max())


def codimension_relation_check(filling: Filling, space: PointCloudSpace | None = None,
                               n_radii: int = 12, r_min: float | None = None) -> CodimRelation:
    """K(z,r) = mu_beta(B(z,r)) / (r^{beta/eps} nu(B(z,r) ∩ Z)) over r in (tail, 2 diam].

    ``r_min`` raises the lower end of the window (for instance to
    :func:`boundary_resolution`).
    """
    space = space or filling.space
    alpha = filling.params.alpha
    lo = float(ray_distance(filling.L, alpha)) * (1 + 1e-9)
    # one point: the whole ray, whose d_eps diameter is ray_distance(0)
    hi = 2.0 * space.diam if space.diam > 0 else 2.0 * float(ray_distance(0, alpha))
    if r_min is not None:
        lo = max(lo, float(r_min))
    if not lo < hi:
        raise ValueError(f"empty radius window ({lo}, {hi}]")
    radii = np.geomspace(lo, hi, n_radii)
    expo = filling.beta / filling.params.eps
    dist = dijkstra(filling.graph, directed=False, indices=filling.boundary)
    table = np.empty((space.n, radii.size))
    for z in range(space.n):
        dz = dist[z]
        in_z = dz[filling.boundary][None, :] < radii[:, None]
        nu = in_z @ space.mass
        mu = np.array([ball_measure(filling, dz, r) for r in radii])
        table[z] = mu / (radii**expo * nu)
    return CodimRelation(float(table.min()), float(table.max()), radii, table)


# ---------------------------------------------------------------- export


def filling_to_dict(filling: Filling) -> dict:
    verts = [
        {"z": int(filling.node_z[v]), "i": int(filling.node_level[v]), "hat_mu": float(filling.hat_mu[v])}
        for v in range(filling.n_vertices)
    ]
    edges = [
        {"u": int(u), "v": int(v), "kind": KIND_NAMES[k], "len": float(ell), "mass": float(m)}
        for u, v, k, ell, m in zip(filling.src, filling.dst, filling.kind, filling.length, filling.mass)
    ]
    bnd = [{"z": z, "node": int(b)} for z, b in enumerate(filling.boundary)]
    return {
        "params": {"alpha": filling.params.alpha, "tau": filling.params.tau,
                   "beta": filling.beta, "L": filling.L, "eps": filling.params.eps},
        "vertices": verts,
        "edges": edges,
        "boundary": bnd,
    }
