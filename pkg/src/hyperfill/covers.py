"""Whitney covers, tent partitions of unity, the boundary-induced cover and chains."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .filling import Filling, d_eps_from_set
from .space import PointCloudSpace, SubsetMask, build_nets, distance_to_set


class CoverError(AssertionError):
    """A cover failed one of its defining properties."""


@dataclass(frozen=True, eq=False)
class Domain:
    """A finite sample of a domain Omega with the distance to its complement.

    ``dist`` and ``mass`` cover all sample points; ``d_omega`` is zero exactly
    on the complement. ``pairs`` lists adjacent sample pairs (graph edges or
    nearest neighbours) used by slope checks. ``filling`` is set when the
    samples are vertices of a filling.
    """

    dist: np.ndarray
    mass: np.ndarray
    d_omega: np.ndarray
    pairs: np.ndarray
    filling: Filling | None = None
    nodes: np.ndarray | None = None  # filling node index of each sample point

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def omega(self) -> np.ndarray:
        return self.d_omega > 0


def nearest_neighbour_pairs(dist: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Unordered pairs (x, y) with y among the nearest neighbours of x (ties kept)."""
    n = dist.shape[0]
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    off = dist + np.diag(np.full(n, np.inf))
    nn = off.min(axis=1)
    a, b = np.nonzero(off <= nn[:, None] * (1 + rtol))
    pairs = np.unique(np.sort(np.stack([a, b], axis=1), axis=1), axis=0)
    return pairs.astype(np.int64)


def domain_from_space(space: PointCloudSpace, E: SubsetMask) -> Domain:
    d_om = distance_to_set(space, E)
    return Domain(space.dist, space.mass, d_om, nearest_neighbour_pairs(space.dist))


def domain_from_filling(filling: Filling, E) -> Domain:
    """Vertices of a filling as samples of X minus E; distances are d_eps.

    Boundary nodes are left out: they sample Z, where distance weights to Z
    vanish. The complement used for d_Omega is the set of E boundary nodes.
    """
    mask = E.mask if isinstance(E, SubsetMask) else np.asarray(E, dtype=bool)
    e_nodes = filling.boundary_mask(mask)
    full = filling.all_distances()
    nv = filling.n_vertices
    d_om = d_eps_from_set(filling, e_nodes)[:nv]
    inner = (filling.src < nv) & (filling.dst < nv)
    pairs = np.stack([filling.src[inner], filling.dst[inner]], axis=1)
    return Domain(full[:nv, :nv], filling.node_mass[:nv], d_om, pairs, filling, np.arange(nv))


# ---------------------------------------------------------------- Whitney cover


@dataclass(frozen=True, eq=False)
class WhitneyCover:
    domain: Domain
    centers: np.ndarray   # sample indices, one per point of Omega
    radii: np.ndarray     # d_Omega(center) / 8
    overlap: int          # max multiplicity of the 6B_i over samples of Omega


def whitney_cover(domain: Domain) -> WhitneyCover:
    if not np.isfinite(domain.d_omega).all():
        raise CoverError("Omega has empty complement; d_Omega is undefined")
    centers = np.flatnonzero(domain.omega)
    if centers.size == 0:
        raise CoverError("Omega is empty")
    radii = domain.d_omega[centers] / 8.0
    six = domain.dist[centers][:, centers] < 6.0 * radii[:, None]  # six[i, x]
    overlap = int(six.sum(axis=0).max())
    inside = domain.dist[centers, centers] < radii
    if not inside.all():
        raise CoverError("a sample point is not covered by its own ball")
    return WhitneyCover(domain, centers, radii, overlap)


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    cover: WhitneyCover
    phi: np.ndarray        # phi[x, i] for x, i running over the cover centers
    c0: float              # min of phi_i on B_i
    lipschitz: float       # max r_i |phi_i(x) - phi_i(y)| / d(x, y) over adjacent pairs


def partition_of_unity(cover: WhitneyCover) -> PartitionOfUnity:
    """Normalized tents psi_i = (1 - d(., x_i) / (2 r_i))_+ on the samples of Omega."""
    c = cover.centers
    d = cover.domain.dist[np.ix_(c, c)]  # d[x, i]
    psi = np.maximum(0.0, 1.0 - d / (2.0 * cover.radii[None, :]))
    phi = psi / psi.sum(axis=1, keepdims=True)
    in_ball = d < cover.radii[None, :]
    c0 = float(phi[in_ball].min())
    lip = 0.0
    pos = np.full(cover.domain.n, -1)
    pos[c] = np.arange(c.size)
    pairs = cover.domain.pairs
    if pairs.size:
        a, b = pos[pairs[:, 0]], pos[pairs[:, 1]]
        keep = (a >= 0) & (b >= 0)
        a, b = a[keep], b[keep]
        if a.size:
            dab = cover.domain.dist[c[a], c[b]]
            jump = np.abs(phi[a] - phi[b]) * cover.radii[None, :] / dab[:, None]
            lip = float(jump.max())
    return PartitionOfUnity(cover, phi, c0, lip)


def check_partition(pu: PartitionOfUnity, tol: float = 1e-12) -> None:
    phi = pu.phi
    c = pu.cover.centers
    d = pu.cover.domain.dist[np.ix_(c, c)]
    if phi.min() < 0 or phi.max() > 1 + tol:
        raise CoverError("partition values leave [0, 1]")
    if np.any(phi[d >= 2 * pu.cover.radii[None, :]] != 0):
        raise CoverError("phi_i is nonzero outside 2B_i")
    if np.abs(phi.sum(axis=1) - 1).max() > tol:
        raise CoverError("partition does not sum to 1")
    if not pu.c0 > 0:
        raise CoverError("phi_i vanishes somewhere on B_i")


# ---------------------------------------------------------------- induced cover


@dataclass(frozen=True, eq=False)
class InducedBoundaryCover:
    index: list            # I_E as (level i, point id z_{i,j})
    shells: dict           # point of Omega -> its shell level
    sets: list             # member masks of U_{i,j}
    multiplicity: int      # max multiplicity of the 3U_{i,j}


def shell_level(d, alpha):
    """Level i with 8 alpha^-i <= d < 8 alpha^-(i-1) (i = 0 covers [8, 8 alpha))."""
    return max(0, math.ceil(math.log(8.0 / d) / math.log(alpha) - 1e-12))


def induced_cover(filling: Filling, space: PointCloudSpace | None, E: SubsetMask) -> InducedBoundaryCover:
    space = space or filling.space
    alpha = filling.params.alpha
    if not E.mask.any() or E.mask.all():
        raise CoverError("need nonempty E and nonempty Z minus E")
    dE = distance_to_set(space, E)
    omega = np.flatnonzero(~E.mask)
    shells = {}
    for z in omega:
        i = shell_level(dE[z], alpha)
        # guard the float rounding of the logarithm
        while 8 * alpha ** (-i) > dE[z]:
            i += 1
        while i > 0 and 8 * alpha ** (-(i - 1)) <= dE[z]:
            i -= 1
        shells[int(z)] = i
    top = max(max(shells.values()), filling.L)
    nets = build_nets(space, alpha, top)
    index, sets = [], []
    by_level = {}
    for z, i in shells.items():
        by_level.setdefault(i, []).append(z)
    for i in sorted(by_level):
        shell = np.zeros(space.n, dtype=bool)
        shell[by_level[i]] = True
        for zc in nets.levels[i]:
            U = space.dist[zc] < alpha ** (-i)
            if (U & shell).any():
                index.append((i, int(zc)))
                sets.append(U)
    cover = np.zeros(space.n, dtype=bool)
    for i, (lev, zc) in enumerate(index):
        U = sets[i]
        cover |= U
        dU = dE[U].min()
        lo, hi = 6 * alpha ** (-lev), 8 * alpha * alpha ** (-lev)
        if not (lo * (1 - 1e-12) <= dU <= hi * (1 + 1e-12)):
            raise CoverError(f"d(U_({lev},{zc}), E) = {dU} outside [{lo}, {hi}]")
    if not cover[omega].all():
        raise CoverError("induced sets do not cover Z minus E")
    three = np.array([space.dist[zc] < 3 * alpha ** (-lev) for lev, zc in index])
    mult = int(three.sum(axis=0).max())
    return InducedBoundaryCover(index, shells, sets, mult)


# ---------------------------------------------------------------- chains


@dataclass(frozen=True, eq=False)
class ChainOfBalls:
    nodes: list        # filling node indices v_i, ..., v_L, then b_z
    levels: list
    radii: list        # alpha^-k for the vertex balls


def chain_to_boundary(filling: Filling, start, z: int) -> ChainOfBalls:
    """Vertex chain from (z_{i,j}, i) down to b_z by nearest net points.

    ``start`` is (level i, center point id). Each link picks the point of
    A_k closest to z (lowest id on ties), which lies within alpha^-k of z by
    maximality. Nesting B_{k+1} ⊂ 2B_k and B_k ⊂ 5B_{i,j} are asserted via
    d(c, c') + r <= r'.
    """
    i, zc = int(start[0]), int(start[1])
    alpha = filling.params.alpha
    d = filling.space.dist
    if not d[zc, z] < alpha ** (-i):
        raise CoverError("z is not in U_{i,j}")
    if i > filling.L:
        raise CoverError("start level exceeds the filling depth")
    nodes, levels, radii = [filling.node(zc, i)], [i], [alpha ** (-i)]
    net_at = {}
    for k in range(i + 1, filling.L + 1):
        if k not in net_at:
            net_at[k] = np.array(sorted(zz for (zz, lev) in filling.index if lev == k))
        members = net_at[k]
        dz = d[z, members]
        pick = int(members[np.argmin(dz)])  # argmin returns the first, i.e. lowest id
        if not d[z, pick] < alpha ** (-k):
            raise CoverError(f"no level-{k} net point within alpha^-{k} of z")
        nodes.append(filling.node(pick, k))
        levels.append(k)
        radii.append(alpha ** (-k))
    dd = dijkstra(filling.graph, directed=False, indices=nodes)
    tol = 1e-12
    for a in range(len(nodes) - 1):
        if dd[a + 1, nodes[a]] + radii[a + 1] > 2 * radii[a] * (1 + tol):
            raise CoverError(f"B_{levels[a + 1]} is not inside 2B_{levels[a]}")
    for a in range(len(nodes)):
        if dd[a, nodes[0]] + radii[a] > 5 * radii[0] * (1 + tol):
            raise CoverError(f"B_{levels[a]} is not inside 5B_(i,j)")
    nodes.append(int(filling.boundary[z]))
    return ChainOfBalls(nodes, levels, radii)
