"""Finite metric measure spaces and their metric-geometric diagnostics."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial.distance import cdist

# relative slack for floating-point comparisons of distances
_RTOL = 1e-12


class SpaceError(ValueError):
    """Invalid space description or failed metric check."""


@dataclass(frozen=True, eq=False)
class PointCloudSpace:
    """A finite metric space with positive atom masses.

    Points are the integers ``0..n-1``; ``coords`` is kept when the space was
    built from coordinates. ``scale`` is the factor applied to the raw
    distances by :func:`load_space` (1.0 when no rescaling happened).
    """

    dist: np.ndarray
    mass: np.ndarray
    base_point: int = 0
    coords: np.ndarray | None = None
    scale: float = 1.0
    diam: float = field(init=False)

    def __post_init__(self):
        d = np.ascontiguousarray(self.dist, dtype=np.float64)
        m = np.ascontiguousarray(self.mass, dtype=np.float64)
        d.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "diam", float(d.max()) if d.size else 0.0)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def ball(self, x: int, r: float) -> np.ndarray:
        """Membership mask of the open ball B(x, r)."""
        return self.dist[x] < r

    def ball_mass(self, x: int, r: float) -> float:
        return float(self.mass[self.dist[x] < r].sum())

    def subspace(self, keep: np.ndarray) -> "PointCloudSpace":
        """Restriction to the points flagged in ``keep`` (no renormalization)."""
        idx = np.flatnonzero(keep)
        if idx.size == 0:
            raise SpaceError("empty subspace")
        base = int(np.searchsorted(idx, self.base_point)) if keep[self.base_point] else 0
        coords = None if self.coords is None else self.coords[idx]
        return PointCloudSpace(self.dist[np.ix_(idx, idx)], self.mass[idx], base, coords, self.scale)


@dataclass(frozen=True, eq=False)
class SubsetMask:
    """Membership flags for a subset of the points of a space."""

    mask: np.ndarray
    role: str = "E"

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_ids(cls, n: int, ids: Sequence[int], role: str = "E") -> "SubsetMask":
        m = np.zeros(n, dtype=bool)
        m[list(ids)] = True
        return cls(m, role)

    @property
    def ids(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def complement(self, role: str = "Omega") -> "SubsetMask":
        return SubsetMask(~self.mask, role)

    def __len__(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class NetHierarchy:
    """Nested nets A_0 ⊆ ... ⊆ A_L; ``levels[i]`` holds sorted point ids."""

    levels: tuple
    alpha: float
    i_star: int

    @property
    def L(self) -> int:
        return len(self.levels) - 1


# ---------------------------------------------------------------- loading


def validate_metric(dist: np.ndarray, tol: float = _RTOL) -> None:
    """Raise :class:`SpaceError` naming the first offending entry or triple."""
    d = np.asarray(dist, dtype=np.float64)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise SpaceError(f"distance matrix must be square, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise SpaceError("distance matrix has non-finite entries")
    scale = max(float(np.abs(d).max()), 1.0) if n else 1.0
    bad = np.argwhere(np.abs(d - d.T) > tol * scale)
    if bad.size:
        a, b = bad[0]
        raise SpaceError(f"asymmetric distance at ({a},{b}): {d[a, b]} != {d[b, a]}")
    if np.any(np.diag(d) != 0):
        a = int(np.flatnonzero(np.diag(d) != 0)[0])
        raise SpaceError(f"nonzero self-distance at ({a},{a})")
    off = d + np.eye(n)
    if np.any(off <= 0):
        a, b = np.argwhere(off <= 0)[0]
        raise SpaceError(f"nonpositive distance between distinct points ({a},{b})")
    for b in range(n):
        # d(a,c) <= d(a,b) + d(b,c) for all a, c
        viol = d - (d[:, b][:, None] + d[b][None, :]) > tol * scale
        if viol.any():
            a, c = np.argwhere(viol)[0]
            raise SpaceError(
                f"triangle inequality violated by ({a},{b},{c}): "
                f"d({a},{c})={d[a, c]} > d({a},{b})+d({b},{c})={d[a, b] + d[b, c]}"
            )


def make_space(dist, mass, base_point: int = 0, coords=None, normalize: bool = True) -> PointCloudSpace:
    """Validate and (if the diameter is at least 1) rescale by 1/(2 diam)."""
    d = np.array(dist, dtype=np.float64)
    m = np.array(mass, dtype=np.float64)
    if m.ndim != 1 or m.shape[0] != d.shape[0]:
        raise SpaceError("masses must be one per point")
    if np.any(~(m > 0)):
        k = int(np.flatnonzero(~(m > 0))[0])
        raise SpaceError(f"nonpositive mass at point {k}: {m[k]}")
    if not 0 <= base_point < d.shape[0]:
        raise SpaceError(f"base point {base_point} is not a point of the space")
    validate_metric(d)
    scale = 1.0
    diam = float(d.max())
    if normalize and diam >= 1.0:
        scale = 1.0 / (2.0 * diam)
        d = d * scale
    c = None
    if coords is not None:
        c = np.array(coords, dtype=np.float64) * scale
    return PointCloudSpace(d, m, int(base_point), c, scale)


def from_coords(points, mass=None, base_point: int = 0, normalize: bool = True) -> PointCloudSpace:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if mass is None:
        mass = np.full(pts.shape[0], 1.0 / pts.shape[0])
    return make_space(cdist(pts, pts), mass, base_point, pts, normalize)


def load_space(raw) -> PointCloudSpace:
    """Build a space from a dict, a JSON file or a CSV file.

    JSON/dict fields: ``points`` or ``distance_matrix``, ``masses``,
    ``base_point`` and ``metric`` ("euclidean" or "matrix"). CSV files have a
    header row; columns named ``mass`` and ``base`` are special, the rest are
    coordinates.
    """
    if isinstance(raw, (str, Path)):
        path = Path(raw)
        if path.suffix.lower() == ".csv":
            return _load_csv(path)
        raw = json.loads(path.read_text())
    if not isinstance(raw, dict):
        raise SpaceError("space description must be a mapping")
    metric = raw.get("metric", "matrix" if "distance_matrix" in raw else "euclidean")
    base = int(raw.get("base_point", 0))
    if metric == "euclidean":
        if "points" not in raw:
            raise SpaceError("euclidean metric needs 'points'")
        pts = np.asarray(raw["points"], dtype=np.float64)
        masses = raw.get("masses")
        return from_coords(pts, masses, base)
    if metric == "matrix":
        if "distance_matrix" not in raw:
            raise SpaceError("matrix metric needs 'distance_matrix'")
        d = np.asarray(raw["distance_matrix"], dtype=np.float64)
        masses = raw.get("masses")
        if masses is None:
            masses = np.full(d.shape[0], 1.0 / d.shape[0])
        return make_space(d, masses, base)
    raise SpaceError(f"unknown metric {metric!r}")


def _load_csv(path: Path) -> PointCloudSpace:
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SpaceError(f"{path}: no data rows")
    cols = [c for c in rows[0] if c not in ("mass", "base")]
    pts = np.array([[float(r[c]) for c in cols] for r in rows])
    mass = np.array([float(r["mass"]) for r in rows]) if "mass" in rows[0] else None
    base = 0
    if "base" in rows[0]:
        flagged = [k for k, r in enumerate(rows) if r["base"].strip() in ("1", "true", "True")]
        base = flagged[0] if flagged else 0
    return from_coords(pts, mass, base)


def space_to_dict(space: PointCloudSpace) -> dict:
    return {
        "distance_matrix": space.dist.tolist(),
        "masses": space.mass.tolist(),
        "base_point": space.base_point,
        "metric": "matrix",
    }


# ---------------------------------------------------------------- nets


def min_separation(space: PointCloudSpace) -> float:
    if space.n < 2:
        return math.inf
    return float((space.dist + np.diag(np.full(space.n, np.inf))).min())


def min_level(space: PointCloudSpace, alpha: float) -> int:
    """Smallest i with alpha**-i <= minimal separation (all points are in A_i)."""
    sep = min_separation(space)
    if not math.isfinite(sep):
        return 0
    i = max(0, math.ceil(-math.log(sep) / math.log(alpha)))
    while alpha ** (-i) > sep:
        i += 1
    while i > 0 and alpha ** (-(i - 1)) <= sep:
        i -= 1
    return i


def build_nets(space: PointCloudSpace, alpha: float, L: int) -> NetHierarchy:
    """Greedy nested maximal alpha^-i separated nets, scanning ids in order."""
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    i_star = min_level(space, alpha)
    if L < i_star:
        raise SpaceError(f"depth L={L} is below i*={i_star}; nets would miss points", )
    d = space.dist
    member = np.zeros(space.n, dtype=bool)
    member[space.base_point] = True
    gap = d[space.base_point].copy()  # distance from each point to the current net
    levels = [np.flatnonzero(member)]
    for i in range(1, L + 1):
        r = alpha ** (-i)
        for z in range(space.n):
            if not member[z] and gap[z] >= r:
                member[z] = True
                np.minimum(gap, d[z], out=gap)
        levels.append(np.flatnonzero(member))
    for lv in levels:
        lv.setflags(write=False)
    return NetHierarchy(tuple(levels), float(alpha), i_star)


def check_nets(space: PointCloudSpace, nets: NetHierarchy) -> None:
    """Assert nesting, separation and maximality of every level."""
    d = space.dist
    prev = None
    for i, lv in enumerate(nets.levels):
        r = nets.alpha ** (-i)
        if i == 0 and list(lv) != [space.base_point]:
            raise AssertionError("A_0 must be the base point")
        if prev is not None and not np.isin(prev, lv).all():
            raise AssertionError(f"A_{i - 1} is not contained in A_{i}")
        sub = d[np.ix_(lv, lv)] + np.diag(np.full(len(lv), np.inf))
        if sub.size and sub.min() < r:
            raise AssertionError(f"A_{i} is not {r}-separated")
        outside = np.setdiff1d(np.arange(space.n), lv)
        if outside.size and (d[np.ix_(outside, lv)].min(axis=1) >= r).any():
            raise AssertionError(f"A_{i} is not maximal")
        prev = lv


# ---------------------------------------------------------------- diagnostics


def _sorted_rows(space: PointCloudSpace):
    order = np.argsort(space.dist, axis=1, kind="stable")
    srt = np.take_along_axis(space.dist, order, axis=1)
    cum = np.concatenate([np.zeros((space.n, 1)), np.cumsum(space.mass[order], axis=1)], axis=1)
    return srt, cum


def doubling_estimate(space: PointCloudSpace) -> float:
    """Max of nu(B(x,2r))/nu(B(x,r)) over centers and critical radii (open balls).

    The radii scanned are the distances d, their halves, and the next float
    above each, which includes every radius where either ball changes.
    """
    if space.n < 2:
        return 1.0
    srt, cum = _sorted_rows(space)
    best = 1.0
    for x in range(space.n):
        dd = np.unique(srt[x, 1:])
        radii = np.concatenate([dd, dd / 2])
        radii = np.concatenate([radii, np.nextafter(radii, np.inf)])
        inner = cum[x, np.searchsorted(srt[x], radii, side="left")]
        outer = cum[x, np.searchsorted(srt[x], 2 * radii, side="left")]
        best = max(best, float((outer / inner).max()))
    return best


def distance_to_set(space: PointCloudSpace, E: SubsetMask) -> np.ndarray:
    if not E.mask.any():
        raise SpaceError("distance to an empty set is undefined")
    return space.dist[:, E.mask].min(axis=1)


def check_porosity(space: PointCloudSpace, E: SubsetMask, single_point: bool = False) -> float:
    """Largest c in [0, 1] such that every resolved ball misses a c-proportional ball of E.

    For a center x and radius r the best admissible c is
    max_{y in B(x,r)} d(y,E)/r, so the answer is the minimum of that over all
    centers and radii. Radii are the resolved scales d(x,y)+ulp for y != x
    below diam(E); balls smaller than the nearest neighbour hold a single atom
    and carry no porosity information. With ``single_point`` the upper bound
    diam(E) is replaced by diam(Z) (the convention for one-point sets).
    """
    if not E.mask.any():
        raise SpaceError("porosity of an empty set")
    dE = distance_to_set(space, E)
    ids = E.ids
    diam_e = float(space.dist[np.ix_(ids, ids)].max())
    if diam_e == 0.0:
        if not single_point:
            raise SpaceError("diam(E) = 0: use single_point=True (no upper bound on the radius)")
        diam_e = math.inf if space.n < 2 else space.diam + 1e-300
    if not (dE > 0).any():
        return 0.0
    order = np.argsort(space.dist, axis=1, kind="stable")
    c = 1.0
    for x in range(space.n):
        row = space.dist[x, order[x]]
        best = np.maximum.accumulate(dE[order[x]])
        # last index of every block of equal distances
        last = np.flatnonzero(np.append(row[1:] != row[:-1], True))
        r = np.nextafter(row[last], np.inf)
        ok = (row[last] > 0) & (r < diam_e)
        if ok.any():
            c = min(c, float((best[last][ok] / r[ok]).min()))
    return max(c, 0.0)


class CodimEstimate(NamedTuple):
    lower: float
    upper: float
    res_lower: float
    res_upper: float
    n_pairs: int


def _slope_fit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def estimate_codimension(space: PointCloudSpace, E: SubsetMask, n_scales: int = 10) -> CodimEstimate:
    """Slope fits of the relative mass of r-neighbourhoods of E inside R-balls.

    Scales form a geometric grid from twice the minimal separation up to
    0.9*diam(Z); pairs r <= R are used with centers x in E. The upper
    envelope over centers decays slowest and gives the lower codimension,
    the lower envelope gives the upper codimension.
    """
    if not E.mask.any():
        raise SpaceError("codimension of an empty set")
    if space.n < 2:
        raise SpaceError("fewer than 3 usable (r, R) pairs")
    h = min_separation(space)
    lo, hi = 2 * h, 0.9 * space.diam
    if hi <= lo:
        raise SpaceError("fewer than 3 usable (r, R) pairs")
    scales = np.geomspace(lo, hi, n_scales)
    dE = distance_to_set(space, E)
    centers = E.ids
    xs, up, dn = [], [], []
    for b, R in enumerate(scales):
        inR = space.dist[centers] < R  # (centers, n)
        denom = inR @ space.mass
        for r in scales[: b + 1]:
            num = (inR & (dE < r)[None, :]) @ space.mass
            q = num / denom
            xs.append(math.log(r / R))
            up.append(math.log(q.max()))
            dn.append(math.log(q.min()))
    if len(xs) < 3:
        raise SpaceError("fewer than 3 usable (r, R) pairs")
    xs = np.array(xs)
    s_up, res_up = _slope_fit(xs, np.array(up))
    s_dn, res_dn = _slope_fit(xs, np.array(dn))
    return CodimEstimate(s_up + 0.0, s_dn + 0.0, res_up, res_dn, len(xs))


# ---------------------------------------------------------------- exhaustion

CORKSCREW_C = 1.0 / 48.0


class ExhaustionError(AssertionError):
    """The exhaustion set violated a containment or the corkscrew bound."""


def exhaustion_subset(
    space: PointCloudSpace,
    z0: int,
    R: float,
    check: bool = True,
    max_centers: int = 200,
    seed: int = 0,
) -> SubsetMask:
    """Grow B(z0,R) by closed 4^{-i-1}R neighbourhoods until nothing changes.

    With ``check`` the containments B(z0,R) ⊆ Z_R ⊆ B(z0,2R) and the
    corkscrew condition with c = 1/48 are asserted; on spaces with more than
    ``max_centers`` points the corkscrew check runs on a seeded sample of
    centers.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    d = space.dist
    cur = d[z0] < R
    i = 0
    while True:
        rad = 4.0 ** (-i - 1) * R
        nxt = d[:, cur].min(axis=1) <= rad
        i += 1
        if np.array_equal(nxt, cur):
            break
        cur = nxt
    out = SubsetMask(cur, "Z_R")
    if check:
        _check_exhaustion(space, z0, R, cur, max_centers, seed)
    return out


def _check_exhaustion(space, z0, R, inside, max_centers, seed):
    d = space.dist
    if not inside[d[z0] < R].all():
        raise ExhaustionError("B(z0,R) is not contained in Z_R")
    if not (d[z0, inside] < 2 * R).all():
        raise ExhaustionError("Z_R is not contained in B(z0,2R)")
    members = np.flatnonzero(inside)
    centers = members
    if members.size > max_centers:
        centers = np.random.default_rng(seed).choice(members, max_centers, replace=False)
    h = min_separation(space)
    if not math.isfinite(h):
        return
    c = CORKSCREW_C
    radii = np.geomspace(h / 4, 4 * R, 40)[:-1]
    for z in centers:
        # outside[k, w]: w is not in B(z, r_k) ∩ Z_R
        outside = ~((d[z][None, :] < radii[:, None]) & inside[None, :])
        # reach[k, y]: distance from y to the nearest such w
        reach = np.where(outside[:, None, :], d[None, members, :], np.inf).min(axis=2)
        near = d[z, members][None, :] < radii[:, None] / 3
        good = near & (c * radii[:, None] <= reach)
        if not good.any(axis=1).all():
            k = int(np.flatnonzero(~good.any(axis=1))[0])
            raise ExhaustionError(f"corkscrew fails at z={z}, r={radii[k]}")
