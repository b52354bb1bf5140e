"""Standard test instances: small spaces paired with an obstacle set E."""
from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from .space import PointCloudSpace, SubsetMask, from_coords


class Instance(NamedTuple):
    name: str
    space: PointCloudSpace
    E: SubsetMask


def fix_a() -> Instance:
    """Two unit atoms at 0 and 0.5 with E = {0}."""
    space = from_coords([0.0, 0.5], [1.0, 1.0])
    return Instance("fix_a", space, SubsetMask.from_ids(2, [0]))


def fix_b() -> Instance:
    """Eight equal atoms with spacing 1/14 on [0, 1/2], E = both endpoints."""
    space = from_coords(np.arange(8) / 14.0)
    return Instance("fix_b", space, SubsetMask.from_ids(8, [0, 7]))


def grid1d(n: int = 32) -> Instance:
    """n equal atoms evenly spread on [0, 1/2]; E = the two endpoints."""
    space = from_coords(np.linspace(0.0, 0.5, n))
    return Instance(f"grid1d_{n}", space, SubsetMask.from_ids(n, [0, n - 1]))


def grid2d(m: int = 8) -> Instance:
    """m x m square grid with equal atoms; E = the boundary of the square."""
    ij = np.array(list(itertools.product(range(m), range(m))), dtype=float)
    space = from_coords(ij / (m - 1))
    edge = (ij == 0).any(axis=1) | (ij == m - 1).any(axis=1)
    return Instance(f"grid2d_{m}", space, SubsetMask(edge))


def cantor_points(level: int) -> np.ndarray:
    """Integer positions (out of 3**level) of the endpoints of the level-k Cantor intervals."""
    starts = [0]
    for k in range(level):
        step = 3 ** (level - k - 1)
        starts = [s + t for s in starts for t in (0, 2 * step)]
    return np.unique(np.array(starts + [s + 1 for s in starts]))


def cantor(level: int = 4) -> Instance:
    """Uniform grid with 3**level + 1 atoms; E = grid points on the level-k Cantor set."""
    m = 3**level
    space = from_coords(np.arange(m + 1) / m)
    return Instance(f"cantor_{level}", space, SubsetMask.from_ids(m + 1, cantor_points(level)))


def punctured_1d(n: int = 32, exterior: float = 1.0) -> Instance:
    """Grid of spacing 1/n on [-1-exterior, 1+exterior]; E = {0} and |x| >= 1."""
    k = np.arange(-int(round((1 + exterior) * n)), int(round((1 + exterior) * n)) + 1)
    x = k / n
    space = from_coords(x, base_point=int(np.flatnonzero(k == 0)[0]))
    E = (k == 0) | (np.abs(k) >= n)
    return Instance(f"punctured1d_{n}", space, SubsetMask(E))


def punctured_2d(n: int = 8, exterior: float = 0.5) -> Instance:
    """Square grid of spacing 1/n; E = the origin and everything with |x| >= 1."""
    m = int(round((1 + exterior) * n))
    ij = np.array(list(itertools.product(range(-m, m + 1), repeat=2)), dtype=float)
    x = ij / n
    r = np.hypot(x[:, 0], x[:, 1])
    space = from_coords(x, base_point=int(np.flatnonzero(r == 0)[0]))
    return Instance(f"punctured2d_{n}", space, SubsetMask((r == 0) | (r >= 1)))


FIXTURES = {
    "fix_a": fix_a,
    "fix_b": fix_b,
    "grid1d": grid1d,
    "grid2d": grid2d,
    "cantor": cantor,
    "punctured_1d": punctured_1d,
    "punctured_2d": punctured_2d,
}


def make_instance(name: str, **params) -> Instance:
    try:
        factory = FIXTURES[name]
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    return factory(**params)
