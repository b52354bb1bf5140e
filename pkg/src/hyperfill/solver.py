"""Minimization of energy / Hardy-LHS quotients and relative capacities.

All quotients have the form

    Q(u) = sum_k w_k |u_i - u_j|^p / sum_v a_v |u_v|^p,   u = 0 on a zero set.

Eliminating the zero set turns pairs with one fixed end into a diagonal
"killing" term b_v |u_v|^p, which every solver below works with.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.sparse.linalg import splu

from . import kernels
from .energy import (DiagonalForm, PairEnergy, besov_form, dirichlet_form, filling_hardy_form,
                     frac_hardy_form)
from .filling import Filling
from .space import PointCloudSpace, SubsetMask


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 20000
    tolerance: float = 1e-9
    restarts: int = 8
    seed: int = 0
    positivity: bool = True
    engine: str = "lbfgs"  # "lbfgs" (quasi-Newton projected steps) or "pg" (plain projected gradient)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.engine not in ("lbfgs", "pg"):
            raise ValueError(f"unknown engine {self.engine!r}")


@dataclass
class HardyReport:
    lam: float
    minimizer: np.ndarray
    iterations: int
    spread: float = 1.0
    converged: bool = True
    lambdas: list = field(default_factory=list)
    method: str = ""

    @property
    def best_constant(self) -> float:
        return math.inf if self.lam <= 0 else 1.0 / self.lam

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "best_constant": self.best_constant,
            "iterations": self.iterations,
            "spread": self.spread,
            "converged": self.converged,
            "method": self.method,
        }


# ---------------------------------------------------------------- reduction


@dataclass(frozen=True, eq=False)
class ReducedQuotient:
    """Quotient restricted to the free nodes."""

    free: np.ndarray   # indices of the free nodes in the full vector
    n_full: int
    i: np.ndarray      # pairs among free nodes (local indices)
    j: np.ndarray
    w: np.ndarray
    b: np.ndarray      # killing weights from pairs with a zero-set end
    a: np.ndarray      # lhs weights
    p: float

    @property
    def n(self) -> int:
        return self.free.size

    def numerator(self, x) -> float:
        return kernels.pair_energy(self.i, self.j, self.w, x, self.p) + float(
            np.dot(self.b, np.abs(x) ** self.p))

    def denominator(self, x) -> float:
        return float(np.dot(self.a, np.abs(x) ** self.p))

    def quotient(self, x) -> float:
        den = self.denominator(x)
        return math.inf if den <= 0 else self.numerator(x) / den

    def num_grad(self, x):
        e, g = kernels.pair_energy_grad(self.i, self.j, self.w, x, self.p)
        ax = np.abs(x)
        e += float(np.dot(self.b, ax**self.p))
        g = g + self.p * self.b * ax ** (self.p - 1) * np.sign(x)
        return e, g

    def den_grad(self, x):
        ax = np.abs(x)
        return float(np.dot(self.a, ax**self.p)), self.p * self.a * ax ** (self.p - 1) * np.sign(x)

    def expand(self, x) -> np.ndarray:
        u = np.zeros(self.n_full)
        u[self.free] = x
        return u

    def normalize(self, x) -> np.ndarray:
        return x / self.denominator(x) ** (1.0 / self.p)

    def quadratic_forms(self):
        """(A, d): the p = 2 analogue with the same weights, A sparse, d diagonal."""
        n = self.n
        off = sparse.coo_matrix((self.w, (self.i, self.j)), shape=(n, n))
        off = (off + off.T).tocsr()
        deg = np.asarray(off.sum(axis=1)).ravel() + self.b
        return (sparse.diags(deg) - off).tocsc(), self.a.copy()

    def dense_pairs(self) -> np.ndarray:
        S = np.zeros((self.n, self.n))
        np.add.at(S, (self.i, self.j), self.w)
        return S + S.T


def _zero_mask(zero_set, n) -> np.ndarray:
    if zero_set is None:
        return np.zeros(n, dtype=bool)
    if isinstance(zero_set, SubsetMask):
        return zero_set.mask.copy()
    z = np.asarray(zero_set)
    if z.dtype == bool:
        return z.copy()
    mask = np.zeros(n, dtype=bool)
    mask[z.astype(int)] = True
    return mask


def reduce_quotient(energy: PairEnergy, lhs: DiagonalForm, zero_set) -> ReducedQuotient:
    n = energy.n
    zero = _zero_mask(zero_set, n)
    free = np.flatnonzero(~zero)
    if free.size == 0:
        raise SolverError("no free variables: the zero set covers every node")
    local = np.full(n, -1, dtype=np.int64)
    local[free] = np.arange(free.size)
    fi, fj = ~zero[energy.i], ~zero[energy.j]
    both = fi & fj
    b = np.zeros(free.size)
    np.add.at(b, local[energy.i[fi & ~fj]], energy.w[fi & ~fj])
    np.add.at(b, local[energy.j[fj & ~fi]], energy.w[fj & ~fi])
    a = np.asarray(lhs.a, dtype=float)[free]
    if not (a > 0).any():
        raise SolverError("degenerate left-hand side: every free node has zero weight")
    return ReducedQuotient(free, n, local[energy.i[both]], local[energy.j[both]],
                           energy.w[both].astype(float), b, a, float(energy.p))


# ---------------------------------------------------------------- p = 2


def _factor(M):
    """Sparse LU with diagonal pivoting; returns (lu, number of negative pivots)."""
    lu = splu(sparse.csc_matrix(M), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
              options={"SymmetricMode": True})
    piv = lu.U.diagonal()
    return lu, int((piv < 0).sum()) + int((piv == 0).sum())


def generalized_min_eig(A, d, max_iters: int = 10000, tol: float = 1e-13, x0=None):
    """Smallest eigenpair of A x = lam diag(d) x by shifted inverse iteration.

    A symmetric positive semidefinite (sparse or dense), d >= 0. The first
    phase uses a tiny negative shift; the second re-shifts just below the
    current Rayleigh quotient and checks by pivot signs that the shifted
    matrix is still positive definite, so the iteration cannot lock onto a
    higher eigenvalue.
    """
    A = sparse.csc_matrix(A)
    n = A.shape[0]
    D = sparse.diags(d).tocsc()
    x = np.ones(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    scale = abs(A.diagonal()).sum() / max(d.sum(), 1e-300)
    shift = -1e-10 * scale
    lu, _ = _factor(A - shift * D)

    def rayleigh(v):
        dv = float(v @ (d * v))
        return float(v @ (A @ v)) / dv, dv

    lam, dv = rayleigh(x)
    its = 0
    reshifted = False
    converged = False
    while its < max_iters:
        its += 1
        y = lu.solve(d * x)
        if not np.all(np.isfinite(y)):
            raise SolverError("inverse iteration produced non-finite values")
        nrm = math.sqrt(max(float(y @ (d * y)), 1e-300))
        x = y / nrm
        new, _ = rayleigh(x)
        change = abs(lam - new) / max(abs(new), 1e-300)
        lam = new
        if not reshifted and change < 1e-3 and lam > 0:
            # re-shift below the current upper bound; back off if it overshoots lam_min
            for frac in (0.99, 0.9, 0.5, 0.0):
                cand = frac * lam
                lu2, neg = _factor(A - cand * D)
                if neg == 0:
                    lu, shift = lu2, cand
                    break
            reshifted = True
            continue
        if change < tol or lam <= 1e-300:
            converged = True
            break
    if x.sum() < 0:
        x = -x
    return lam, x, its, converged


def min_quotient_quadratic(energy_form, lhs_form, zero_set=None, opts: SolveOptions | None = None,
                           max_iters: int = 10000) -> HardyReport:
    """Smallest generalized eigenvalue of (A, D) on the free nodes.

    ``energy_form`` is a :class:`PairEnergy` with p = 2 or a symmetric
    matrix; ``lhs_form`` a :class:`DiagonalForm` or a diagonal vector/matrix.
    """
    opts = opts or SolveOptions()
    if isinstance(energy_form, PairEnergy):
        if energy_form.p != 2:
            raise ValueError("quadratic solver needs p = 2")
        a = lhs_form.a if isinstance(lhs_form, DiagonalForm) else _diag_of(lhs_form)
        red = reduce_quotient(energy_form, DiagonalForm(np.asarray(a, float), 2.0), zero_set)
        A, d = red.quadratic_forms()
        free, n = red.free, red.n_full
    else:
        M = sparse.csc_matrix(energy_form)
        n = M.shape[0]
        zero = _zero_mask(zero_set, n)
        free = np.flatnonzero(~zero)
        if free.size == 0:
            raise SolverError("no free variables: the zero set covers every node")
        A = M[free][:, free]
        d = _diag_of(lhs_form)[free]
        if not (d > 0).any():
            raise SolverError("degenerate left-hand side")
    lam, x, its, ok = generalized_min_eig(A, d, max_iters=max_iters)
    if not ok:
        warnings.warn("inverse iteration did not converge", RuntimeWarning, stacklevel=2)
    u = np.zeros(n)
    u[free] = x / math.sqrt(float(x @ (d * x)))
    return HardyReport(max(lam, 0.0), u, its, 1.0, ok, [lam], "inverse-iteration")


def _diag_of(form) -> np.ndarray:
    if isinstance(form, DiagonalForm):
        return np.asarray(form.a, dtype=float)
    if sparse.issparse(form):
        return np.asarray(form.diagonal(), dtype=float)
    arr = np.asarray(form, dtype=float)
    return np.diag(arr).copy() if arr.ndim == 2 else arr


# ---------------------------------------------------------------- general p


def _jacobi(red: ReducedQuotient, x, lam):
    """Diagonal of the Hessian of numerator - lam * denominator.

    Differences and values are floored at a tenth of the weighted mean
    neighbour magnitude, so that for p < 2 a coordinate sitting at zero
    keeps a finite curvature estimate and can move off the constraint.
    """
    p = red.p
    ax = np.abs(x)
    tiny = 1e-9 * max(float(ax.max()), 1e-300)
    diff = np.abs(x[red.i] - x[red.j])
    if p < 2:
        deg = np.bincount(red.i, red.w, red.n) + np.bincount(red.j, red.w, red.n)
        typ = (np.bincount(red.i, red.w * ax[red.j], red.n)
               + np.bincount(red.j, red.w * ax[red.i], red.n)) / np.maximum(deg, 1e-300)
        floor = np.maximum(0.1 * np.maximum(typ, ax), tiny)
        h = (np.bincount(red.i, red.w * np.maximum(diff, floor[red.i]) ** (p - 2.0), red.n)
             + np.bincount(red.j, red.w * np.maximum(diff, floor[red.j]) ** (p - 2.0), red.n))
        h = h + (red.b + lam * red.a) * floor ** (p - 2.0)
    else:
        s = red.w * np.maximum(diff, tiny) ** (p - 2.0)
        h = np.bincount(red.i, s, red.n) + np.bincount(red.j, s, red.n)
        h = h + (red.b + lam * red.a) * np.maximum(ax, tiny) ** (p - 2.0)
    h = np.asarray(h, dtype=float) * (p * (p - 1.0))
    return np.maximum(h, 1e-300)


def _descend(red: ReducedQuotient, x, opts: SolveOptions, window: int = 10):
    """Preconditioned projected gradient on the lhs = 1 sphere.

    Barzilai-Borwein step lengths with a nonmonotone Armijo backtracking
    test; after each step the iterate is clamped (if positivity is on) and
    renormalized.
    """
    x = red.normalize(np.maximum(x, 0) if opts.positivity else x)
    num, gn = red.num_grad(x)
    _, gd = red.den_grad(x)
    lam = num
    g = gn - lam * gd
    P = _jacobi(red, x, lam)
    t = 1.0
    history = [lam]
    best_x, best = x, lam
    its = 0
    converged = False
    while its < opts.max_iters:
        its += 1
        direction = -g / P
        ref = max(history[-window:])
        accepted = False
        for _ in range(60):
            y = x + t * direction
            if opts.positivity:
                y = np.maximum(y, 0.0)
            den = red.denominator(y)
            if den <= 0:
                t *= 0.5
                continue
            y = y / den ** (1.0 / red.p)
            q = red.numerator(y)
            if q <= ref + 1e-4 * float(g @ (y - x)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = True  # no descent possible at machine precision
            break
        num, gn = red.num_grad(y)
        _, gd = red.den_grad(y)
        g_new = gn - num * gd
        s = y - x
        yy = g_new - g
        P = _jacobi(red, y, num)
        sy = float(s @ yy)
        t = float(s @ (P * s)) / sy if sy > 0 else min(2.0 * t, 1e6)
        t = min(max(t, 1e-12), 1e6)
        x, g, lam = y, g_new, num
        history.append(lam)
        if lam < best:
            best_x, best = x, lam
        if len(history) > window and history[-window - 1] - best <= window * opts.tolerance * best:
            converged = True
            break
    return best, best_x, its, converged


def _descend_lbfgs(red: ReducedQuotient, x, opts: SolveOptions, rounds: int = 6):
    """Bound-constrained L-BFGS on the quotient, renormalizing between rounds."""
    bounds = [(0.0, None)] * red.n if opts.positivity else None
    x = red.normalize(np.maximum(x, 0) if opts.positivity else x)
    lam = red.numerator(x)
    its = 0
    converged = False

    def fun(y):
        n, gn = red.num_grad(y)
        d, gd = red.den_grad(y)
        if d <= 0:
            return math.inf, np.zeros_like(y)
        q = n / d
        return q, (gn - q * gd) / d

    for _ in range(rounds):
        res = minimize(fun, x, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": opts.max_iters, "ftol": opts.tolerance * 1e-3,
                                "gtol": 1e-14, "maxcor": 30})
        its += int(res.nit)
        y = red.normalize(res.x)
        q = red.numerator(y)
        if q <= lam:
            change = (lam - q) / max(q, 1e-300)
            x, lam = y, q
            if change <= opts.tolerance:
                converged = True
                break
        else:
            converged = True
            break
    return lam, x, its, converged


def _surrogate_start(red: ReducedQuotient) -> np.ndarray:
    A, d = red.quadratic_forms()
    try:
        _, x, _, _ = generalized_min_eig(A, d, max_iters=500, tol=1e-8)
    except Exception:  # singular or degenerate: fall back to a flat start
        return np.ones(red.n)
    x = np.abs(x)
    return np.where(x > 0, x, x.max() * 1e-6 + 1e-300)


def min_quotient_general(p: float, energy_fn: PairEnergy, lhs_fn: DiagonalForm, zero_set=None,
                         opts: SolveOptions | None = None, starts=None) -> HardyReport:
    """Best local minimum of energy/lhs over seeded restarts.

    Restart 0 starts from the minimizer of the p = 2 problem with the same
    weights; the others multiply it by seeded log-normal noise. Extra
    starting fields may be passed in ``starts`` (full-length vectors).
    """
    opts = opts or SolveOptions()
    if not p > 1:
        raise ValueError("p must exceed 1")
    if energy_fn.p != p or lhs_fn.p != p:
        raise ValueError("forms were built for a different p")
    red = reduce_quotient(energy_fn, lhs_fn, zero_set)
    base = _surrogate_start(red)
    rng = np.random.default_rng(opts.seed)
    inits = [base]
    for _ in range(opts.restarts - 1):
        noise = np.exp(rng.normal(0.0, 1.0, red.n))
        x = base * noise
        inits.append(x if opts.positivity else x * rng.choice([-1.0, 1.0], red.n))
    for s in starts or ():
        inits.append(np.asarray(s, dtype=float)[red.free])
    descend = _descend_lbfgs if opts.engine == "lbfgs" else _descend
    results = [descend(red, x, opts) for x in inits]
    lams = [r[0] for r in results]
    k = int(np.argmin(lams))
    lam, x, _, ok = results[k]
    its = sum(r[2] for r in results)
    spread = max(lams) / lam if lam > 0 else math.inf
    u = red.expand(red.normalize(x))
    method = "lbfgs-b" if opts.engine == "lbfgs" else "projected-gradient"
    return HardyReport(lam, u, its, spread, all(r[3] for r in results), lams, method)


# ---------------------------------------------------------------- oracle


def _golden_coordinate(red, X, j, S, lo, hi, tol, grid=9):
    """Vectorized 1D minimization of the quotient in coordinate j for every row of X."""
    p = red.p
    xj = X[:, j]
    others = np.delete(np.arange(red.n), j)
    Sj = S[j, others]
    Xo = X[:, others]

    def pair_part(t):
        return np.abs(t[:, None] - Xo) ** p @ Sj + red.b[j] * np.abs(t) ** p

    num0 = _rows_numerator(red, X, S) - pair_part(xj)
    den0 = (np.abs(X) ** p) @ red.a - red.a[j] * np.abs(xj) ** p

    def q(t):
        den = den0 + red.a[j] * np.abs(t) ** p
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, (num0 + pair_part(t)) / den, np.inf)

    # coarse scan to pick a bracket, then golden-section inside it
    ts = np.linspace(lo, hi, grid)
    vals = np.stack([q(np.full(X.shape[0], t)) for t in ts], axis=1)
    k = np.argmin(vals, axis=1)
    step = (hi - lo) / (grid - 1)
    a = np.maximum(lo, lo + (k - 1) * step)
    b = np.minimum(hi, lo + (k + 1) * step)
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = q(c), q(d)
    while float((b - a).max()) > tol:
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = b - invphi * (b - a)
        nd = a + invphi * (b - a)
        c_new = np.where(left, nc, d)
        d_new = np.where(left, c, nd)
        fc_new = np.where(left, q(nc), fd)
        fd_new = np.where(left, fc, q(nd))
        c, d, fc, fd = c_new, d_new, fc_new, fd_new
    t = 0.5 * (a + b)
    cand = np.stack([xj, t, ts[k]], axis=1)
    fv = np.stack([q(xj), q(t), vals[np.arange(X.shape[0]), k]], axis=1)
    pick = np.argmin(fv, axis=1)
    X[:, j] = cand[np.arange(X.shape[0]), pick]
    return fv[np.arange(X.shape[0]), pick]


def _rows_numerator(red, X, S):
    p = red.p
    diff = np.abs(X[:, :, None] - X[:, None, :]) ** p
    return 0.5 * np.einsum("sij,ij->s", diff, S) + (np.abs(X) ** p) @ red.b


def brute_force_oracle(p: float, energy_fn: PairEnergy, lhs_fn: DiagonalForm, zero_set=None,
                       n_starts: int = 10_000, seed: int = 0, tol: float = 1e-10,
                       keep: int = 50, max_sweeps: int = 400) -> float:
    """Minimum quotient by seeded random starts and cyclic coordinate descent.

    Works over nonnegative fields (|u| never raises the quotient). Every
    start gets three coarse sweeps; the best ``keep`` starts are then swept
    with golden-section tolerance ``tol`` until the quotient stops moving.
    """
    red = reduce_quotient(energy_fn, lhs_fn, zero_set)
    if red.n > 6:
        raise SolverError(f"oracle limited to 6 free nodes, got {red.n}")
    S = red.dense_pairs()
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (n_starts, red.n))
    X[0] = 1.0

    def sweep(X, tol_):
        X /= np.maximum(X.max(axis=1, keepdims=True), 1e-300)
        f = None
        for j in range(red.n):
            f = _golden_coordinate(red, X, j, S, 0.0, 2.0, tol_)
        return f

    for _ in range(3):
        f = sweep(X, 1e-4)
    X = X[np.argsort(f, kind="stable")[:keep]].copy()
    prev = np.inf
    for _ in range(max_sweeps):
        f = sweep(X, tol)
        best = float(f.min())
        if prev - best <= 1e-14 * best:
            break
        prev = best
    return float(f.min())


# ---------------------------------------------------------------- Hardy constants


def best_constant_fractional(space: PointCloudSpace, E: SubsetMask, theta: float, p: float,
                             opts: SolveOptions | None = None, method: str = "auto") -> HardyReport:
    """C_{theta,p}(Z \\ E) = 1 / min Besov energy / fractional Hardy LHS."""
    if E is None or not E.mask.any():
        raise ValueError("E must be nonempty")
    if E.mask.all():
        raise ValueError("Omega = Z \\ E must be nonempty")
    energy = besov_form(space, theta, p)
    lhs = frac_hardy_form(space, E, theta, p)
    return _solve(p, energy, lhs, E.mask, opts, method)


def best_constant_filling(filling: Filling, E, p: float, opts: SolveOptions | None = None,
                          method: str = "auto") -> HardyReport:
    """C_p of the filling minus the boundary nodes of E, for the measure mu_beta."""
    mask = E.mask if isinstance(E, SubsetMask) else np.asarray(E, dtype=bool)
    if not mask.any():
        raise ValueError("E must be nonempty")
    energy = dirichlet_form(filling, p)
    lhs = filling_hardy_form(filling, mask, p)
    return _solve(p, energy, lhs, filling.boundary_mask(mask), opts, method)


def _solve(p, energy, lhs, zero, opts, method):
    if method == "auto":
        method = "quadratic" if p == 2 else "general"
    if method == "quadratic":
        return min_quotient_quadratic(energy, lhs, zero, opts)
    return min_quotient_general(p, energy, lhs, zero, opts)


# ---------------------------------------------------------------- capacity


@dataclass
class CapacityResult:
    value: float
    field: np.ndarray
    iterations: int
    converged: bool


def vcap(space: PointCloudSpace, E_cap, center: int, r: float, Lambda: float, theta: float,
         p: float, opts: SolveOptions | None = None, init=None) -> CapacityResult:
    """Relative capacity of E_cap in B(center, 2r) with energy window B(center, Lambda r).

    Minimizes the restricted Besov energy over fields with u >= 1 on E_cap
    and u = 0 off B(center, 2r), by projected gradient with clamping.
    ``init`` (a full-length field) seeds the descent; the returned value is
    never above its energy.
    """
    opts = opts or SolveOptions(tolerance=1e-10)
    if Lambda < 2:
        raise ValueError("Lambda must be at least 2")
    cap = _zero_mask(E_cap, space.n)
    if not cap.any():
        return CapacityResult(0.0, np.zeros(space.n), 0, True)
    if np.any(space.dist[center, cap] > r):
        raise ValueError("E_cap must lie in the closed ball B(center, r)")
    window = SubsetMask(space.dist[center] < Lambda * r, "window")
    energy = besov_form(space, theta, p, window)
    inner = space.dist[center] < 2 * r
    free = np.flatnonzero(inner)
    lower = np.where(cap[free], 1.0, -np.inf)
    fixed_zero = np.zeros(space.n, dtype=bool)
    fixed_zero[~inner] = True
    # pairs inside the window but reaching outside 2B see u = 0 there
    red = reduce_quotient(energy, DiagonalForm(np.ones(space.n), p), fixed_zero)

    if init is None:
        x = cap[free].astype(float)
    else:
        x = np.maximum(np.asarray(init, dtype=float)[free], lower)
    val, x, its, ok = _box_descent(red, x, lower, opts)
    u = np.zeros(space.n)
    u[free] = x
    return CapacityResult(val, u, its, ok)


def _box_descent(red, x, lower, opts, window=1):
    """Monotone projected gradient for min numerator(x) subject to x >= lower."""
    f, g = red.num_grad(x)
    t = 1.0
    its = 0
    converged = False
    hist = [f]
    while its < opts.max_iters:
        its += 1
        P = _jacobi(red, x, 0.0)
        direction = -g / P
        accepted = False
        for _ in range(60):
            y = np.maximum(x + t * direction, lower)
            fy = red.numerator(y)
            if fy <= f + 1e-4 * float(g @ (y - x)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = True
            break
        fy, gy = red.num_grad(y)
        s = y - x
        sy = float(s @ (gy - g))
        t = float(s @ (P * s)) / sy if sy > 0 else min(2 * t, 1e6)
        t = min(max(t, 1e-12), 1e6)
        x, f, g = y, fy, gy
        hist.append(f)
        if len(hist) > 10 and hist[-11] - f <= 10 * opts.tolerance * max(f, 1e-300):
            converged = True
            break
    return f, x, its, converged
