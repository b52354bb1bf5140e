"""Numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` module is unavailable, and as the
reference the compiled versions are benchmarked and tested against.
"""
import numpy as np

BACKEND = "numpy"


def pair_energy(i, j, w, u, p):
    """Return sum_k w[k] * |u[i[k]] - u[j[k]]|**p."""
    diff = np.abs(u[i] - u[j])
    return float(np.dot(w, diff**p))


def pair_energy_grad(i, j, w, u, p):
    """Pair energy and its gradient with respect to ``u``."""
    diff = u[i] - u[j]
    a = np.abs(diff)
    energy = float(np.dot(w, a**p))
    s = w * p * a ** (p - 1.0) * np.sign(diff)
    n = u.shape[0]
    grad = np.bincount(i, weights=s, minlength=n) - np.bincount(j, weights=s, minlength=n)
    return energy, grad


def open_ball_masses(dist, mass):
    """M[z, w] = total mass of points strictly closer to z than d(z, w)."""
    n = dist.shape[0]
    out = np.empty_like(dist)
    for z in range(n):
        row = dist[z]
        order = np.argsort(row, kind="stable")
        srt = row[order]
        cum = np.concatenate(([0.0], np.cumsum(mass[order])))
        out[z] = cum[np.searchsorted(srt, row, side="left")]
    return out
