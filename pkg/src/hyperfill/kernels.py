"""Kernel dispatch: compiled module when importable, numpy otherwise.

Set ``HYPERFILL_PURE=1`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _pykernels

_impl = _pykernels
if os.environ.get("HYPERFILL_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels

BACKEND = _impl.BACKEND


def _idx(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _flt(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def pair_energy(i, j, w, u, p):
    return _impl.pair_energy(_idx(i), _idx(j), _flt(w), _flt(u), float(p))


def pair_energy_grad(i, j, w, u, p):
    return _impl.pair_energy_grad(_idx(i), _idx(j), _flt(w), _flt(u), float(p))


def open_ball_masses(dist, mass):
    return _impl.open_ball_masses(_flt(dist), _flt(mass))
