"""Config-driven experiments and their deterministic reports."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .covers import domain_from_filling
from .energy import restricted_besov_energy
from .filling import ALPHA, make_filling, reweight
from .fixtures import make_instance
from .solver import SolveOptions, best_constant_filling, best_constant_fractional, vcap
from .space import (SubsetMask, estimate_codimension, exhaustion_subset, load_space,
                    min_level)
from .weights import (WeightField, delta_star, distance_power_weight, filling_layers,
                      regularized_gradient_check, sigma_bound)

EPS = math.log(ALPHA)
GROWTH_THRESHOLD = 1.5
HARDY_PROXY = ("A finite instance always has a finite best constant. 'Satisfies a Hardy "
               "inequality' is read as bounded growth of the best constant under refinement: "
               f"a growth factor below {GROWTH_THRESHOLD} per doubling.")

EXPERIMENTS = ("equivalence_sweep", "improvement_region", "punctured_domain",
               "capacity_decay", "weight_suite", "localization")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    instance: dict
    theta: list = field(default_factory=lambda: [0.5])
    p: list = field(default_factory=lambda: [2.0])
    depth: int | None = None          # absolute L; default i* + depth_offset
    depth_offset: int = 0
    resolutions: list = field(default_factory=lambda: [32, 64])
    sigma_fractions: list = field(default_factory=lambda: [-0.99, -0.5, 0.0, 0.5, 0.99])
    delta: float = 0.5
    eta: list | None = None
    radius: float = 0.25               # capacity r, in raw (unnormalized) units
    Lambda: float = 8.0
    dim: int = 1
    R: list | None = None              # localization radii, raw units
    solver: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if not self.theta or not self.p:
            raise ConfigError("theta and p grids must be nonempty")
        if self.experiment in ("improvement_region", "punctured_domain") and len(self.resolutions) < 2:
            raise ConfigError("need at least two resolutions")
        if not isinstance(self.instance, dict):
            raise ConfigError("instance must be a mapping")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def options(self) -> SolveOptions:
        return SolveOptions(**{"seed": self.seed, **self.solver})


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.as_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_instance(spec: dict, **override):
    """(space, E) from {"fixture": name, "params": {...}} or {"space": path, "E": [ids]}."""
    if "fixture" in spec:
        params = {**spec.get("params", {}), **override}
        inst = make_instance(spec["fixture"], **params)
        space, E = inst.space, inst.E
    elif "space" in spec:
        space = load_space(spec["space"])
        E = SubsetMask.from_ids(space.n, spec.get("E", []))
    else:
        raise ConfigError("instance needs 'fixture' or 'space'")
    if not E.mask.any():
        raise ConfigError("E must be nonempty")
    if E.mask.all():
        raise ConfigError("Z minus E must be nonempty")
    return space, E


def beta_for(theta: float, p: float) -> float:
    """beta with beta/eps = p(1 - theta)."""
    return EPS * p * (1.0 - theta)


def _check_link(filling, theta, p):
    if abs(filling.beta / filling.params.eps - p * (1 - theta)) > 1e-12 * p:
        raise AssertionError("beta/eps != p(1-theta)")


def _workers() -> int:
    env = os.environ.get("HYPERFILL_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _pmap(fn, jobs):
    jobs = list(jobs)
    if _workers() == 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=_workers()) as ex:
        return list(ex.map(fn, jobs))


def _r(x):
    """Floats that survive JSON (inf/nan become strings)."""
    x = float(x)
    return x if math.isfinite(x) else str(x)


# ---------------------------------------------------------------- experiments


def _depth(cfg, space):
    return cfg.depth if cfg.depth is not None else min_level(space, ALPHA) + cfg.depth_offset


def run_equivalence_sweep(cfg: ExperimentConfig) -> dict:
    space, E = build_instance(cfg.instance)
    L = _depth(cfg, space)
    opts = cfg.options()

    def cell(tp):
        theta, p = tp
        beta = beta_for(theta, p)
        filling = make_filling(space, beta, L)
        _check_link(filling, theta, p)
        try:
            cz = best_constant_fractional(space, E, theta, p, opts)
            cx = best_constant_filling(filling, E, p, opts)
        except Exception as exc:  # surfaced per cell
            return {"theta": theta, "p": p, "beta": beta, "error": repr(exc)}
        ratio = cx.best_constant / cz.best_constant
        return {"theta": theta, "p": p, "beta": beta, "C_Z": cz.best_constant,
                "C_X": cx.best_constant, "ratio": ratio,
                "flags": "" if cz.converged and cx.converged else "unconverged"}

    cells = _pmap(cell, [(t, p) for t in cfg.theta for p in cfg.p])
    ok = [c for c in cells if "ratio" in c]
    K = max((max(c["ratio"], 1 / c["ratio"]) for c in ok), default=math.nan)
    return {"cells": cells, "summary": {"K": K, "depth": L}}


def _growth_cells(cfg, theta_p, resolutions, opts):
    def cell(job):
        theta, p, n = job
        space, E = build_instance(cfg.instance, n=n)
        rep = best_constant_fractional(space, E, theta, p, opts)
        return (theta, p, n), rep.best_constant

    jobs = [(t, p, n) for (t, p) in theta_p for n in resolutions]
    return dict(_pmap(cell, jobs))


def _classify(consts, theta, p, resolutions):
    cs = [consts[(theta, p, n)] for n in resolutions]
    growth = [cs[k + 1] / cs[k] for k in range(len(cs) - 1)]
    return cs, growth, ("exploding" if max(growth) >= GROWTH_THRESHOLD else "finite")


def run_improvement_region(cfg: ExperimentConfig) -> dict:
    res = sorted(cfg.resolutions)
    grid = [(t, p) for t in cfg.theta for p in cfg.p]
    consts = _growth_cells(cfg, grid, res, cfg.options())
    cells = []
    for t, p in grid:
        cs, growth, cls = _classify(consts, t, p, res)
        cells.append({"theta": t, "p": p, "C_Z": cs[-1], "constants": cs, "growth": growth, "flags": cls})
    return {"cells": cells, "summary": {"resolutions": res, "threshold": GROWTH_THRESHOLD,
                                        "n_exploding": sum(c["flags"] == "exploding" for c in cells)}}


def run_punctured_domain(cfg: ExperimentConfig) -> dict:
    res = sorted(cfg.resolutions)
    if res[0] < 8:
        warnings.warn("resolution below 8 points per unit length is too coarse", stacklevel=2)
    grid = [(t, p) for t in cfg.theta for p in cfg.p]
    consts = _growth_cells(cfg, grid, res, cfg.options())
    space, E = build_instance(cfg.instance, n=res[-1])
    origin = np.zeros(space.n, dtype=bool)
    origin[space.base_point] = True
    outer = E.mask & ~origin
    codim_outer = estimate_codimension(space, SubsetMask(outer))
    codim_origin = estimate_codimension(space, SubsetMask(origin))
    cells = []
    for t, p in grid:
        cs, growth, cls = _classify(consts, t, p, res)
        cells.append({"theta": t, "p": p, "C_Z": cs[-1], "constants": cs, "growth": growth, "flags": cls,
                      "hypotheses": bool(codim_outer.upper < t * p < codim_origin.lower)})
    summary = {"resolutions": res, "codim_outer_upper": codim_outer.upper,
               "codim_origin_lower": codim_origin.lower, "threshold": GROWTH_THRESHOLD}
    return {"cells": cells, "summary": summary}


def run_capacity_decay(cfg: ExperimentConfig) -> dict:
    theta, p = cfg.theta[0], cfg.p[0]
    n = cfg.resolutions[-1]
    space, E = build_instance(cfg.instance, n=n)
    c = space.base_point
    d0 = space.dist[c]
    h = space.scale / n
    r = cfg.radius * space.scale
    window = SubsetMask(d0 < cfg.Lambda * r, "window")
    etas = np.geomspace(8 * h, r / 2, 10) if cfg.eta is None else np.asarray(cfg.eta) * space.scale
    etas = np.sort(etas)[::-1]
    notes = []
    keep = etas >= 2 * h
    if not keep.all():
        notes.append(f"{int((~keep).sum())} eta values below 2h excluded")
    etas = etas[keep]
    rows, best = [], None
    for eta in etas:
        u = np.maximum(0.0, 1.0 - d0 / eta)
        assert u[c] >= 1 and not np.any(u[d0 >= 2 * r])
        b = restricted_besov_energy(space, window, theta, p, u)
        rows.append({"eta": eta / space.scale, "bound": b})
        if best is None or b < best[0]:
            best = (b, u)
    cap = vcap(space, [c], c, r, cfg.Lambda, theta, p, cfg.options(), init=best[1])
    x = np.log([row["eta"] for row in rows])
    y = np.log([row["bound"] for row in rows])
    slope = float(np.polyfit(x, y, 1)[0])
    cells = [{"theta": theta, "p": p, "eta": row["eta"], "bound": row["bound"],
              "flags": "ok" if cap.value <= row["bound"] * (1 + 1e-12) else "direct>bound"} for row in rows]
    summary = {"slope": slope, "target": cfg.dim - theta * p, "vcap_direct": cap.value,
               "vcap_converged": cap.converged, "n": n, "notes": notes}
    return {"cells": cells, "summary": summary}


def run_weight_suite(cfg: ExperimentConfig) -> dict:
    theta, p = cfg.theta[0], cfg.p[0]
    space, E = build_instance(cfg.instance)
    beta = beta_for(theta, p)
    filling = make_filling(space, beta, _depth(cfg, space))
    _check_link(filling, theta, p)
    layers = filling_layers(filling)
    sb = sigma_bound(cfg.delta, layers.kappa, layers.C)
    dom = domain_from_filling(filling, E)
    all_z = np.ones(space.n, dtype=bool)
    opts = cfg.options()
    base = best_constant_filling(filling, E, p, opts).best_constant

    def cell(frac):
        sigma = frac * sb.sigma0
        row = {"theta": theta, "p": p, "sigma": sigma, "fraction": frac, "beta": beta + EPS * sigma}
        if beta + EPS * sigma <= 0:
            row["flags"] = "rejected: beta + eps*sigma <= 0"
            return row
        w = distance_power_weight(filling, all_z, sigma)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ds = delta_star(dom, w)
        row["delta_star"] = ds
        row["C0"] = regularized_gradient_check(dom, w, max(cfg.delta, ds))[1]
        new, ratios = reweight(filling, sigma)
        row["C_X"] = base if sigma == 0 else best_constant_filling(new, E, p, opts).best_constant
        row["ratio"] = row["C_X"] / base
        row["edge_ratio_spread"] = float(ratios.max() / ratios.min())
        row["flags"] = "ok" if ds <= cfg.delta else "delta_star>delta"
        return row

    cells = _pmap(cell, sorted(cfg.sigma_fractions))
    summary = {"kappa": layers.kappa, "C": layers.C, "sigma0": sb.sigma0, "sigmas": list(sb.sigmas),
               "taus": list(sb.taus), "C1": sb.C1, "delta": cfg.delta, "C_X_sigma0": base}
    return {"cells": cells, "summary": summary}


def run_localization(cfg: ExperimentConfig) -> dict:
    theta, p = cfg.theta[0], cfg.p[0]
    space, E = build_instance(cfg.instance)
    opts = cfg.options()
    z0 = space.base_point
    full = best_constant_fractional(space, E, theta, p, opts).best_constant
    radii = (np.geomspace(0.05, 2.0, 8) * space.diam if cfg.R is None
             else np.asarray(cfg.R, dtype=float) * space.scale)

    def cell(R):
        ZR = exhaustion_subset(space, z0, float(R), seed=cfg.seed)
        sub = space.subspace(ZR.mask)
        E_sub = SubsetMask(E.mask[ZR.mask])
        row = {"theta": theta, "p": p, "R": float(R) / space.scale, "size": int(ZR.mask.sum())}
        if not E_sub.mask.any() or E_sub.mask.all():
            row["flags"] = "degenerate"
            return row
        c = best_constant_fractional(sub, E_sub, theta, p, opts).best_constant
        row.update({"C_Z": c, "ratio": c / full, "flags": "ok"})
        return row

    cells = _pmap(cell, radii)
    agree = [c["R"] for c in cells if "ratio" in c and 0.25 <= c["ratio"] <= 4.0]
    vals = [c["C_Z"] for c in cells if "C_Z" in c]
    summary = {"C_full": full, "threshold_R": min(agree) if agree else None,
               "spread": max(vals) / min(vals) if vals else None}
    return {"cells": cells, "summary": summary}


RUNNERS = {
    "equivalence_sweep": run_equivalence_sweep,
    "improvement_region": run_improvement_region,
    "punctured_domain": run_punctured_domain,
    "capacity_decay": run_capacity_decay,
    "weight_suite": run_weight_suite,
    "localization": run_localization,
}


# ---------------------------------------------------------------- reports


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _r(obj)
    return obj


def run(cfg: ExperimentConfig | dict) -> dict:
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    body = RUNNERS[cfg.experiment](cfg)
    space, _ = build_instance(cfg.instance, **({"n": cfg.resolutions[-1]}
                                               if cfg.experiment in ("improvement_region", "punctured_domain",
                                                                     "capacity_decay") else {}))
    report = {
        "experiment": cfg.experiment,
        "config": cfg.as_dict(),
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "normalization": space.scale,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "hardy_proxy": HARDY_PROXY,
        **body,
    }
    return _clean(report)


CELL_FIELDS = ["theta", "p", "beta", "C_Z", "C_X", "ratio", "flags"]


def write_outputs(report: dict, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    with open(out / "cells.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, CELL_FIELDS, extrasaction="ignore")
        wr.writeheader()
        for c in report["cells"]:
            wr.writerow({k: c.get(k, "") for k in CELL_FIELDS})
    with open(out / "slopes.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["series", "x", "y"])
        for series, x, y in _slope_rows(report):
            wr.writerow([series, x, y])
    return out


def _slope_rows(report):
    exp = report["experiment"]
    cells = report["cells"]
    if exp == "capacity_decay":
        for c in cells:
            yield "vcap_bound", c["eta"], c["bound"]
    elif exp in ("improvement_region", "punctured_domain"):
        res = report["summary"]["resolutions"]
        for c in cells:
            for n, val in zip(res, c["constants"]):
                yield f"theta={c['theta']},p={c['p']}", n, val
    elif exp == "weight_suite":
        for c in cells:
            if "C_X" in c:
                yield "C_X", c["sigma"], c["C_X"]
    elif exp == "localization":
        for c in cells:
            if "C_Z" in c:
                yield "C_Z", c["R"], c["C_Z"]
    elif exp == "equivalence_sweep":
        for c in cells:
            if "ratio" in c:
                yield f"p={c['p']}", c["theta"], c["ratio"]
