"""Command line entry point: ``hyperfill run | inspect-filling | oracle``."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .energy import besov_form, frac_hardy_form
from .experiments import ConfigError, ExperimentConfig, run, write_outputs
from .filling import filling_to_dict, make_filling, verify_whitney_filling
from .solver import SolveOptions, brute_force_oracle, min_quotient_general
from .space import SubsetMask, load_space, min_level


@click.group()
@click.version_option(package_name="hyperfill")
def main():
    """Hardy inequalities on finite spaces and their hyperbolic fillings."""


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def run_cmd(config_path, out_dir):
    """Run one experiment and write report.json, cells.csv and slopes.csv."""
    try:
        cfg = ExperimentConfig.from_dict(json.loads(Path(config_path).read_text()))
        report = run(cfg)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    out = write_outputs(report, out_dir)
    click.echo(json.dumps({"out": str(out), "summary": report["summary"]}, sort_keys=True))


@main.command("inspect-filling")
@click.option("--space", "space_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--beta", type=float, required=True)
@click.option("--depth", type=int, default=None, help="Depth L (default: the minimal level i*).")
@click.option("--full", is_flag=True, help="Dump every vertex and edge.")
def inspect_filling(space_path, beta, depth, full):
    """Build a filling and print its size, overlap and parameters."""
    space = load_space(space_path)
    filling = make_filling(space, beta, depth)
    rep = verify_whitney_filling(filling)
    out = {
        "n_points": space.n,
        "i_star": min_level(space, filling.params.alpha),
        "L": filling.L,
        "n_vertices": filling.n_vertices,
        "n_nodes": filling.n_nodes,
        "n_edges": int(filling.src.size),
        "total_mass": filling.total_mass(),
        "overlap": rep.overlap,
        "normalization": space.scale,
    }
    if full:
        out["filling"] = filling_to_dict(filling)
    click.echo(json.dumps(out, sort_keys=True, indent=1))


@main.command("oracle")
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON space with an 'E' list of point ids (at most 6 free points).")
@click.option("--theta", type=float, default=0.5)
@click.option("--p", "ps", type=float, multiple=True, default=(1.5, 2.0, 3.0))
@click.option("--starts", type=int, default=10_000)
@click.option("--seed", type=int, default=0)
def oracle(instance_path, theta, ps, starts, seed):
    """Cross-check the quotient solver against brute-force coordinate descent."""
    raw = json.loads(Path(instance_path).read_text())
    space = load_space(raw)
    E = SubsetMask.from_ids(space.n, raw.get("E", []))
    if not E.mask.any():
        raise click.UsageError("instance needs a nonempty 'E'")
    worst = 0.0
    for p in ps:
        energy = besov_form(space, theta, p)
        lhs = frac_hardy_form(space, E, theta, p)
        solved = min_quotient_general(p, energy, lhs, E.mask, SolveOptions(seed=seed)).lam
        brute = brute_force_oracle(p, energy, lhs, E.mask, n_starts=starts, seed=seed)
        rel = abs(solved - brute) / brute
        worst = max(worst, rel)
        click.echo(json.dumps({"p": p, "solver": solved, "oracle": brute, "rel_diff": rel}, sort_keys=True))
    sys.exit(0 if worst <= 0.01 else 1)


if __name__ == "__main__":  # pragma: no cover
    main()
