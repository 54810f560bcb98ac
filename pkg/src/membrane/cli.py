"""Command-line interface.

Three subcommands:

    membrane run <config.json> [--out DIR] [--every N] [--tau X]
    membrane convergence <study.json> [--out DIR]
    membrane mesh-info <file.msh>

Exit codes: 0 on success, 2 for configuration problems (bad JSON,
missing keys, invalid mesh or material), 3 for numerical failures
(singular matrices, non-finite states).  The environment variable
MEMBRANE_THREADS caps the worker threads used by convergence studies.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .convergence import run_study, study_from_json
from .errors import MembraneError, SolverError
from .mesh import boundary_nodes, read_msh
from .output import (
    write_element_csv,
    write_run_manifest,
    write_snapshot_csv,
    write_snapshot_vtk,
    write_study_csv,
)
from .scenarios import build_mesh, config_from_json, run

__all__ = ["main"]

DEFAULT_OUT = "membrane-out"


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="membrane",
        description="Dynamic simulation of thin anisotropic composite membranes.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="integrate one scenario and write snapshots")
    pr.add_argument("config", help="scenario JSON file")
    pr.add_argument("--out", help=f"output directory (default: config, else {DEFAULT_OUT})")
    pr.add_argument("--every", type=int, help="override snapshot cadence (steps)")
    pr.add_argument("--tau", type=float, help="override the timestep")

    pc = sub.add_parser("convergence", help="run a mesh-refinement study")
    pc.add_argument("study", help="study JSON file (scenario plus k_max)")
    pc.add_argument("--out", help=f"output directory (default: config, else {DEFAULT_OUT})")

    pm = sub.add_parser("mesh-info", help="summarize an MSH v2.2 file")
    pm.add_argument("mesh", help="MSH v2.2 ASCII file")
    return p


def _cmd_run(args) -> int:
    config = config_from_json(args.config)
    if args.every is not None:
        if args.every < 1:
            print("error: --every must be >= 1", file=sys.stderr)
            return 2
        config.every_n_steps = args.every
    if args.tau is not None:
        if args.tau <= 0:
            print("error: --tau must be positive", file=sys.stderr)
            return 2
        config.tau = args.tau
    out_dir = Path(args.out or config.out_dir or DEFAULT_OUT)
    out_dir.mkdir(parents=True, exist_ok=True)

    # build the mesh up front so the snapshot writer can use it
    mesh = build_mesh(config.mesh)
    config.mesh = mesh
    written = []

    def on_snapshot(state):
        tag = f"{state.step:06d}"
        write_snapshot_csv(out_dir / f"snapshot_{tag}.csv", mesh, state)
        write_element_csv(out_dir / f"elements_{tag}.csv", mesh, config.material, state)
        write_snapshot_vtk(out_dir / f"snapshot_{tag}.vtk", mesh, state)
        written.append(state.step)

    result = run(config, on_snapshot=on_snapshot, keep_snapshots=False)

    with open(args.config, "r", encoding="utf-8") as f:
        config_echo = json.load(f)
    write_run_manifest(
        out_dir / "manifest.json",
        {
            "config": config_echo,
            "overrides": {
                "out": args.out,
                "every": args.every,
                "tau": args.tau,
            },
            "version": __version__,
            "tau": result.params.tau,
            "n_steps": result.n_steps,
            "n_nodes": result.mesh.n_nodes,
            "n_triangles": result.mesh.n_triangles,
            "snapshot_steps": written,
            "wall_time_s": result.wall_time,
        },
    )
    print(
        f"ran {result.n_steps} steps (tau={result.params.tau:.6e}) on "
        f"{result.mesh.n_nodes} nodes; {len(written)} snapshots in {out_dir}"
    )
    return 0


def _cmd_convergence(args) -> int:
    spec = study_from_json(args.study)
    out_dir = Path(args.out or spec.scenario.out_dir or DEFAULT_OUT)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_study(spec)
    write_study_csv(out_dir / "study.csv", result)
    for name, rate in result.rates.items():
        print(f"{name} rate {rate:.3f}")
    print(f"study report written to {out_dir / 'study.csv'}")
    return 0


def _cmd_mesh_info(args) -> int:
    mesh = read_msh(args.mesh)
    xmin, xmax, ymin, ymax = mesh.extent()
    print(f"nodes:      {mesh.n_nodes}")
    print(f"triangles:  {mesh.n_triangles}")
    print(f"extent:     [{xmin:.6g}, {xmax:.6g}] x [{ymin:.6g}, {ymax:.6g}]")
    print(f"area:       {mesh.areas().sum():.6g}")
    print(f"boundary:   {boundary_nodes(mesh).size} nodes")
    print(f"min edge:   {mesh.min_edge_length():.6g}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        return _cmd_mesh_info(args)
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except MembraneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
