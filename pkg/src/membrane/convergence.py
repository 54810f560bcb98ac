"""Mesh-refinement convergence studies.

A study solves the same scenario on a ladder of structured grids.
Level k doubles the cell counts of level k-1 and halves the timestep,
so level-k node positions contain every baseline node bitwise.  After
integrating all levels to the same final time, consecutive levels are
compared at the baseline node positions through the stacked vector of
displacements and velocities (u, v, w, u', v', w'); the decay of the
difference norms

    L1 = mean |d|,   L2 = sqrt(mean d^2),   Linf = max |d|

across levels yields the observed convergence rate: minus the
least-squares slope of log2(norm) against the level index.

The numbered cases are re-resolved on every level (central element
pair, nearest node to the center), mirroring how the discretization of
a strike follows the grid.  The base step count is snapped so that load
window edges land on shared step times of every level; otherwise the
levels would integrate slightly different impulses and the comparison
would pick up an O(tau) artifact.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, MeshError
from .integrator import State, default_timestep
from .mesh import Mesh, StructuredSpec, generate_structured, refine
from .scenarios import (
    CaseSpec,
    LoadSpec,
    ScenarioConfig,
    StrikeSpec,
    build_case,
    run,
    scenario_from_dict,
)

__all__ = [
    "StudySpec",
    "LevelDiff",
    "StudyResult",
    "NORMS",
    "norm",
    "fit_rate",
    "extract_at_positions",
    "run_study",
    "study_from_json",
]

NORMS = ("L1", "L2", "Linf")


@dataclass(frozen=True)
class StudySpec:
    """A scenario plus the number of refinements to run."""

    scenario: ScenarioConfig
    k_max: int


@dataclass(frozen=True)
class LevelDiff:
    """Difference norms between level `level` and level - 1.

    n_nodes and tau describe the finer of the two grids.  `joint` holds
    the norms of the stacked displacement+velocity vector (these feed
    the rate fit); `disp` and `vel` break the same norms out per field.
    """

    level: int
    n_nodes: int
    tau: float
    joint: dict
    disp: dict
    vel: dict


@dataclass
class StudyResult:
    """All level differences plus fitted rates per norm."""

    diffs: list[LevelDiff]
    rates: dict
    tau0: float
    n_steps0: int
    levels: list[StructuredSpec] = field(default_factory=list)


def norm(d: np.ndarray, which: str) -> float:
    """One of the averaged difference norms over a stacked vector."""
    d = np.asarray(d, dtype=float)
    if which == "L1":
        return float(np.mean(np.abs(d)))
    if which == "L2":
        return float(np.sqrt(np.mean(d * d)))
    if which == "Linf":
        return float(np.max(np.abs(d)))
    raise ConfigError(f"unknown norm {which!r}")


def fit_rate(values, ks=None) -> float:
    """Observed rate: minus the least-squares slope of log2(values).

    Zero values cannot enter the log fit; they are excluded with a
    warning.  Returns NaN (with a warning) when fewer than two points
    remain.
    """
    values = np.asarray(values, dtype=float)
    ks = np.arange(1, values.size + 1, dtype=float) if ks is None else np.asarray(ks, dtype=float)
    good = values > 0.0
    if not good.all():
        warnings.warn("zero difference norm excluded from rate fit", stacklevel=2)
    if good.sum() < 2:
        warnings.warn("fewer than two usable norms; rate undefined", stacklevel=2)
        return float("nan")
    slope = np.polyfit(ks[good], np.log2(values[good]), 1)[0]
    return float(-slope)


def extract_at_positions(mesh: Mesh, state: State, positions: np.ndarray) -> np.ndarray:
    """Stack (u, v, w) then (u', v', w') at the given node positions.

    Positions must coincide with mesh nodes within 1e-12 of the local
    cell size; a miss means the refinement subset property is broken
    and raises MeshError.
    """
    tree = cKDTree(mesh.nodes)
    tol = 1e-12 * mesh.min_edge_length()
    dist, idx = tree.query(positions)
    if float(np.max(dist)) > tol:
        raise MeshError(
            f"baseline node missing on refined grid (offset {np.max(dist):.3e})"
        )
    dofs = (3 * idx[:, None] + np.arange(3)[None, :]).ravel()
    return np.concatenate([state.a[dofs], state.adot[dofs]])


def _check_refinable(scenario: ScenarioConfig) -> StructuredSpec:
    spec = scenario.mesh
    if not isinstance(spec, StructuredSpec):
        raise ConfigError("a refinement study needs a structured mesh spec")
    case = scenario.case
    if isinstance(case, StrikeSpec):
        raise ConfigError(
            "explicit strike node ids are mesh-bound; use a numbered case for studies"
        )
    if isinstance(case, LoadSpec) and case.elements is not None:
        raise ConfigError(
            "explicit element targets are mesh-bound; use a numbered case for studies"
        )
    return spec


def _window_breakpoints(scenario: ScenarioConfig, base_mesh: Mesh) -> list[float]:
    case = scenario.case
    if isinstance(case, CaseSpec):
        case = build_case(
            case.case_id,
            base_mesh,
            scenario.t_final,
            b0=case.b0,
            speed=case.speed,
            window=case.window,
            support_radius=case.support_radius,
        )
    if isinstance(case, LoadSpec):
        return [t for t in case.window if 0.0 < t < scenario.t_final]
    return []


def _snap_steps(n0: int, t_final: float, breakpoints) -> int:
    """Smallest n >= n0 making every breakpoint an integer step of T/n.

    n must be a simultaneous multiple of every T/t_b, hence the lcm:
    snapping edges one at a time could undo an earlier edge.
    """
    divisors = []
    for tb in breakpoints:
        q = t_final / tb
        qi = round(q)
        if qi >= 1 and abs(q - qi) < 1e-9 * q:
            divisors.append(qi)
        else:
            warnings.warn(
                f"load window edge at t={tb} is not a simple fraction of T; "
                "levels will integrate slightly different impulses",
                stacklevel=2,
            )
    if divisors:
        l = math.lcm(*divisors)
        n0 = int(math.ceil(n0 / l)) * l
    return n0


def _worker_count(requested, n_jobs: int) -> int:
    if requested is None:
        env = os.environ.get("MEMBRANE_THREADS")
        if env is not None:
            try:
                requested = int(env)
            except ValueError:
                raise ConfigError(f"MEMBRANE_THREADS must be an integer, got {env!r}")
        else:
            requested = 1
    if requested < 1:
        raise ConfigError(f"worker count must be >= 1, got {requested}")
    return min(requested, n_jobs)


def run_study(spec: StudySpec, max_workers: int | None = None) -> StudyResult:
    """Solve all refinement levels and fit convergence rates.

    Levels are independent and may run on a small thread pool
    (`max_workers`, default from MEMBRANE_THREADS, else 1); results are
    identical for any worker count because each level is solved in
    isolation and combined in level order.
    """
    if spec.k_max < 2:
        raise ConfigError(f"k_max must be >= 2 to fit a rate, got {spec.k_max}")
    scenario = spec.scenario
    base_spec = _check_refinable(scenario)
    base_mesh = generate_structured(base_spec)

    tau_rule = scenario.tau if scenario.tau is not None else default_timestep(
        base_mesh, scenario.material
    )
    n0 = int(math.ceil(scenario.t_final / tau_rule - 1e-9))
    n0 = _snap_steps(n0, scenario.t_final, _window_breakpoints(scenario, base_mesh))
    tau0 = scenario.t_final / n0

    specs = [base_spec]
    for _ in range(spec.k_max):
        specs.append(refine(specs[-1]))

    def solve_level(k: int) -> np.ndarray:
        cfg = replace(
            scenario,
            mesh=specs[k],
            tau=tau0 / 2**k,
            every_n_steps=max(1, n0 * 2**k),  # snapshots not needed, keep memory flat
        )
        result = run(cfg, keep_snapshots=False)
        level_mesh = result.mesh
        return extract_at_positions(level_mesh, result.final_state, base_mesh.nodes)

    workers = _worker_count(max_workers, spec.k_max + 1)
    if workers == 1:
        sols = [solve_level(k) for k in range(spec.k_max + 1)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(solve_level, range(spec.k_max + 1)))

    half = 3 * base_mesh.n_nodes
    diffs = []
    for k in range(spec.k_max):
        d = sols[k + 1] - sols[k]
        diffs.append(
            LevelDiff(
                level=k + 1,
                n_nodes=specs[k + 1].n_nodes,
                tau=tau0 / 2 ** (k + 1),
                joint={w: norm(d, w) for w in NORMS},
                disp={w: norm(d[:half], w) for w in NORMS},
                vel={w: norm(d[half:], w) for w in NORMS},
            )
        )
    rates = {
        w: fit_rate([ld.joint[w] for ld in diffs], ks=[ld.level for ld in diffs])
        for w in NORMS
    }
    return StudyResult(
        diffs=diffs, rates=rates, tau0=tau0, n_steps0=n0, levels=specs
    )


def study_from_json(source) -> StudySpec:
    """Load a StudySpec from a JSON file path or a parsed dict.

    The file is a scenario config plus one extra key, k_max.
    """
    if isinstance(source, dict):
        data = source
    else:
        import json

        try:
            with open(source, "r", encoding="utf-8") as f:
                data = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read study file {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {source}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("study root must be a JSON object")
    if "k_max" not in data:
        raise ConfigError("missing config key: k_max")
    scenario = scenario_from_dict(data, extra_keys={"k_max"})
    return StudySpec(scenario=scenario, k_max=int(data["k_max"]))
