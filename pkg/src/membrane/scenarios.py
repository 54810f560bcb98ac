"""Load cases, strikes, and the simulation driver.

The five built-in cases:

1. transverse strike by a constant load on the central element pair;
2. the same load tilted by pi/6 from the normal, in the x-z plane;
3. transverse strike at constant speed: the node nearest the domain
   center has its velocity held fixed;
4. the constant-speed strike tilted by pi/6, again in the x-z plane;
5. a steady distributed transverse load b(r) = b0*cos^2(r) inside its
   support, where r = pi/(2*size) times the distance from the center.

Cases 1 and 2 default to a load window of the first tenth of the run;
case 5 stays on for the whole run.  Strike constraints hold for the
entire simulation.  A fixed border constrains every boundary node to
zero velocity; a free border leaves the edge untouched.
"""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    CompiledLoad,
    Constraint,
    GlobalSystem,
    apply_constraints,
    assemble,
    build_load_vector,
    update_load,
)
from .errors import ConfigError, MeshError
from .integrator import (
    NewmarkParams,
    State,
    default_timestep,
    factor_once,
    init_state,
    step,
)
from .material import MaterialParams, params_from_config
from .mesh import Mesh, StructuredSpec, boundary_nodes, central_element_pair, generate_structured, nearest_node, read_msh

__all__ = [
    "LoadSpec",
    "StrikeSpec",
    "CaseSpec",
    "ScenarioConfig",
    "SimulationResult",
    "build_case",
    "distributed_b",
    "elementwise_load",
    "compile_case",
    "build_mesh",
    "run",
    "config_from_json",
    "scenario_from_dict",
]

# tilt of the inclined strike cases, measured from the membrane normal,
# applied in the x-z plane
TILT_ANGLE = math.pi / 6.0


@dataclass(frozen=True)
class LoadSpec:
    """A volumetric load with a direction, magnitude, and time window.

    kind is "element-uniform" (constant b on the listed elements) or
    "distributed-cos2" (the case-5 field sampled per element at the
    centroid, all elements).  The window is closed: active for
    t_start <= t <= t_end.
    """

    kind: str
    direction: tuple[float, float, float]
    b0: float
    window: tuple[float, float]
    elements: tuple[int, ...] | None = None
    support_radius: float | None = None


@dataclass(frozen=True)
class StrikeSpec:
    """Constant-velocity strike: one node's velocity is held fixed."""

    node: int
    speed: float
    angle_to_normal: float = 0.0

    @property
    def v_fix(self) -> tuple[float, float, float]:
        s, c = math.sin(self.angle_to_normal), math.cos(self.angle_to_normal)
        return (self.speed * s, 0.0, self.speed * c)


@dataclass(frozen=True)
class CaseSpec:
    """Recipe for one numbered case, resolved against a concrete mesh.

    Keeping the recipe rather than element/node ids lets refinement
    studies rebuild the case on every grid level.
    """

    case_id: int
    b0: float = 1.0
    speed: float = 1.0
    window: tuple[float, float] | None = None
    support_radius: float | None = None


@dataclass
class ScenarioConfig:
    """Everything needed to run one simulation."""

    mesh: StructuredSpec | Mesh | str
    material: MaterialParams
    case: CaseSpec | LoadSpec | StrikeSpec
    border: str
    t_final: float
    tau: float | None = None
    every_n_steps: int = 1
    out_dir: str | None = None
    initial_translation: tuple[float, float, float] | None = None


@dataclass
class SimulationResult:
    """Run artifacts: mesh, systems, snapshots, and timing."""

    mesh: Mesh
    material: MaterialParams
    raw_system: GlobalSystem
    system: GlobalSystem
    params: NewmarkParams
    n_steps: int
    snapshots: list[State] = field(default_factory=list)
    final_state: State | None = None
    wall_time: float = 0.0


def build_case(case_id: int, mesh: Mesh, t_final: float, *, b0: float = 1.0,
               speed: float = 1.0, window=None, support_radius=None):
    """Resolve a numbered case against a mesh.

    Returns a LoadSpec (cases 1, 2, 5) or a StrikeSpec (cases 3, 4).
    The strike node is the one nearest the geometric center of the
    bounding box; load cases 1 and 2 target the central element pair.
    """
    if case_id in (1, 2):
        angle = 0.0 if case_id == 1 else TILT_ANGLE
        direction = (math.sin(angle), 0.0, math.cos(angle))
        win = tuple(window) if window is not None else (0.0, t_final / 10.0)
        return LoadSpec(
            kind="element-uniform",
            direction=direction,
            b0=b0,
            window=win,
            elements=central_element_pair(mesh),
        )
    if case_id in (3, 4):
        xmin, xmax, ymin, ymax = mesh.extent()
        node = nearest_node(mesh, (0.5 * (xmin + xmax), 0.5 * (ymin + ymax)))
        angle = 0.0 if case_id == 3 else TILT_ANGLE
        return StrikeSpec(node=node, speed=speed, angle_to_normal=angle)
    if case_id == 5:
        win = tuple(window) if window is not None else (0.0, t_final)
        return LoadSpec(
            kind="distributed-cos2",
            direction=(0.0, 0.0, 1.0),
            b0=b0,
            window=win,
            support_radius=support_radius,
        )
    raise ConfigError(f"unknown case id {case_id} (valid: 1..5)")


def distributed_b(x, y, b0: float, size: float, support_radius=None, center=None):
    """The case-5 load field, vectorized over x and y.

    r = pi/(2*size) * distance from `center` (default (size/2, size/2));
    the value is b0*cos^2(r) where r <= cutoff and zero outside.  The
    cutoff defaults to `size` itself, matching the piecewise definition
    literally; pass `support_radius` to move it (e.g. pi/2 extends the
    support to the natural zero of cos^2).
    """
    if not size > 0.0:
        raise ConfigError(f"size must be positive, got {size}")
    cx, cy = (0.5 * size, 0.5 * size) if center is None else center
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = (math.pi / (2.0 * size)) * np.hypot(x - cx, y - cy)
    cutoff = size if support_radius is None else float(support_radius)
    return np.where(r <= cutoff, b0 * np.cos(r) ** 2, 0.0)


def elementwise_load(mesh: Mesh, field_fn) -> np.ndarray:
    """Per-element load magnitudes: the field sampled at centroids.

    Loads are uniform within each element, so a spatial field enters
    the discretization through one sample per triangle.
    """
    c = mesh.centroids()
    return np.asarray(field_fn(c[:, 0], c[:, 1]), dtype=float)


def compile_case(mesh: Mesh, material: MaterialParams, case, t_final: float):
    """Turn a case into assembled load vectors and node constraints.

    Returns (loads, constraints): CompiledLoad list and Constraint list.
    """
    if isinstance(case, CaseSpec):
        case = build_case(
            case.case_id,
            mesh,
            t_final,
            b0=case.b0,
            speed=case.speed,
            window=case.window,
            support_radius=case.support_radius,
        )
    if isinstance(case, StrikeSpec):
        if not 0 <= case.node < mesh.n_nodes:
            raise ConfigError(f"strike node {case.node} out of range")
        return [], [Constraint(node=case.node, v_fix=case.v_fix)]
    if not isinstance(case, LoadSpec):
        raise ConfigError(f"unsupported case object {type(case).__name__}")

    t0, t1 = case.window
    if not (0.0 <= t0 <= t1):
        raise ConfigError(f"bad load window {case.window}")
    direction = np.asarray(case.direction, dtype=float)
    if case.kind == "element-uniform":
        if case.elements is None or len(case.elements) == 0:
            raise ConfigError("element-uniform load needs target elements")
        vec = build_load_vector(
            mesh, material, np.asarray(case.elements), case.b0 * direction
        )
    elif case.kind == "distributed-cos2":
        xmin, xmax, ymin, ymax = mesh.extent()
        size = xmax - xmin
        center = (0.5 * (xmin + xmax), 0.5 * (ymin + ymax))
        mags = elementwise_load(
            mesh,
            lambda x, y: distributed_b(
                x, y, case.b0, size, support_radius=case.support_radius, center=center
            ),
        )
        ids = np.nonzero(mags)[0]
        if ids.size == 0:
            raise ConfigError("distributed load vanishes on every element")
        vec = build_load_vector(mesh, material, ids, mags[ids, None] * direction[None, :])
    else:
        raise ConfigError(f"unknown load kind {case.kind!r}")
    return [CompiledLoad(vector=vec, t_start=t0, t_end=t1)], []


def build_mesh(spec) -> Mesh:
    if isinstance(spec, Mesh):
        return spec
    if isinstance(spec, StructuredSpec):
        return generate_structured(spec)
    if isinstance(spec, (str, os.PathLike)):
        return read_msh(spec)
    raise ConfigError(f"cannot build a mesh from {type(spec).__name__}")


def run(config: ScenarioConfig, on_snapshot=None, keep_snapshots: bool = True) -> SimulationResult:
    """Integrate a scenario from rest over [0, t_final].

    Snapshots are emitted at step 0, every `every_n_steps` steps, and at
    the final step; `on_snapshot(state)` is called for each if given,
    and copies are retained when `keep_snapshots` is true.  The number
    of steps is ceil(t_final/tau), so the run never stops short.
    """
    if config.border not in ("free", "fixed"):
        raise ConfigError(f"border must be 'free' or 'fixed', got {config.border!r}")
    if not config.t_final > 0.0:
        raise ConfigError(f"t_final must be positive, got {config.t_final}")
    if config.every_n_steps < 1:
        raise ConfigError(f"every_n_steps must be >= 1, got {config.every_n_steps}")

    t_start = time.perf_counter()
    mesh = build_mesh(config.mesh)
    material = config.material
    loads, constraints = compile_case(mesh, material, config.case, config.t_final)
    if config.border == "fixed":
        for node in boundary_nodes(mesh):
            constraints.append(Constraint(node=int(node), v_fix=(0.0, 0.0, 0.0)))

    raw = assemble(mesh, material)
    raw.constraints = constraints
    system = apply_constraints(raw)

    tau = config.tau if config.tau is not None else default_timestep(mesh, material)
    params = NewmarkParams(tau=tau)
    n_steps = int(math.ceil(config.t_final / tau - 1e-9))

    a0 = None
    if config.initial_translation is not None:
        a0 = np.tile(np.asarray(config.initial_translation, dtype=float), mesh.n_nodes)

    update_load(system, 0.0, loads)
    state = init_state(system, a0=a0)
    factor = factor_once(system, params)

    result = SimulationResult(
        mesh=mesh,
        material=material,
        raw_system=raw,
        system=system,
        params=params,
        n_steps=n_steps,
    )

    def emit(s: State):
        if on_snapshot is not None:
            on_snapshot(s)
        if keep_snapshots:
            result.snapshots.append(s.copy())

    emit(state)
    for k in range(n_steps):
        update_load(system, (k + 1) * tau, loads)
        state = step(state, system, params, factor)
        if state.step % config.every_n_steps == 0 or state.step == n_steps:
            emit(state)

    result.final_state = state.copy()
    result.wall_time = time.perf_counter() - t_start
    return result


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing config key: {where}{key}")
    return d[key]


def _mesh_from_dict(d: dict):
    if "msh_path" in d:
        return str(d["msh_path"])
    for key in ("Lx", "Ly", "nx", "ny"):
        _require(d, key, "mesh.")
    try:
        return StructuredSpec(
            Lx=float(d["Lx"]), Ly=float(d["Ly"]), nx=int(d["nx"]), ny=int(d["ny"])
        )
    except MeshError as exc:
        raise ConfigError(f"invalid mesh: {exc}") from exc


def _case_from_dict(d: dict):
    if "id" in d:
        window = d.get("window")
        if window is not None:
            if len(window) != 2:
                raise ConfigError(f"case.window must be [t0, t1], got {window}")
            window = (float(window[0]), float(window[1]))
        return CaseSpec(
            case_id=int(d["id"]),
            b0=float(d.get("b0", 1.0)),
            speed=float(d.get("speed", 1.0)),
            window=window,
            support_radius=(
                None if d.get("support_radius") is None else float(d["support_radius"])
            ),
        )
    if "load" in d:
        ld = d["load"]
        elements = ld.get("elements")
        return LoadSpec(
            kind=_require(ld, "kind", "case.load."),
            direction=tuple(float(v) for v in _require(ld, "direction", "case.load.")),
            b0=float(_require(ld, "b0", "case.load.")),
            window=tuple(float(v) for v in _require(ld, "window", "case.load.")),
            elements=None if elements is None else tuple(int(e) for e in elements),
            support_radius=(
                None if ld.get("support_radius") is None else float(ld["support_radius"])
            ),
        )
    if "strike" in d:
        st = d["strike"]
        return StrikeSpec(
            node=int(_require(st, "node", "case.strike.")),
            speed=float(_require(st, "speed", "case.strike.")),
            angle_to_normal=float(st.get("angle_to_normal", 0.0)),
        )
    raise ConfigError("case needs one of: id, load, strike")


def scenario_from_dict(d: dict, extra_keys=frozenset()) -> ScenarioConfig:
    """Parse a scenario config dict (the content of a run JSON file).

    Unknown keys are rejected unless they start with an underscore
    (reserved for user notes) or appear in `extra_keys`.
    """
    known = {
        "mesh", "material", "case", "border", "T", "tau", "output",
        "initial_translation",
    } | set(extra_keys)
    for key in d:
        if key not in known and not key.startswith("_"):
            raise ConfigError(f"unknown config key: {key}")

    output = d.get("output", {})
    every = int(output.get("every_n_steps", 1))
    out_dir = output.get("directory")
    translation = d.get("initial_translation")
    if translation is not None:
        translation = tuple(float(v) for v in translation)
        if len(translation) != 3:
            raise ConfigError("initial_translation must have three components")
    tau = d.get("tau")
    return ScenarioConfig(
        mesh=_mesh_from_dict(_require(d, "mesh", "")),
        material=params_from_config(_require(d, "material", "")),
        case=_case_from_dict(_require(d, "case", "")),
        border=str(_require(d, "border", "")),
        t_final=float(_require(d, "T", "")),
        tau=None if tau is None else float(tau),
        every_n_steps=every,
        out_dir=None if out_dir is None else str(out_dir),
        initial_translation=translation,
    )


def config_from_json(source) -> ScenarioConfig:
    """Load a ScenarioConfig from a JSON file path or a parsed dict."""
    if isinstance(source, dict):
        return scenario_from_dict(source)
    try:
        with open(source, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {source}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(data).__name__}")
    return scenario_from_dict(data)
