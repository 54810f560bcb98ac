"""Implicit Newmark time integration.

The semi-discrete equation of motion is M a'' + K a + f = 0.  One step
of size tau with parameters (beta1, beta2) reads

    v_bar   = a'_n + tau*(1 - beta1)*a''_n
    a_bar   = a_n + tau*a'_n + 0.5*tau^2*(1 - beta2)*a''_n
    a''_n+1 = -A^-1 (f_n+1 + K a_bar),   A = M + 0.5*tau^2*beta2*K
    a'_n+1  = v_bar + beta1*tau*a''_n+1
    a_n+1   = a_bar + 0.5*tau^2*beta2*a''_n+1

so the balance M a'' + K a + f = 0 holds exactly at t_n+1.  The scheme
is unconditionally stable for beta2 >= beta1 >= 1/2 and second-order
accurate for beta1 = 1/2; both defaults are 1/2.  A is constant while
M, K, and tau are, so it is factorized once and reused every step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .errors import SolverError
from .assembly import GlobalSystem
from .material import MaterialParams, max_wave_speed
from .mesh import Mesh

__all__ = [
    "NewmarkParams",
    "State",
    "NewmarkFactor",
    "default_timestep",
    "init_state",
    "factor_once",
    "step",
    "energy",
]


@dataclass(frozen=True)
class NewmarkParams:
    """Timestep and the two Newmark parameters."""

    tau: float
    beta1: float = 0.5
    beta2: float = 0.5

    def __post_init__(self):
        if not self.tau > 0.0:
            raise SolverError(f"timestep must be positive, got {self.tau}")

    @property
    def unconditionally_stable(self) -> bool:
        return self.beta2 >= self.beta1 >= 0.5


@dataclass
class State:
    """Displacement, velocity, and acceleration at one instant."""

    a: np.ndarray
    adot: np.ndarray
    addot: np.ndarray
    t: float
    step: int

    def copy(self) -> "State":
        return State(self.a.copy(), self.adot.copy(), self.addot.copy(), self.t, self.step)


@dataclass(frozen=True)
class NewmarkFactor:
    """LU factorization of A, pinned to the system and timestep it used."""

    lu: object
    tau: float
    beta2: float
    system: GlobalSystem


def default_timestep(mesh: Mesh, material: MaterialParams) -> float:
    """Shortest edge over ten times the fastest wave speed."""
    return mesh.min_edge_length() / (10.0 * max_wave_speed(material))


def init_state(system: GlobalSystem, a0=None, v0=None) -> State:
    """Initial state with accelerations solved from the balance at t=0.

    a''_0 solves M a''_0 = -(K a_0 + f) on the constrained system, so
    constrained rows start at zero acceleration; constrained velocity
    entries are overwritten with their v_fix regardless of v0.
    """
    if not system.constrained:
        raise SolverError("init_state needs a system with constraints applied")
    n = system.ndof
    a = np.zeros(n) if a0 is None else np.asarray(a0, dtype=float).copy()
    v = np.zeros(n) if v0 is None else np.asarray(v0, dtype=float).copy()
    if a.shape != (n,) or v.shape != (n,):
        raise SolverError(f"initial vectors must have shape ({n},)")
    for c in system.constraints:
        v[3 * c.node: 3 * c.node + 3] = c.v_fix
    try:
        lu = splu(system.M.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"mass matrix factorization failed: {exc}") from exc
    addot = lu.solve(-(system.K @ a + system.f))
    if system.constrained_dofs is not None and system.constrained_dofs.size:
        addot[system.constrained_dofs] = 0.0
    return State(a=a, adot=v, addot=addot, t=0.0, step=0)


def factor_once(system: GlobalSystem, params: NewmarkParams) -> NewmarkFactor:
    """Factorize A = M + 0.5*tau^2*beta2*K with a general sparse LU.

    Row replacement makes the constrained system nonsymmetric, so no
    symmetry is assumed.  The handle records the system and timestep;
    `step` refuses a stale handle.
    """
    a = (system.M + (0.5 * params.tau**2 * params.beta2) * system.K).tocsc()
    try:
        lu = splu(a)
    except RuntimeError as exc:
        raise SolverError(f"factorization of A failed (singular?): {exc}") from exc
    return NewmarkFactor(lu=lu, tau=params.tau, beta2=params.beta2, system=system)


def step(state: State, system: GlobalSystem, params: NewmarkParams, factor: NewmarkFactor) -> State:
    """Advance one Newmark step; system.f must hold the load at t_n+1.

    Constrained accelerations are pinned to exact zero after the solve,
    which keeps constrained velocities bitwise constant.  Time is
    computed as step*tau rather than accumulated, so snapshot times of
    a halved timestep line up bitwise with the coarser run.
    """
    if factor.system is not system or factor.tau != params.tau or factor.beta2 != params.beta2:
        raise SolverError("stale factorization: system or timestep changed")
    tau = params.tau
    v_bar = state.adot + tau * (1.0 - params.beta1) * state.addot
    a_bar = state.a + tau * state.adot + 0.5 * tau**2 * (1.0 - params.beta2) * state.addot
    addot = factor.lu.solve(-(system.f + system.K @ a_bar))
    if not np.all(np.isfinite(addot)):
        raise SolverError(f"non-finite acceleration at step {state.step + 1}")
    if system.constrained_dofs is not None and system.constrained_dofs.size:
        addot[system.constrained_dofs] = 0.0
    adot = v_bar + params.beta1 * tau * addot
    a = a_bar + 0.5 * tau**2 * params.beta2 * addot
    n = state.step + 1
    return State(a=a, adot=adot, addot=addot, t=n * tau, step=n)


def energy(state: State, k_raw, m_raw) -> tuple[float, float]:
    """Kinetic and strain energy against the unconstrained matrices.

    Returns (0.5*a'^T M a', 0.5*a^T K a).  Use the matrices from before
    `apply_constraints`: the replaced rows have no energy meaning.
    """
    kinetic = 0.5 * float(state.adot @ (m_raw @ state.adot))
    strain = 0.5 * float(state.a @ (k_raw @ state.a))
    return kinetic, strain
