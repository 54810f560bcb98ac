"""Global system assembly and kinematic constraints.

Node i owns degrees of freedom (3i, 3i+1, 3i+2) = (u_i, v_i, w_i).
Element matrices are computed for all triangles at once and scattered
through one COO accumulation; duplicate entries are summed when
converting to CSR, which is deterministic.

Constraints fix the velocity of whole nodes (all three components) by
row replacement: the K block-row is zeroed, the M block-row is zeroed
except for an identity at the diagonal block, and the load entries are
zeroed.  The constrained rows then read a''_i = 0, so the velocity
stays at its initial value exactly and the displacement integrates it.
Columns are left untouched, so the constrained system is not symmetric
and is solved with a general sparse LU.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .errors import AssemblyError, ConfigError
from .material import MaterialParams
from .mesh import Mesh

__all__ = [
    "Constraint",
    "CompiledLoad",
    "GlobalSystem",
    "element_dof_ids",
    "assemble",
    "build_load_vector",
    "apply_constraints",
    "update_load",
]

_MASS_PATTERN9 = np.kron(
    np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]), np.eye(3)
)


@dataclass(frozen=True)
class Constraint:
    """Velocity constraint on one node: all components held at v_fix."""

    node: int
    v_fix: tuple[float, float, float]


@dataclass(frozen=True)
class CompiledLoad:
    """Assembled load vector active on a closed time window.

    The window test carries a 1e-9 relative tolerance: step times are
    computed as step*tau, so an edge meant to coincide with a step can
    land an ulp away, and refinement studies need every level to
    include exactly the same physical window.
    """

    vector: np.ndarray
    t_start: float
    t_end: float

    def active(self, t: float) -> bool:
        tol = 1e-9 * max(abs(self.t_start), abs(self.t_end))
        return self.t_start - tol <= t <= self.t_end + tol


@dataclass
class GlobalSystem:
    """Assembled matrices and load of one discretized membrane.

    K and M are CSR of order 3*n_nodes; f is the current load vector.
    `constraints` lists the velocity constraints; after
    `apply_constraints` the flag `constrained` is set and
    `constrained_dofs` holds the affected row indices.
    """

    K: csr_matrix
    M: csr_matrix
    f: np.ndarray
    mesh: Mesh
    material: MaterialParams
    constraints: list[Constraint] = field(default_factory=list)
    constrained: bool = False
    constrained_dofs: np.ndarray | None = None

    @property
    def ndof(self) -> int:
        return 3 * self.mesh.n_nodes


def element_dof_ids(triangles: np.ndarray) -> np.ndarray:
    """Global dof ids per element, shape (m, 9), vertex-major order."""
    tri = np.asarray(triangles)
    reps = tri[:, [0, 0, 0, 1, 1, 1, 2, 2, 2]]
    return 3 * reps + np.tile(np.arange(3), 3)[None, :]


def _batch_element_matrices(mesh: Mesh, material: MaterialParams):
    """Stiffness and mass blocks for every triangle, shapes (m, 9, 9)."""
    p = mesh.triangle_coords()
    x, y = p[:, :, 0], p[:, :, 1]
    jj = [1, 2, 0]
    kk = [2, 0, 1]
    se = (
        x[:, 0] * (y[:, 1] - y[:, 2])
        + x[:, 1] * (y[:, 2] - y[:, 0])
        + x[:, 2] * (y[:, 0] - y[:, 1])
    )
    if np.any(se <= 0.0):
        bad = int(np.argmax(se <= 0.0))
        raise AssemblyError(f"triangle {bad} degenerate or clockwise during assembly")
    beta = (y[:, jj] - y[:, kk]) / se[:, None]
    gamma = (x[:, kk] - x[:, jj]) / se[:, None]

    m = mesh.n_triangles
    b = np.zeros((m, 6, 9))
    for i in range(3):
        c = 3 * i
        b[:, 0, c] = beta[:, i]
        b[:, 1, c + 1] = gamma[:, i]
        b[:, 3, c] = gamma[:, i]
        b[:, 3, c + 1] = beta[:, i]
        b[:, 4, c + 2] = gamma[:, i]
        b[:, 5, c + 2] = beta[:, i]

    area = 0.5 * se
    ke = np.einsum("eji,jk,ekl->eil", b, material.d, b, optimize=True)
    ke *= (material.h * area)[:, None, None]
    me = _MASS_PATTERN9[None, :, :] * (material.rho * material.h * area / 12.0)[
        :, None, None
    ]
    return ke, me, area


def assemble(mesh: Mesh, material: MaterialParams, loads=()) -> GlobalSystem:
    """Assemble the global stiffness, mass, and load of a mesh.

    Parameters
    ----------
    mesh : Mesh
    material : MaterialParams
    loads : sequence of (element_ids, b_vector) pairs
        Optional uniform volumetric loads to bake into the initial f.

    Both matrices are returned as CSR; K is symmetric positive
    semidefinite, M symmetric positive definite.
    """
    ke, me, _ = _batch_element_matrices(mesh, material)
    ed = element_dof_ids(mesh.triangles)
    rows = np.broadcast_to(ed[:, :, None], ke.shape).ravel()
    cols = np.broadcast_to(ed[:, None, :], ke.shape).ravel()
    n = 3 * mesh.n_nodes
    k = coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    m = coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    f = np.zeros(n)
    for element_ids, b_vec in loads:
        f += build_load_vector(mesh, material, element_ids, b_vec)
    return GlobalSystem(K=k, M=m, f=f, mesh=mesh, material=material)


def build_load_vector(mesh: Mesh, material: MaterialParams, element_ids, b_vectors) -> np.ndarray:
    """Assembled load vector for uniform loads on selected elements.

    Parameters
    ----------
    element_ids : array_like of int
        Loaded triangles.
    b_vectors : array_like, shape (3,) or (len(element_ids), 3)
        Volumetric load per element (one shared vector or one per id).

    Each element contributes -(h*area/3)*(b, b, b) to its vertices.
    """
    ids = np.atleast_1d(np.asarray(element_ids, dtype=np.int64))
    if ids.size == 0:
        return np.zeros(3 * mesh.n_nodes)
    if ids.min() < 0 or ids.max() >= mesh.n_triangles:
        raise AssemblyError(f"load element id out of range: {ids.min()}..{ids.max()}")
    b = np.asarray(b_vectors, dtype=float)
    if b.shape == (3,):
        b = np.broadcast_to(b, (ids.size, 3))
    if b.shape != (ids.size, 3):
        raise AssemblyError(f"load vectors must be (3,) or (n, 3), got {b.shape}")
    area = mesh.areas()[ids]
    fe = -(material.h * area / 3.0)[:, None] * np.tile(b, (1, 3))
    f = np.zeros(3 * mesh.n_nodes)
    np.add.at(f, element_dof_ids(mesh.triangles[ids]).ravel(), fe.ravel())
    return f


def apply_constraints(system: GlobalSystem) -> GlobalSystem:
    """Replace constrained rows, returning a new system.

    For every constrained node the three K rows become zero, the three
    M rows become the identity block on the diagonal, and the matching
    f entries become zero, so the rows read a''_i = 0.  Unconstrained
    rows and all columns are bitwise untouched.  Applying twice or
    constraining a node twice is a configuration error.
    """
    if system.constrained:
        raise AssemblyError("constraints already applied to this system")
    nodes = [c.node for c in system.constraints]
    if len(set(nodes)) != len(nodes):
        dup = sorted({n for n in nodes if nodes.count(n) > 1})
        raise ConfigError(f"duplicate constraint on node(s) {dup}")
    n = system.ndof
    for c in system.constraints:
        if not 0 <= c.node < system.mesh.n_nodes:
            raise ConfigError(f"constraint node {c.node} out of range")

    cdofs = np.asarray(
        [3 * c.node + k for c in system.constraints for k in range(3)], dtype=np.int64
    )
    keep = np.ones(n)
    keep[cdofs] = 0.0
    p = coo_matrix((keep, (np.arange(n), np.arange(n))), shape=(n, n)).tocsr()
    k_c = p @ system.K
    m_c = p @ system.M
    if cdofs.size:
        ident = coo_matrix(
            (np.ones(cdofs.size), (cdofs, cdofs)), shape=(n, n)
        ).tocsr()
        m_c = m_c + ident
    f_c = system.f.copy()
    f_c[cdofs] = 0.0
    return GlobalSystem(
        K=k_c,
        M=m_c,
        f=f_c,
        mesh=system.mesh,
        material=system.material,
        constraints=list(system.constraints),
        constrained=True,
        constrained_dofs=cdofs,
    )


def update_load(system: GlobalSystem, t: float, loads) -> np.ndarray:
    """Rebuild system.f from the loads active at time t.

    `loads` is a sequence of CompiledLoad.  Constrained entries are
    re-zeroed so constraints survive load changes.  Returns the new f
    (also stored on the system).
    """
    f = np.zeros(system.ndof)
    for ld in loads:
        if ld.active(t):
            f = f + ld.vector
    if system.constrained and system.constrained_dofs is not None:
        f[system.constrained_dofs] = 0.0
    system.f = f
    return f
