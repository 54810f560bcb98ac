"""Triangulated rectangular membranes and mesh utilities.

The reference (undeformed) configuration lives in the x0-y0 plane.  A
mesh is a flat array of node coordinates plus integer triangles; all
structured grids split every rectangle along the same diagonal, from
the lower-left corner to the upper-right one, so a refined grid
reproduces the coarse nodes bitwise and mirror symmetry about that
diagonal is exact.

Node ids on a structured grid are row-major: id(i, j) = j*(nx+1) + i.
Rectangle (i, j) owns triangles 2*(j*nx + i) (below the diagonal) and
2*(j*nx + i) + 1 (above it), both counter-clockwise.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import MeshError

__all__ = [
    "StructuredSpec",
    "Mesh",
    "generate_structured",
    "refine",
    "read_msh",
    "nearest_node",
    "central_element_pair",
    "boundary_nodes",
]


@dataclass(frozen=True)
class StructuredSpec:
    """Recipe for a structured triangulation of a rectangle.

    Parameters
    ----------
    Lx, Ly : float
        Side lengths of the rectangle, must be positive.
    nx, ny : int
        Number of rectangular cells along each side, at least 1.  Each
        cell is split into two triangles along its lower-left to
        upper-right diagonal (fixed orientation for the whole grid).
    """

    Lx: float
    Ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.Lx > 0.0 and self.Ly > 0.0):
            raise MeshError(f"side lengths must be positive, got {self.Lx} x {self.Ly}")
        if self.nx < 1 or self.ny < 1:
            raise MeshError(f"cell counts must be >= 1, got {self.nx} x {self.ny}")

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_triangles(self) -> int:
        return 2 * self.nx * self.ny

    def node_id(self, i: int, j: int) -> int:
        """Node id of grid vertex (i, j), 0 <= i <= nx, 0 <= j <= ny."""
        return j * (self.nx + 1) + i

    def rect_triangles(self, i: int, j: int) -> tuple[int, int]:
        """Triangle ids (below-diagonal, above-diagonal) of cell (i, j)."""
        r = j * self.nx + i
        return 2 * r, 2 * r + 1


@dataclass
class Mesh:
    """Triangle mesh of the reference plane.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, 2)
        Reference coordinates (x0, y0) per node.
    triangles : ndarray, shape (n_triangles, 3)
        Counter-clockwise vertex ids per triangle.
    structure : StructuredSpec or None
        Present when the mesh came from `generate_structured`; required
        by operations that need grid metadata (central element pair,
        refinement studies).
    """

    nodes: np.ndarray
    triangles: np.ndarray
    structure: StructuredSpec | None = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_coords(self, ids=None) -> np.ndarray:
        """Vertex coordinates, shape (n, 3, 2), for `ids` (default all)."""
        tri = self.triangles if ids is None else self.triangles[ids]
        return self.nodes[tri]

    def signed_doubled_areas(self) -> np.ndarray:
        """Per-triangle doubled signed area (positive for CCW)."""
        p = self.triangle_coords()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]

    def areas(self) -> np.ndarray:
        return 0.5 * self.signed_doubled_areas()

    def centroids(self) -> np.ndarray:
        return self.triangle_coords().mean(axis=1)

    def edges(self) -> np.ndarray:
        """All triangle edges as sorted node-id pairs, shape (3*n_tri, 2)."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.sort(e, axis=1)

    def min_edge_length(self) -> float:
        e = self.edges()
        d = self.nodes[e[:, 0]] - self.nodes[e[:, 1]]
        return float(np.sqrt((d * d).sum(axis=1).min()))

    def extent(self) -> tuple[float, float, float, float]:
        """Bounding box (xmin, xmax, ymin, ymax)."""
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])

    def validate(self) -> None:
        """Check structural invariants, raising MeshError on violation.

        Verified: vertex ids in range and distinct per triangle, strictly
        positive triangle areas (CCW, non-degenerate), no duplicate
        triangles, and edge-connectivity of the whole node set.
        """
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise MeshError(f"nodes must be (n, 2), got {self.nodes.shape}")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError(f"triangles must be (m, 3), got {self.triangles.shape}")
        if self.n_triangles == 0:
            raise MeshError("mesh has no triangles")
        t = self.triangles
        if t.min() < 0 or t.max() >= self.n_nodes:
            raise MeshError("triangle vertex id out of range")
        if (
            (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        ).any():
            raise MeshError("triangle with repeated vertex ids")
        s2 = self.signed_doubled_areas()
        # scale-aware degeneracy cutoff: doubled area of a healthy triangle
        # is O(edge^2); anything at roundoff level counts as degenerate
        e = self.edges()
        d = self.nodes[e[:, 0]] - self.nodes[e[:, 1]]
        max_edge_sq = float((d * d).sum(axis=1).max())
        bad = np.nonzero(s2 <= 1e-14 * max_edge_sq)[0]
        if bad.size:
            raise MeshError(
                f"triangle {int(bad[0])} degenerate or clockwise "
                f"(doubled signed area {s2[bad[0]]:.3e})"
            )
        key = np.sort(t, axis=1)
        if np.unique(key, axis=0).shape[0] != self.n_triangles:
            raise MeshError("duplicate triangles")
        # edge-connectivity over the node graph; also catches orphan nodes
        ue = np.unique(self.edges(), axis=0)
        n = self.n_nodes
        adj = coo_matrix(
            (np.ones(ue.shape[0]), (ue[:, 0], ue[:, 1])), shape=(n, n)
        )
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise MeshError(f"mesh is not edge-connected ({ncomp} components)")


def generate_structured(spec: StructuredSpec) -> Mesh:
    """Triangulate a rectangle per `spec`.

    Every cell is split along its lower-left to upper-right diagonal.
    Node coordinates are computed as (i*Lx)/nx so that a doubled grid
    reproduces the coarse nodes bitwise (refinement subset property).
    """
    nx, ny = spec.nx, spec.ny
    xs = np.arange(nx + 1, dtype=float) * spec.Lx / nx
    ys = np.arange(ny + 1, dtype=float) * spec.Ly / ny
    gx, gy = np.meshgrid(xs, ys)  # row-major: node id = j*(nx+1) + i
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i = i.ravel()
    j = j.ravel()
    ll = j * (nx + 1) + i
    lr = ll + 1
    ul = ll + (nx + 1)
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])  # below the diagonal
    upper = np.column_stack([ll, ur, ul])  # above the diagonal
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    mesh = Mesh(nodes=nodes, triangles=triangles, structure=spec)
    mesh.validate()
    return mesh


def refine(spec: StructuredSpec) -> StructuredSpec:
    """One refinement level: split every rectangle into four."""
    return StructuredSpec(spec.Lx, spec.Ly, 2 * spec.nx, 2 * spec.ny)


def nearest_node(mesh: Mesh, point) -> int:
    """Id of the node closest to `point`; ties go to the smallest id."""
    p = np.asarray(point, dtype=float)
    d = mesh.nodes - p
    return int(np.argmin((d * d).sum(axis=1)))


def central_element_pair(mesh: Mesh) -> tuple[int, int]:
    """The two triangles of the grid cell at index (nx//2, ny//2).

    This is the cell containing the domain center; on even grids, where
    the center is itself a node, the cell touching it from the upper
    right is picked.  Both choices keep the pair symmetric about the
    split diagonal.  Requires structured metadata.
    """
    if mesh.structure is None:
        raise MeshError("central element pair requires structured metadata")
    s = mesh.structure
    return s.rect_triangles(s.nx // 2, s.ny // 2)


def boundary_nodes(mesh: Mesh) -> np.ndarray:
    """Sorted ids of nodes lying on edges owned by exactly one triangle."""
    e = mesh.edges()
    ue, counts = np.unique(e, axis=0, return_counts=True)
    return np.unique(ue[counts == 1])


def _tokens(line: str):
    return line.split()


def read_msh(source) -> Mesh:
    """Read a planar triangle mesh from MSH version 2.2 ASCII text.

    Parameters
    ----------
    source : str, os.PathLike, or text file object
        Path to a .msh file, or an open text stream.

    Only the $MeshFormat, $Nodes and $Elements sections are consumed.
    Triangles (element type 2) are imported; line (1) and point (15)
    elements are skipped; any other type is rejected.  Node ids are
    remapped to dense 0-based ids in file order.  Nodes must be planar:
    |z| < 1e-9 times the larger in-plane extent.  Triangles arriving
    clockwise are reordered counter-clockwise.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as f:
            return read_msh(f)
    if isinstance(source, bytes):
        return read_msh(io.StringIO(source.decode("utf-8")))

    lines = source.read().splitlines()
    pos = 0

    def fail(msg, lineno):
        raise MeshError(f"MSH parse error at line {lineno + 1}: {msg}")

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise MeshError("MSH parse error: unexpected end of file")
        ln = lines[pos]
        pos += 1
        return ln.strip(), pos - 1

    raw_ids: list[int] = []
    coords: list[tuple[float, float, float]] = []
    tris_raw: list[tuple[int, int, int]] = []
    seen_nodes = seen_elements = False

    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        header, hline = next_line()
        if not header.startswith("$"):
            fail(f"expected section header, got {header!r}", hline)
        name = header[1:]
        if name == "MeshFormat":
            fmt, fline = next_line()
            parts = _tokens(fmt)
            if len(parts) != 3:
                fail("malformed $MeshFormat line", fline)
            if parts[0] != "2.2":
                fail(f"unsupported MSH version {parts[0]} (need 2.2)", fline)
            if parts[1] != "0":
                fail("binary MSH files are not supported", fline)
            end, eline = next_line()
            if end != "$EndMeshFormat":
                fail("missing $EndMeshFormat", eline)
        elif name == "Nodes":
            cnt_line, cline = next_line()
            try:
                count = int(cnt_line)
            except ValueError:
                fail(f"bad node count {cnt_line!r}", cline)
            for _ in range(count):
                ln, lno = next_line()
                parts = _tokens(ln)
                if len(parts) != 4:
                    fail(f"bad node line {ln!r}", lno)
                try:
                    nid = int(parts[0])
                    x, y, z = (float(v) for v in parts[1:])
                except ValueError:
                    fail(f"bad node line {ln!r}", lno)
                raw_ids.append(nid)
                coords.append((x, y, z))
            end, eline = next_line()
            if end != "$EndNodes":
                fail("missing $EndNodes", eline)
            seen_nodes = True
        elif name == "Elements":
            cnt_line, cline = next_line()
            try:
                count = int(cnt_line)
            except ValueError:
                fail(f"bad element count {cnt_line!r}", cline)
            for _ in range(count):
                ln, lno = next_line()
                parts = _tokens(ln)
                if len(parts) < 3:
                    fail(f"bad element line {ln!r}", lno)
                try:
                    etype = int(parts[1])
                    ntags = int(parts[2])
                    rest = [int(v) for v in parts[3 + ntags:]]
                except ValueError:
                    fail(f"bad element line {ln!r}", lno)
                if etype == 2:
                    if len(rest) != 3:
                        fail(f"triangle needs 3 vertex ids, got {rest}", lno)
                    tris_raw.append(tuple(rest))
                elif etype in (1, 15):
                    continue  # boundary lines and points carry no area
                else:
                    fail(f"unsupported element type {etype}", lno)
            end, eline = next_line()
            if end != "$EndElements":
                fail("missing $EndElements", eline)
            seen_elements = True
        else:
            # unknown sections ($PhysicalNames etc.) are skipped verbatim
            endtag = "$End" + name
            while True:
                ln, _ = next_line()
                if ln == endtag:
                    break

    if not seen_nodes or not seen_elements:
        raise MeshError("MSH parse error: missing $Nodes or $Elements section")
    if not coords:
        raise MeshError("MSH file has no nodes")

    arr = np.asarray(coords, dtype=float)
    ext = max(arr[:, 0].max() - arr[:, 0].min(), arr[:, 1].max() - arr[:, 1].min())
    scale = ext if ext > 0 else 1.0
    zmax = float(np.abs(arr[:, 2]).max())
    if zmax >= 1e-9 * scale:
        raise MeshError(
            f"mesh is not planar: |z| up to {zmax:.3e} (limit {1e-9 * scale:.3e})"
        )

    idmap = {}
    for k, nid in enumerate(raw_ids):
        if nid in idmap:
            raise MeshError(f"duplicate node id {nid}")
        idmap[nid] = k
    try:
        tris = np.asarray(
            [[idmap[a], idmap[b], idmap[c]] for a, b, c in tris_raw], dtype=np.int64
        )
    except KeyError as exc:
        raise MeshError(f"triangle references unknown node id {exc.args[0]}") from exc
    if tris.size == 0:
        raise MeshError("MSH file has no triangles")

    mesh = Mesh(nodes=arr[:, :2].copy(), triangles=tris, structure=None)
    # normalize orientation before validating: flip clockwise triangles
    s2 = mesh.signed_doubled_areas()
    flip = s2 < 0
    if flip.any():
        mesh.triangles[flip] = mesh.triangles[flip][:, [0, 2, 1]]
    mesh.validate()
    return mesh
