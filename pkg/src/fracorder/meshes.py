"""Interval and triangle meshes with tagged boundary nodes.

Boundary markers: 1 = generic outer boundary, 2 = obstacle (hole) boundary,
3/4 = left/right, 5/6 = bottom/top outer segments.  Every marker except 2
counts as part of the outer boundary.  The ASCII mesh format is

    dim n_nodes n_elements n_boundary
    id x [y]          (one line per node)
    id n1 n2 [n3]     (one line per element)
    node_id marker    (one line per boundary node)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Mesh", "MeshFormatError", "OUTER", "OBSTACLE", "LEFT", "RIGHT",
           "BOTTOM", "TOP", "make_interval_mesh", "make_square_mesh",
           "load_mesh", "save_mesh"]

OUTER = 1
OBSTACLE = 2
LEFT = 3
RIGHT = 4
BOTTOM = 5
TOP = 6


class MeshFormatError(ValueError):
    """Raised on malformed mesh files, with the offending line number."""


@dataclass(frozen=True)
class Mesh:
    """Conforming simplicial mesh in one or two dimensions.

    Attributes
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    nodes : numpy.ndarray
        Coordinates, shape (n_nodes, dim).
    elements : numpy.ndarray
        Node indices per element, shape (n_elements, dim + 1); triangles are
        stored counterclockwise.
    boundary_nodes : numpy.ndarray
        Indices of boundary nodes.
    boundary_markers : numpy.ndarray
        Marker per boundary node, parallel to boundary_nodes.
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray
    boundary_markers: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        for name in ("nodes", "elements", "boundary_nodes", "boundary_markers"):
            arr = getattr(self, name)
            arr.flags.writeable = False
        if len(self.boundary_nodes) != len(set(self.boundary_nodes.tolist())):
            raise ValueError("duplicate boundary node entries")
        _validate_elements(self)

    def marker_of(self, node: int) -> int:
        """Return the boundary marker of a node, or 0 if interior."""
        hits = np.nonzero(self.boundary_nodes == node)[0]
        return int(self.boundary_markers[hits[0]]) if len(hits) else 0


def _validate_elements(mesh: Mesh) -> None:
    elems = mesh.elements
    if elems.min(initial=0) < 0 or elems.max(initial=-1) >= len(mesh.nodes):
        raise ValueError("element refers to a node outside the mesh")
    for row in elems:
        if len(set(row.tolist())) != len(row):
            raise ValueError(f"degenerate element with repeated node: {row}")
    if mesh.dim == 1:
        lengths = np.diff(mesh.nodes[elems, 0], axis=1).ravel()
        if np.any(np.abs(lengths) <= 0.0):
            raise ValueError("zero-length interval element")
    else:
        if np.any(_triangle_areas(mesh.nodes, elems) <= 0.0):
            raise ValueError("non-positive triangle area (degenerate or clockwise)")


def _triangle_areas(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    p = nodes[elements]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _orient_ccw(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    areas = _triangle_areas(nodes, elements)
    flipped = elements.copy()
    neg = areas < 0.0
    flipped[neg, 1], flipped[neg, 2] = elements[neg, 2], elements[neg, 1]
    return flipped


def make_interval_mesh(n_cells: int) -> Mesh:
    """Uniform mesh of the unit interval.

    Parameters
    ----------
    n_cells : int
        Number of elements, at least 2.

    Returns
    -------
    Mesh
        1D mesh with endpoints marked LEFT and RIGHT.
    """
    if n_cells < 2:
        raise ValueError("need at least 2 cells")
    nodes = np.linspace(0.0, 1.0, n_cells + 1)[:, None]
    elements = np.column_stack([np.arange(n_cells), np.arange(1, n_cells + 1)])
    return Mesh(
        dim=1,
        nodes=nodes,
        elements=elements.astype(np.int64),
        boundary_nodes=np.array([0, n_cells], dtype=np.int64),
        boundary_markers=np.array([LEFT, RIGHT], dtype=np.int64),
    )


def make_square_mesh(n_per_side: int) -> Mesh:
    """Structured triangulation of the unit square.

    Each grid cell is split along its up-right diagonal.  Boundary nodes get
    side markers; the four corners count toward BOTTOM or TOP.

    Parameters
    ----------
    n_per_side : int
        Cells per side, at least 2.

    Returns
    -------
    Mesh
        2D mesh with (n_per_side + 1)**2 nodes and 2*n_per_side**2 triangles.
    """
    if n_per_side < 2:
        raise ValueError("need at least 2 cells per side")
    n = n_per_side
    side = np.linspace(0.0, 1.0, n + 1)
    xg, yg = np.meshgrid(side, side, indexing="xy")
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    def idx(i, j):  # column i, row j
        return j * (n + 1) + i

    elements = []
    for j in range(n):
        for i in range(n):
            a, b = idx(i, j), idx(i + 1, j)
            c, d = idx(i + 1, j + 1), idx(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    elements = np.array(elements, dtype=np.int64)

    markers = {}
    for i in range(n + 1):
        markers[idx(0, i)] = LEFT
        markers[idx(n, i)] = RIGHT
    for i in range(n + 1):  # corners end up bottom/top
        markers[idx(i, 0)] = BOTTOM
        markers[idx(i, n)] = TOP
    boundary = np.array(sorted(markers), dtype=np.int64)
    return Mesh(
        dim=2,
        nodes=nodes,
        elements=elements,
        boundary_nodes=boundary,
        boundary_markers=np.array([markers[b] for b in boundary], dtype=np.int64),
    )


def load_mesh(path) -> Mesh:
    """Read a mesh from the ASCII format described in the module docstring.

    Parameters
    ----------
    path : str or pathlib.Path
        Mesh file.

    Returns
    -------
    Mesh
        Parsed and validated mesh; triangles are reoriented counterclockwise.

    Raises
    ------
    MeshFormatError
        On malformed content (citing the 1-based line number), degenerate
        elements, or inconsistent indices.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    rows = [(k + 1, ln.split()) for k, ln in enumerate(lines)
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise MeshFormatError(f"{path}: empty mesh file")

    def parse(lineno, fields, types, what):
        if len(fields) != len(types):
            raise MeshFormatError(
                f"{path}:{lineno}: expected {len(types)} fields for {what}, "
                f"got {len(fields)}"
            )
        try:
            return [t(f) for t, f in zip(types, fields)]
        except ValueError:
            raise MeshFormatError(f"{path}:{lineno}: cannot parse {what}") from None

    lineno, fields = rows[0]
    dim, n_nodes, n_elems, n_bnd = parse(lineno, fields, [int] * 4, "header")
    if dim not in (1, 2):
        raise MeshFormatError(f"{path}:{lineno}: dim must be 1 or 2")
    expected = 1 + n_nodes + n_elems + n_bnd
    if len(rows) != expected:
        raise MeshFormatError(
            f"{path}: header promises {expected} lines, found {len(rows)}"
        )

    nodes = np.empty((n_nodes, dim))
    for k in range(n_nodes):
        lineno, fields = rows[1 + k]
        vals = parse(lineno, fields, [int] + [float] * dim, "node")
        if vals[0] != k:
            raise MeshFormatError(f"{path}:{lineno}: node ids must run 0..n-1 in order")
        nodes[k] = vals[1:]

    elements = np.empty((n_elems, dim + 1), dtype=np.int64)
    for k in range(n_elems):
        lineno, fields = rows[1 + n_nodes + k]
        vals = parse(lineno, fields, [int] * (dim + 2), "element")
        if vals[0] != k:
            raise MeshFormatError(f"{path}:{lineno}: element ids must run 0..n-1 in order")
        elements[k] = vals[1:]

    bnodes = np.empty(n_bnd, dtype=np.int64)
    bmark = np.empty(n_bnd, dtype=np.int64)
    for k in range(n_bnd):
        lineno, fields = rows[1 + n_nodes + n_elems + k]
        vals = parse(lineno, fields, [int, int], "boundary node")
        bnodes[k], bmark[k] = vals

    if dim == 2:
        elements = _orient_ccw(nodes, elements)
    try:
        return Mesh(dim=dim, nodes=nodes, elements=elements,
                    boundary_nodes=bnodes, boundary_markers=bmark)
    except ValueError as err:
        raise MeshFormatError(f"{path}: {err}") from None


def save_mesh(mesh: Mesh, path) -> None:
    """Write a mesh in the ASCII format read by load_mesh.

    Parameters
    ----------
    mesh : Mesh
        Mesh to store.
    path : str or pathlib.Path
        Destination file.
    """
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {len(mesh.nodes)} {len(mesh.elements)} "
                 f"{len(mesh.boundary_nodes)}\n")
        for k, xy in enumerate(mesh.nodes):
            coords = " ".join("%.17g" % c for c in xy)
            fh.write(f"{k} {coords}\n")
        for k, el in enumerate(mesh.elements):
            fh.write(f"{k} " + " ".join(str(i) for i in el) + "\n")
        for node, marker in zip(mesh.boundary_nodes, mesh.boundary_markers):
            fh.write(f"{node} {marker}\n")
