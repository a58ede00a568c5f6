"""P1 finite elements for -div(a grad u) + q u with density-weighted mass.

Assembly uses 3-point Gauss quadrature per element (exact for the P1
products; variable coefficients are sampled at the quadrature points).
Dirichlet conditions are imposed strongly: every boundary node is a Dirichlet
DOF and the schemes evolve interior DOFs only.

The observation functional returns the plain normal derivative grad(u).nu at
the observation point, evaluated from the constant P1 gradient of the
adjacent element(s); for variable a it differs from the conormal derivative
by the known factor a(x0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .meshes import OBSTACLE, Mesh, _triangle_areas

__all__ = ["Coefficients", "FemSystem", "assemble", "elliptic_solve",
           "boundary_flux", "nodal_field"]

# 3-point Gauss-Legendre on [0,1]
_GL3_X = np.array([0.5 - np.sqrt(0.15), 0.5, 0.5 + np.sqrt(0.15)])
_GL3_W = np.array([5.0, 8.0, 5.0]) / 18.0
# edge-midpoint rule on the reference triangle, exact to degree 2
_TRI_Q = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
_TRI_W = np.full(3, 1.0 / 3.0)


@dataclass(frozen=True)
class Coefficients:
    """Operator data: diffusion a(x) > 0, potential q(x), density rho(x) > 0.

    Each field is a constant or a callable taking an (n, dim) array of points
    and returning n values.
    """

    a: object = 1.0
    q: object = 0.0
    rho: object = 1.0


def _sample(value, points: np.ndarray) -> np.ndarray:
    if callable(value):
        out = np.asarray(value(points), dtype=float)
        if out.shape != (len(points),):
            raise ValueError(
                f"coefficient callable returned shape {out.shape}, "
                f"expected ({len(points)},)"
            )
        return out
    return np.full(len(points), float(value))


def nodal_field(mesh: Mesh, value) -> np.ndarray:
    """Evaluate a constant or callable field at the mesh nodes.

    Parameters
    ----------
    mesh : Mesh
        Mesh providing the nodes.
    value : float or callable
        Constant, callable on an (n, dim) array, or an array of length n.

    Returns
    -------
    numpy.ndarray
        One value per node.
    """
    if isinstance(value, np.ndarray):
        if value.shape != (len(mesh.nodes),):
            raise ValueError(
                f"field array has shape {value.shape}, "
                f"expected ({len(mesh.nodes)},)"
            )
        return value.astype(float)
    return _sample(value, mesh.nodes)


@dataclass(frozen=True)
class FemSystem:
    """Assembled matrices and index partitions for one mesh and coefficient set.

    Attributes
    ----------
    mesh : Mesh
        Underlying mesh.
    mass : scipy.sparse.csr_matrix
        Plain mass matrix (rho = 1).
    mass_rho : scipy.sparse.csr_matrix
        Density-weighted mass matrix.
    stiffness : scipy.sparse.csr_matrix
        Stiffness matrix for a and q.
    interior_dofs : numpy.ndarray
        Indices of non-boundary nodes.
    dirichlet_dofs : numpy.ndarray
        Indices of boundary nodes (all of them; strong imposition).
    x0_index : int
        Node index of the observation point.
    flux_indices : numpy.ndarray
        Nodes entering the observation functional.
    flux_coeffs : numpy.ndarray
        Coefficients of the observation functional.
    normal : numpy.ndarray
        Outward unit normal used at x0.
    """

    mesh: Mesh
    mass: sp.csr_matrix
    mass_rho: sp.csr_matrix
    stiffness: sp.csr_matrix
    interior_dofs: np.ndarray
    dirichlet_dofs: np.ndarray
    x0_index: int
    flux_indices: np.ndarray
    flux_coeffs: np.ndarray
    normal: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def interior_factor(self):
        """LU factorization of the interior stiffness block, cached."""
        if "stiff_lu" not in self._cache:
            sii = self.stiffness[np.ix_(self.interior_dofs, self.interior_dofs)]
            self._cache["stiff_lu"] = spla.splu(sii.tocsc())
        return self._cache["stiff_lu"]


def _assemble_1d(mesh: Mesh, coeffs: Coefficients):
    x = mesh.nodes[:, 0]
    el = mesh.elements
    h = x[el[:, 1]] - x[el[:, 0]]  # (ne,)
    # quadrature points per element, shape (ne, 3)
    pts = x[el[:, 0]][:, None] + np.outer(h, _GL3_X)
    flat = pts.reshape(-1, 1)
    a_q = _sample(coeffs.a, flat).reshape(pts.shape)
    q_q = _sample(coeffs.q, flat).reshape(pts.shape)
    r_q = _sample(coeffs.rho, flat).reshape(pts.shape)
    _check_bounds(a_q, r_q)

    phi = np.stack([1.0 - _GL3_X, _GL3_X])          # (2, 3)
    phi_ij = np.einsum("iq,jq->qij", phi, phi)      # (3, 2, 2)
    w = _GL3_W

    def local_mass(dens):
        return np.einsum("q,eq,qij->eij", w, dens, phi_ij) * h[:, None, None]

    m_loc = local_mass(np.ones_like(r_q))
    mr_loc = local_mass(r_q)
    grad = np.array([-1.0, 1.0])
    kin = np.einsum("q,eq->e", w, a_q) / h          # int a * (1/h^2) * h
    s_loc = kin[:, None, None] * np.outer(grad, grad)
    s_loc += local_mass(q_q)
    return el, m_loc, mr_loc, s_loc


def _assemble_2d(mesh: Mesh, coeffs: Coefficients):
    el = mesh.elements
    p = mesh.nodes[el]                               # (ne, 3, 2)
    area = _triangle_areas(mesh.nodes, el)           # (ne,)
    # quadrature points: lam @ vertices, shape (ne, 3, 2)
    lam = np.column_stack([1.0 - _TRI_Q.sum(axis=1), _TRI_Q])   # (3q, 3v)
    pts = np.einsum("qv,evd->eqd", lam, p)
    flat = pts.reshape(-1, 2)
    a_q = _sample(coeffs.a, flat).reshape(len(el), 3)
    q_q = _sample(coeffs.q, flat).reshape(len(el), 3)
    r_q = _sample(coeffs.rho, flat).reshape(len(el), 3)
    _check_bounds(a_q, r_q)

    phi_ij = np.einsum("qi,qj->qij", lam, lam)       # (3, 3, 3)

    def local_mass(dens):
        return np.einsum("q,eq,qij->eij", _TRI_W, dens, phi_ij) * area[:, None, None]

    m_loc = local_mass(np.ones_like(r_q))
    mr_loc = local_mass(r_q)
    grads = _p1_gradients(p, area)                   # (ne, 3, 2)
    a_int = np.einsum("q,eq->e", _TRI_W, a_q) * area
    s_loc = a_int[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)
    s_loc += local_mass(q_q)
    return el, m_loc, mr_loc, s_loc


def _p1_gradients(p: np.ndarray, area: np.ndarray) -> np.ndarray:
    # grad(lambda_i) = rot90(p_{i+1} - p_{i+2}) / (2 area), rot90: (x,y)->(y,-x)
    g = np.empty_like(p)
    for i in range(3):
        d = p[:, (i + 1) % 3] - p[:, (i + 2) % 3]
        g[:, i, 0] = d[:, 1]
        g[:, i, 1] = -d[:, 0]
    return g / (2.0 * area)[:, None, None]


def _check_bounds(a_q: np.ndarray, r_q: np.ndarray) -> None:
    if np.min(a_q) <= 0.0:
        raise ValueError(f"diffusion coefficient not positive (min {np.min(a_q)})")
    if np.min(r_q) <= 0.0:
        raise ValueError(f"density not positive (min {np.min(r_q)})")


def _scatter(el: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    k = el.shape[1]
    rows = np.repeat(el, k, axis=1).ravel()
    cols = np.tile(el, (1, k)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh: Mesh, coeffs: Coefficients, x0) -> FemSystem:
    """Assemble mass, weighted mass, and stiffness matrices plus observation.

    Parameters
    ----------
    mesh : Mesh
        Interval or triangle mesh.
    coeffs : Coefficients
        Operator data; a and rho are checked for positivity at the
        quadrature points.
    x0 : sequence of float
        Observation point; must coincide with an outer-boundary node.

    Returns
    -------
    FemSystem
        Immutable assembled system.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (mesh.dim,):
        raise ValueError(f"x0 must have {mesh.dim} coordinates")
    dist = np.linalg.norm(mesh.nodes - x0[None, :], axis=1)
    x0_index = int(np.argmin(dist))
    if dist[x0_index] > 1e-9:
        raise ValueError(f"x0 {x0.tolist()} is not a mesh node")
    marker = mesh.marker_of(x0_index)
    if marker == 0 or marker == OBSTACLE:
        raise ValueError("x0 must lie on the outer boundary")

    if mesh.dim == 1:
        el, m_loc, mr_loc, s_loc = _assemble_1d(mesh, coeffs)
    else:
        el, m_loc, mr_loc, s_loc = _assemble_2d(mesh, coeffs)
    n = len(mesh.nodes)
    mass = _scatter(el, m_loc, n)
    mass_rho = _scatter(el, mr_loc, n)
    stiffness = _scatter(el, s_loc, n)

    dirichlet = np.sort(mesh.boundary_nodes)
    interior = np.setdiff1d(np.arange(n), dirichlet)
    flux_idx, flux_coef, normal = _flux_stencil(mesh, x0_index)
    return FemSystem(
        mesh=mesh, mass=mass, mass_rho=mass_rho, stiffness=stiffness,
        interior_dofs=interior, dirichlet_dofs=dirichlet, x0_index=x0_index,
        flux_indices=flux_idx, flux_coeffs=flux_coef, normal=normal,
    )


def _flux_stencil(mesh: Mesh, x0_index: int):
    if mesh.dim == 1:
        x = mesh.nodes[:, 0]
        adj = [tuple(e) for e in mesh.elements if x0_index in e]
        if len(adj) != 1:
            raise ValueError("observation node must touch exactly one element")
        a, b = adj[0]
        h = x[b] - x[a]
        nu = -1.0 if x0_index == a else 1.0
        idx = np.array([a, b])
        coef = nu * np.array([-1.0, 1.0]) / h
        return idx, coef, np.array([nu])

    elems = [e for e in mesh.elements if x0_index in e]
    if not elems:
        raise ValueError("observation node belongs to no element")
    normal = _outward_normal(mesh, x0_index)
    weights = {}
    total_area = 0.0
    for e in elems:
        p = mesh.nodes[np.asarray(e)][None, :, :]
        area = float(_triangle_areas(mesh.nodes, np.asarray(e)[None, :])[0])
        g = _p1_gradients(p, np.array([area]))[0]    # (3, 2)
        total_area += area
        for local, node in enumerate(e):
            weights[node] = weights.get(node, 0.0) + area * float(g[local] @ normal)
    idx = np.array(sorted(weights))
    coef = np.array([weights[i] for i in idx]) / total_area
    return idx, coef, normal


def _outward_normal(mesh: Mesh, x0_index: int) -> np.ndarray:
    # boundary edges touch exactly one triangle; average their outward normals
    edge_owner = {}
    for e in mesh.elements:
        for i in range(3):
            key = tuple(sorted((int(e[i]), int(e[(i + 1) % 3]))))
            edge_owner[key] = None if key in edge_owner else tuple(e)
    normals = []
    for (u, v), owner in edge_owner.items():
        if owner is None or (x0_index not in (u, v)):
            continue
        tang = mesh.nodes[v] - mesh.nodes[u]
        nrm = np.array([tang[1], -tang[0]])
        centroid = mesh.nodes[np.asarray(owner)].mean(axis=0)
        mid = 0.5 * (mesh.nodes[u] + mesh.nodes[v])
        if nrm @ (centroid - mid) > 0.0:
            nrm = -nrm
        normals.append(nrm / np.linalg.norm(nrm))
    if not normals:
        raise ValueError("observation node is not on the boundary")
    avg = np.mean(normals, axis=0)
    return avg / np.linalg.norm(avg)


def elliptic_solve(sys: FemSystem, load=None, dirichlet=None,
                   mass_weight: str = "rho") -> np.ndarray:
    """Solve the stationary problem S u = M f with Dirichlet data.

    Parameters
    ----------
    sys : FemSystem
        Assembled system.
    load : float, callable, or array, optional
        Source term f; omitted means zero. With mass_weight "rho" this
        computes the inverse of the density-normalized operator applied to f
        (the right-hand side is the rho-weighted mass times f); with "plain"
        the source enters unweighted.
    dirichlet : float, callable, or array, optional
        Boundary values; omitted means homogeneous.
    mass_weight : str
        "rho" or "plain".

    Returns
    -------
    numpy.ndarray
        Full nodal solution including boundary values.
    """
    if mass_weight not in ("rho", "plain"):
        raise ValueError("mass_weight must be 'rho' or 'plain'")
    n = len(sys.mesh.nodes)
    rhs = np.zeros(n)
    if load is not None:
        f = nodal_field(sys.mesh, load)
        m = sys.mass_rho if mass_weight == "rho" else sys.mass
        rhs = m @ f
    u = np.zeros(n)
    if dirichlet is not None:
        ud = nodal_field(sys.mesh, dirichlet)
        u[sys.dirichlet_dofs] = ud[sys.dirichlet_dofs]
        rhs = rhs - sys.stiffness @ u
    u[sys.interior_dofs] = sys.interior_factor().solve(rhs[sys.interior_dofs])
    return u


def boundary_flux(sys: FemSystem, nodal_values: np.ndarray) -> float:
    """Normal derivative of a P1 field at the observation point.

    Parameters
    ----------
    sys : FemSystem
        Assembled system carrying the observation stencil.
    nodal_values : numpy.ndarray
        Field values at all mesh nodes.

    Returns
    -------
    float
        grad(u_h) . nu from the element(s) adjacent to x0 (area-weighted
        average in 2D).
    """
    return float(sys.flux_coeffs @ nodal_values[sys.flux_indices])
