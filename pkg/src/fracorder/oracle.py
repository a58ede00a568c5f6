"""Stepper-free reference solutions.

Two independent predictors validate the time steppers. A spectral series
built from the dense generalized eigendecomposition of the assembled pencil
(S, M_rho) reproduces the semi-discrete solution exactly up to mode
truncation and quadrature, and closed-form long-time flux asymptotes follow
from one or two stationary solves. Neither touches the history recursion,
so agreement with a stepper run is evidence rather than circularity.

The flux tail of the homogeneous-boundary problem behaves like c * t**-p:
for nonzero initial data p = alpha with c the normal derivative of the
stationary solution A^-1 u0 divided by Gamma(1-alpha); for zero initial
data and a volume (or boundary) source p = 1 + alpha with c built from the
time-integrated data, two (or one plus a lift) stationary solves, and
-1/Gamma(-alpha). Signs follow from the large-argument expansion
E_{a,1}(-x) = x**-1/Gamma(1-a) + O(x**-2); with the outward normal used
throughout this package, positive initial data gives a negative flux tail.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from numpy.polynomial.legendre import leggauss

from .fem import FemSystem, boundary_flux, elliptic_solve, nodal_field
from .forward import ProblemSpec, _data_vectors
from .special import gamma_recip, mlf

__all__ = ["SpectralBasis", "AsymptotePrediction", "spectral_basis",
           "series_solution", "asymptote_prediction"]

_GAUSS = leggauss(12)
_MAX_LEVELS = 6


@dataclass(frozen=True)
class SpectralBasis:
    """Leading generalized eigenpairs of the assembled pencil (S, M_rho).

    Attributes
    ----------
    eigenvalues : numpy.ndarray
        Ascending positive eigenvalues, shape (count,).
    modes : numpy.ndarray
        Eigenvectors as full nodal fields (boundary rows zero), shape
        (n_nodes, count), orthonormal in the M_rho inner product.
    system : FemSystem
        The system the pencil was taken from.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    system: FemSystem

    def __post_init__(self):
        self.eigenvalues.flags.writeable = False
        self.modes.flags.writeable = False

    @property
    def count(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class AsymptotePrediction:
    """Leading term c * t**-p of the long-time flux decay.

    Attributes
    ----------
    leading_coefficient : float
        Signed coefficient c, in the outward-normal flux convention of
        boundary_flux.
    exponent : float
        Decay exponent p: alpha for nonzero initial data, 1 + alpha for
        purely source- or boundary-driven problems.
    source_case : str
        Which data term drives the tail: "initial_condition",
        "volume_source", or "boundary_source".
    """

    leading_coefficient: float
    exponent: float
    source_case: str

    def __post_init__(self):
        if not 0.0 < self.exponent < 3.0:
            raise ValueError(f"exponent outside (0, 3): {self.exponent}")


def spectral_basis(system: FemSystem, count: int) -> SpectralBasis:
    """Compute the first `count` generalized eigenpairs of (S, M_rho).

    Parameters
    ----------
    system : FemSystem
        Assembled 1D system (dense solve; 2D meshes are rejected).
    count : int
        Number of modes to retain, at most the number of interior nodes.

    Returns
    -------
    SpectralBasis
    """
    if system.mesh.dim != 1:
        raise ValueError("spectral basis is restricted to 1D meshes")
    interior = system.interior_dofs
    if not 1 <= count <= len(interior):
        raise ValueError(f"count must lie in [1, {len(interior)}], got {count}")
    idx = np.ix_(interior, interior)
    vals, vecs = sla.eigh(system.stiffness[idx].toarray(),
                          system.mass_rho[idx].toarray(),
                          subset_by_index=[0, count - 1])
    if vals[0] <= 0.0:
        raise ValueError("pencil is not positive definite")
    modes = np.zeros((len(system.mesh.nodes), count))
    modes[interior] = vecs
    return SpectralBasis(vals.copy(), modes, system)


def series_solution(basis: SpectralBasis, spec: ProblemSpec, t: float, *,
                    source_end=None, rtol: float = 1e-8) -> np.ndarray:
    """Evaluate the eigenfunction series solution at time t.

    Sums E_{alpha,1}(-lambda_n t**alpha) times the initial-data modes plus
    the memory-kernel convolution of the source modes, the latter computed
    by adaptive composite Gauss quadrature refined until every mode changes
    by less than `rtol` relative (modes more than three orders below the
    dominant one are held to its absolute scale instead).

    Parameters
    ----------
    basis : SpectralBasis
        Modes of the same assembled system the problem refers to.
    spec : ProblemSpec
        Problem data; boundary data must be absent.
    t : float
        Evaluation time, nonnegative.
    source_end : float, optional
        Time after which the volume source vanishes identically. Supplying
        it truncates the convolution there and keeps the quadrature panels
        clear of the cutoff; without it the integral runs to t and the
        source must be smooth on the whole range.
    rtol : float
        Per-mode relative quadrature target.

    Returns
    -------
    numpy.ndarray
        Nodal field at time t (zero on the boundary).
    """
    if spec.dirichlet:
        raise ValueError("series solution requires homogeneous boundary data")
    t = float(t)
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    sys_ = basis.system
    coeff = basis.modes.T @ (sys_.mass_rho
                             @ np.asarray(nodal_field(sys_.mesh, spec.u0),
                                          dtype=float))
    if t == 0.0:
        return basis.modes @ coeff
    alpha = spec.alpha
    ta = t**alpha
    decay = np.array([mlf(alpha, 1.0, -lam * ta) for lam in basis.eigenvalues])
    coeff = coeff * decay
    if spec.source is not None:
        b = t if source_end is None else min(float(source_end), t)
        if b > 0.0:
            coeff = coeff + _duhamel(basis, spec, t, b, rtol)
    return basis.modes @ coeff


def _duhamel(basis: SpectralBasis, spec: ProblemSpec, t: float, b: float,
             rtol: float) -> np.ndarray:
    # per mode: integral_0^b (t-s)^(alpha-1) E_{a,a}(-lam (t-s)^alpha) f_n(s) ds.
    # The substitution v = (t-s)^alpha removes the endpoint singularity for
    # alpha < 1 (the integrand is bounded in v); for alpha >= 1 the kernel is
    # already bounded and we integrate in r = t-s with panels graded toward
    # the kernel peak.
    alpha = spec.alpha
    if alpha < 1.0:
        lo, hi = (t - b) ** alpha, t**alpha
    else:
        lo, hi = t - b, t
    edges = _graded_edges(lo, hi, deep=(b == t))
    prev = None
    for _ in range(_MAX_LEVELS + 1):
        pts, wts = _composite_gauss(edges)
        vals = _level_values(basis, spec, t, pts, wts)
        if prev is not None:
            gap = np.abs(vals - prev)
            floor = 1e-3 * np.abs(vals).max()
            if np.all(gap <= rtol * np.maximum(np.abs(vals), floor)):
                return vals
        prev = vals
        edges = _split(edges)
    raise ArithmeticError("memory-kernel quadrature did not converge; "
                          "pass source_end if the source has a cutoff")


def _level_values(basis, spec, t, pts, wts):
    alpha = spec.alpha
    lam = basis.eigenvalues
    if alpha < 1.0:
        s_vals = t - pts ** (1.0 / alpha)
        ker = _mlf_table(alpha, lam, pts) / alpha
    else:
        s_vals = t - pts
        ker = _mlf_table(alpha, lam, pts**alpha) * pts ** (alpha - 1.0)
    # roundoff in the substitution can push s a hair past the endpoints
    np.clip(s_vals, 0.0, t, out=s_vals)
    return (ker * _mode_loads(basis, spec, s_vals)) @ wts


def _mlf_table(alpha, lam, x):
    out = np.empty((len(lam), len(x)))
    for i, l in enumerate(lam):
        for j, v in enumerate(x):
            out[i, j] = mlf(alpha, alpha, -l * v)
    return out


def _mode_loads(basis, spec, s_vals):
    source_at, _ = _data_vectors(spec)
    mass = basis.system.mass
    out = np.empty((basis.count, len(s_vals)))
    for j, s in enumerate(s_vals):
        out[:, j] = basis.modes.T @ (mass @ source_at(float(s)))
    return out


def _graded_edges(lo, hi, deep):
    # geometric panels (ratio 4) toward the singular or peaked end at lo;
    # 20 octaves when the endpoint is genuinely singular, 8 otherwise
    width = hi - lo
    offs = width * 0.25 ** np.arange(20 if deep else 8, -1, -1.0)
    return np.concatenate(([lo], lo + offs))


def _split(edges):
    mids = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(2 * len(edges) - 1)
    out[0::2] = edges
    out[1::2] = mids
    return out


def _composite_gauss(edges):
    x, w = _GAUSS
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def asymptote_prediction(system: FemSystem, spec: ProblemSpec) -> AsymptotePrediction:
    """Predict the leading flux-decay term from stationary solves.

    Selects the dominant data term (initial data beats volume and boundary
    sources, which decay one power faster), integrates time-dependent data
    over the run's grid by the trapezoid rule, and applies the stationary
    solver once (initial or boundary data) or twice (volume source) before
    extracting the observation-point flux.

    Parameters
    ----------
    system : FemSystem
        Assembled system; must be the one `spec` refers to.
    spec : ProblemSpec
        Problem data; at least one of initial data, source, or boundary
        data must be nonzero.

    Returns
    -------
    AsymptotePrediction
    """
    alpha = spec.alpha
    u0 = np.asarray(nodal_field(system.mesh, spec.u0), dtype=float)
    if np.any(u0 != 0.0):
        tail = elliptic_solve(system, load=u0, mass_weight="rho")
        return AsymptotePrediction(
            boundary_flux(system, tail) * gamma_recip(1.0 - alpha),
            alpha, "initial_condition")
    f_star, g_star = _time_integrals(spec)
    if f_star is not None and np.any(f_star != 0.0):
        once = elliptic_solve(system, load=f_star, mass_weight="plain")
        tail = elliptic_solve(system, load=once, mass_weight="rho")
        return AsymptotePrediction(
            -boundary_flux(system, tail) * gamma_recip(-alpha),
            1.0 + alpha, "volume_source")
    if g_star is not None and np.any(g_star != 0.0):
        lift = elliptic_solve(system, dirichlet=g_star)
        tail = elliptic_solve(system, load=lift, mass_weight="rho")
        return AsymptotePrediction(
            -boundary_flux(system, tail) * gamma_recip(-alpha),
            1.0 + alpha, "boundary_source")
    raise ValueError("all problem data vanish; nothing to predict")


def _time_integrals(spec: ProblemSpec):
    # trapezoid on the run's own grid; data vanish after their cutoff so the
    # grid resolution bounds the quadrature error
    source_at, boundary_at = _data_vectors(spec)
    times = spec.grid.times()
    f_star = None
    if spec.source is not None:
        f_star = 0.5 * (source_at(times[0]) + source_at(times[-1]))
        for s in times[1:-1]:
            f_star += source_at(float(s))
        f_star *= spec.grid.tau
    g_star = None
    if spec.dirichlet:
        g_star = 0.5 * (boundary_at(times[0]) + boundary_at(times[-1]))
        for s in times[1:-1]:
            g_star += boundary_at(float(s))
        g_star *= spec.grid.tau
    return f_star, g_star
