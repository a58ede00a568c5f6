"""Time steppers with sum-of-exponentials history compression.

Two schemes advance the density-weighted problem rho*D_t^alpha u + Au = F
with strongly imposed Dirichlet values:

* subdiffusion (alpha in (0,1)): piecewise-linear interpolation of u in the
  Caputo integral, integration by parts, exponential-sum history with one
  recursion per decay node, corrected first step;
* diffusion wave (alpha in (1,2)): piecewise-quadratic interpolation, scheme
  centered at half-integer times, exponential-sum history driven by second
  differences, zero initial velocity.

A backward-Euler stepper covers alpha = 1 as the bridge case.  All history
weights have exact and small-argument Taylor branches switched at s*tau =
1e-3: below that point the exact expressions lose more digits to cancellation
than the printed cubic polynomials give up in truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
import scipy.sparse.linalg as spla

from ._backend import kernels
from .fem import FemSystem, boundary_flux, nodal_field
from .soe import SoeApprox

__all__ = ["TimeGrid", "ProblemSpec", "FluxSeries", "HistoryState",
           "SoeMismatchError", "taylor_safe_weights", "step_subdiffusion",
           "step_diffusion_wave", "step_classical", "write_flux_csv",
           "read_flux_csv"]

_THETA = 1e-3  # exact/Taylor switch for x = s*tau


class SoeMismatchError(ValueError):
    """Raised when a stepper receives an SOE built for other parameters."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t_n = n*tau, n = 0..n_steps.

    Attributes
    ----------
    tau : float
        Step size.
    n_steps : int
        Number of steps N; the horizon is N*tau.
    """

    tau: float
    n_steps: int

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if self.n_steps != int(self.n_steps):
            raise ValueError("n_steps must be a whole number")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if self.n_steps < 1:
            raise ValueError("need at least one step")

    @property
    def horizon(self) -> float:
        return self.tau * self.n_steps

    @classmethod
    def from_horizon(cls, tau: float, horizon: float) -> "TimeGrid":
        """Grid with n_steps = round(horizon / tau); requires an exact fit."""
        n = int(round(horizon / tau))
        if abs(n * tau - horizon) > 1e-9 * max(1.0, horizon):
            raise ValueError(f"horizon {horizon} is not a multiple of tau {tau}")
        return cls(tau, n)

    def times(self) -> np.ndarray:
        """All grid times including t_0 = 0."""
        return self.tau * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class ProblemSpec:
    """One forward problem: operator data, problem data, and a time grid.

    Attributes
    ----------
    alpha : float
        Fractional order in (0, 2); 1 selects the classical stepper.
    system : FemSystem
        Assembled spatial discretization.
    grid : TimeGrid
        Time discretization.
    u0 : float, callable, or array
        Initial value (nodal interpolation is used).
    source : callable or None
        Space-time source F(points, t) -> values, or None for zero.
    dirichlet : mapping marker -> callable
        Time-dependent boundary data g(points, t) -> values per boundary
        marker; unlisted markers stay homogeneous.  For alpha in (1, 2) the
        initial velocity is fixed to zero.
    """

    alpha: float
    system: FemSystem
    grid: TimeGrid
    u0: object = 0.0
    source: Optional[Callable] = None
    dirichlet: Mapping[int, Callable] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")


@dataclass(frozen=True)
class FluxSeries:
    """Observed normal derivative at x0 along the time grid.

    Attributes
    ----------
    times : numpy.ndarray
        Strictly increasing observation times (includes t = 0).
    values : numpy.ndarray
        Flux values, parallel to times.
    metadata : dict
        Provenance: alpha, tau, mesh size, noise seed when applicable.
    """

    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")


class HistoryState:
    """Per-decay-node accumulators and the trailing solution values."""

    def __init__(self, n_nodes: int, n_dofs: int):
        self.accumulators = np.zeros((n_nodes, n_dofs))
        self.summed = np.zeros(n_dofs)

    def __len__(self):
        return len(self.accumulators)


def taylor_safe_weights(nodes: np.ndarray, tau: float):
    """History weights for both schemes with cancellation-safe branches.

    Parameters
    ----------
    nodes : numpy.ndarray
        Positive decay rates s_i.
    tau : float
        Time step.

    Returns
    -------
    dict
        Arrays over nodes: "w1", "w2" (linear-interpolant segment weights),
        "phi" (startup factor 2(1-exp(-x/2))/x), "psi" (segment factor
        (1-exp(-x))/x), with x = s_i*tau.  Branches agree to ~1e-10 relative
        at the switch point x = 1e-3.
    """
    x = np.asarray(nodes, dtype=float) * tau
    if np.any(x <= 0.0):
        raise ValueError("nodes and tau must be positive")
    small = x < _THETA
    ex = np.exp(-x)
    w1 = np.empty_like(x)
    w2 = np.empty_like(x)
    phi = np.empty_like(x)
    psi = np.empty_like(x)

    xl = x[~small]
    exl = ex[~small]
    em1 = np.expm1(-xl)
    w1[~small] = exl * tau * (em1 + xl) / xl**2
    w2[~small] = exl * tau * (-em1 - xl * exl) / xl**2
    phi[~small] = -2.0 * np.expm1(-0.5 * xl) / xl
    psi[~small] = -em1 / xl

    xs = x[small]
    exs = ex[small]
    w1[small] = exs * tau * (0.5 - xs / 6.0 + xs**2 / 24.0)
    w2[small] = exs * tau * (0.5 - xs / 3.0 + xs**2 / 8.0)
    phi[small] = 1.0 - xs / 4.0 + xs**2 / 24.0
    psi[small] = 1.0 - xs / 2.0 + xs**2 / 6.0 - xs**3 / 24.0
    return {"w1": w1, "w2": w2, "phi": phi, "psi": psi}


def _data_vectors(spec: ProblemSpec):
    sys = spec.system
    mesh = sys.mesh
    nodes = mesh.nodes

    def source_at(t: float) -> Optional[np.ndarray]:
        if spec.source is None:
            return None
        return np.asarray(spec.source(nodes, t), dtype=float)

    marker_rows = {}
    for marker in spec.dirichlet:
        sel = mesh.boundary_nodes[mesh.boundary_markers == marker]
        if len(sel) == 0:
            raise ValueError(f"no boundary nodes carry marker {marker}")
        marker_rows[marker] = sel

    def boundary_at(t: float) -> np.ndarray:
        g = np.zeros(len(nodes))
        for marker, func in spec.dirichlet.items():
            rows = marker_rows[marker]
            g[rows] = np.asarray(func(nodes[rows], t), dtype=float)
        return g

    return source_at, boundary_at


def _solve_with_bc(lu, a_id, interior, dirichlet, rhs_full, bc_full):
    rhs = rhs_full[interior]
    if len(dirichlet):
        rhs = rhs - a_id @ bc_full[dirichlet]
    u = bc_full.copy()
    u[interior] = lu.solve(rhs)
    return u


def _check_soe(soe: SoeApprox, beta: float, delta_max: float, horizon: float):
    if abs(soe.beta - beta) > 1e-12:
        raise SoeMismatchError(f"SOE has beta={soe.beta}, scheme needs {beta}")
    if soe.delta > delta_max * (1.0 + 1e-12):
        raise SoeMismatchError(
            f"SOE certified only down to {soe.delta}, scheme needs {delta_max}"
        )
    if soe.horizon < horizon * (1.0 - 1e-12):
        raise SoeMismatchError(
            f"SOE certified only up to {soe.horizon}, scheme needs {horizon}"
        )


def _flux_metadata(spec: ProblemSpec) -> dict:
    return {
        "alpha": spec.alpha,
        "tau": spec.grid.tau,
        "mesh": f"{spec.system.mesh.dim}d-{len(spec.system.mesh.nodes)}nodes",
    }


def step_subdiffusion(spec: ProblemSpec, soe: SoeApprox, *,
                      observer: Optional[Callable] = None) -> FluxSeries:
    """Advance the subdiffusion scheme and record the flux at every step.

    Parameters
    ----------
    spec : ProblemSpec
        Problem with alpha in (0, 1).
    soe : SoeApprox
        Kernel compression built with beta = 1 + alpha, delta <= tau, and
        horizon covering the grid.
    observer : callable, optional
        Called as observer(t_n, u_n) with the full nodal vector after every
        step (including t_0); use it to capture solution snapshots.

    Returns
    -------
    FluxSeries
        Flux at t_0..t_N.
    """
    alpha = spec.alpha
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"subdiffusion needs alpha in (0,1), got {alpha}")
    grid = spec.grid
    tau = grid.tau
    _check_soe(soe, 1.0 + alpha, tau, grid.horizon)

    sys = spec.system
    interior, dirichlet = sys.interior_dofs, sys.dirichlet_dofs
    c_a = math.gamma(2.0 - alpha)
    ta = tau**alpha
    a_mat = (sys.mass_rho + (c_a * ta) * sys.stiffness).tocsr()
    lu = spla.splu(a_mat[np.ix_(interior, interior)].tocsc())
    a_id = a_mat[np.ix_(interior, dirichlet)]

    source_at, boundary_at = _data_vectors(spec)
    w = taylor_safe_weights(soe.nodes, tau)
    decay = np.exp(-soe.nodes * tau)
    omega = soe.weights

    u0 = np.array(nodal_field(sys.mesh, spec.u0), dtype=float)
    hist = HistoryState(len(soe), len(u0))

    fluxes = np.empty(grid.n_steps + 1)
    fluxes[0] = boundary_flux(sys, u0)
    if observer is not None:
        observer(0.0, u0)

    # corrected first step
    f0 = source_at(0.0)
    f1 = source_at(tau)
    rhs = sys.mass_rho @ u0 - (0.5 * c_a * ta) * (sys.stiffness @ u0)
    if f1 is not None:
        rhs = rhs + (c_a * ta) * (sys.mass @ (f1 + 0.5 * f0))
    u_prev2 = u0
    u_prev = _solve_with_bc(lu, a_id, interior, dirichlet, rhs, boundary_at(tau))
    fluxes[1] = boundary_flux(sys, u_prev)
    if observer is not None:
        observer(tau, u_prev)

    mass_rho_u0 = sys.mass_rho @ u0
    for n in range(2, grid.n_steps + 1):
        kernels.history_update_two_level(
            hist.accumulators, decay, w["w1"], w["w2"], u_prev, u_prev2,
            omega, hist.summed,
        )
        mem = (tau ** (-alpha) * float(n) ** (-alpha)) * mass_rho_u0 \
            + alpha * (sys.mass_rho @ hist.summed)
        rhs = alpha * (sys.mass_rho @ u_prev) + ((1.0 - alpha) * ta) * mem
        fn = source_at(n * tau)
        if fn is not None:
            rhs = rhs + (c_a * ta) * (sys.mass @ fn)
        u_new = _solve_with_bc(lu, a_id, interior, dirichlet, rhs,
                               boundary_at(n * tau))
        fluxes[n] = boundary_flux(sys, u_new)
        if observer is not None:
            observer(n * tau, u_new)
        u_prev2, u_prev = u_prev, u_new

    return FluxSeries(grid.times(), fluxes, _flux_metadata(spec))


def step_diffusion_wave(spec: ProblemSpec, soe: SoeApprox, *,
                        observer: Optional[Callable] = None,
                        start_refine: int = 1,
                        start_steps: int = 2) -> FluxSeries:
    """Advance the diffusion-wave scheme and record the flux at every step.

    Parameters
    ----------
    spec : ProblemSpec
        Problem with alpha in (1, 2); initial velocity is zero.
    soe : SoeApprox
        Kernel compression built with beta = alpha - 1, delta <=
        tau/(2*start_refine), and horizon covering the grid.
    observer : callable, optional
        Called as observer(t_n, u_n) after every step (including t_0).
    start_refine : int
        Substep factor for the startup phase: the first `start_steps` grid
        steps are integrated with step tau/start_refine before the scheme
        continues on the regular grid. 1 keeps the grid uniform; any other
        value must be even so the substep history lines up with the
        half-offset quadrature of the regular grid at the handover. The
        solution leaves t = 0 with unbounded curvature, and without
        refinement that layer commits an O(tau) error that decays like
        t^-alpha and eventually buries any faster-decaying flux tail.
    start_steps : int
        Grid steps covered by the substepped phase, in [2, n_steps];
        ignored when start_refine is 1. Choose the span to cover source
        and boundary-data cutoffs, which restart the layer.

    Returns
    -------
    FluxSeries
        Flux at t_0..t_N (grid times only; substeps are not reported).
    """
    alpha = spec.alpha
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"diffusion wave needs alpha in (1,2), got {alpha}")
    grid = spec.grid
    if grid.n_steps < 2:
        raise ValueError("diffusion-wave scheme needs at least 2 steps")
    refine = int(start_refine)
    if refine != start_refine or refine < 1 or (refine > 1 and refine % 2):
        raise ValueError("start_refine must be 1 or an even integer")
    if refine == 1:
        start_steps = 2          # plain run; any larger split is equivalent
    m0 = int(start_steps)
    if m0 != start_steps or not 2 <= m0 <= grid.n_steps:
        raise ValueError(f"start_steps must lie in [2, {grid.n_steps}]")
    tau = grid.tau
    tau_s = tau / refine
    _check_soe(soe, alpha - 1.0, 0.5 * tau_s, grid.horizon)

    sys = spec.system
    interior, dirichlet = sys.interior_dofs, sys.dirichlet_dofs
    c_p = math.gamma(3.0 - alpha)
    omega = soe.weights
    source_at, boundary_at = _data_vectors(spec)
    u0 = np.array(nodal_field(sys.mesh, spec.u0), dtype=float)

    fluxes = np.empty(grid.n_steps + 1)
    fluxes[0] = boundary_flux(sys, u0)
    if observer is not None:
        observer(0.0, u0)

    def phase_ops(tau_p):
        ta = tau_p**alpha
        a_gen = (sys.mass_rho + (0.5 * c_p * ta) * sys.stiffness).tocsr()
        w = taylor_safe_weights(soe.nodes, tau_p)
        decay = np.exp(-soe.nodes * tau_p)
        return {
            "tau": tau_p, "ta": ta, "decay": decay,
            "lu": spla.splu(a_gen[np.ix_(interior, interior)].tocsc()),
            "a_id": a_gen[np.ix_(interior, dirichlet)],
            "psi_w": decay * tau_p * w["psi"],   # exp(-x)*(1-exp(-x))/s_i
            "phi_start": decay * w["phi"],       # exp(-x)*2(1-exp(-x/2))/x
        }

    def first_step(ops):
        # zero initial velocity
        tau_p, ta = ops["tau"], ops["ta"]
        a_first = (sys.mass_rho
                   + (c_p / 2.0**alpha * ta) * sys.stiffness).tocsr()
        lu = spla.splu(a_first[np.ix_(interior, interior)].tocsc())
        a_id = a_first[np.ix_(interior, dirichlet)]
        rhs = sys.mass_rho @ u0 - (c_p / 2.0**alpha * ta) * (sys.stiffness @ u0)
        f_half = source_at(0.5 * tau_p)
        if f_half is not None:
            rhs = rhs + (c_p / 2.0 ** (alpha - 1.0) * ta) * (sys.mass @ f_half)
        return _solve_with_bc(lu, a_id, interior, dirichlet, rhs,
                              boundary_at(tau_p))

    def run_phase(ops, n_from, n_to, u_m1, u_m2, u_m3, hist, on_step):
        tau_p, ta = ops["tau"], ops["ta"]
        for n in range(n_from, n_to + 1):
            if n == 2:
                np.multiply(ops["phi_start"][:, None],
                            ((u_m1 - u_m2) / tau_p)[None, :],
                            out=hist.accumulators)
                hist.summed[:] = omega @ hist.accumulators
            else:
                second_diff = (u_m1 - 2.0 * u_m2 + u_m3) / tau_p**2
                kernels.history_update_one_level(
                    hist.accumulators, ops["decay"], ops["psi_w"],
                    second_diff, omega, hist.summed,
                )
            rhs = sys.mass_rho @ (2.0 * u_m1 - u_m2) \
                - (0.5 * c_p * ta) * (sys.stiffness @ u_m1) \
                - ((2.0 - alpha) * ta) * (sys.mass_rho @ hist.summed)
            fn = source_at((n - 0.5) * tau_p)
            if fn is not None:
                rhs = rhs + (c_p * ta) * (sys.mass @ fn)
            u_new = _solve_with_bc(ops["lu"], ops["a_id"], interior,
                                   dirichlet, rhs, boundary_at(n * tau_p))
            on_step(n, u_new)
            u_m3, u_m2, u_m1 = u_m2, u_m1, u_new
        return u_m1, u_m2, u_m3

    # Startup phase at step tau_s covering [0, m0*tau]. The history state
    # entering regular step m0+1 is the kernel integral anchored at
    # t_{m0-1/2} with coverage [0, t_{m0-3/2}] (each update adds the segment
    # one level below its anchor, centered on its second difference). The
    # substepped recursion is mirrored up to the fine step whose segment
    # straddles that coverage boundary (hence the even-factor requirement),
    # closed with a half-segment weight, and the anchor gap of
    # (refine - 3/2) substeps is one extra decay.
    coarse = phase_ops(tau)
    fine = coarse if refine == 1 else phase_ops(tau_s)
    hist = HistoryState(len(soe), len(u0))
    a_hand = np.zeros_like(hist.accumulators)
    snaps = [u0]
    recent = [u0]
    if refine > 1:
        gate = refine * m0 - 3 * refine // 2 + 2
        x_f = soe.nodes * tau_s
        half_w = -np.exp(-1.5 * x_f) * np.expm1(-0.5 * x_f) / soe.nodes
        tail_decay = np.exp(-soe.nodes * (tau_s * (refine - 1.5)))

    def on_fine(n, u_new):
        if refine > 1 and n == gate:
            sd = (recent[-1] - 2.0 * recent[-2] + recent[-3]) / tau_s**2
            np.multiply(
                hist.accumulators + (half_w - fine["psi_w"])[:, None] * sd,
                tail_decay[:, None], out=a_hand)
        recent.append(u_new)
        del recent[:-3]
        if n % refine:
            return
        k = n // refine
        fluxes[k] = boundary_flux(sys, u_new)
        if observer is not None:
            observer(k * tau, u_new)
        snaps.append(u_new)
        del snaps[:-3]

    u1 = first_step(fine)
    on_fine(1, u1)
    run_phase(fine, 2, refine * m0, u1, u0, None, hist, on_fine)

    if m0 < grid.n_steps:
        if refine == 1:
            a_hand[:] = hist.accumulators
        hist.accumulators[:] = a_hand

        def on_coarse(n, u_new):
            fluxes[n] = boundary_flux(sys, u_new)
            if observer is not None:
                observer(n * tau, u_new)

        run_phase(coarse, m0 + 1, grid.n_steps,
                  snaps[-1], snaps[-2], snaps[-3], hist, on_coarse)

    return FluxSeries(grid.times(), fluxes, _flux_metadata(spec))


def step_classical(spec: ProblemSpec, *,
                   observer: Optional[Callable] = None) -> FluxSeries:
    """Backward-Euler stepper for alpha = 1.

    Parameters
    ----------
    spec : ProblemSpec
        Problem with alpha exactly 1.
    observer : callable, optional
        Called as observer(t_n, u_n) after every step (including t_0).

    Returns
    -------
    FluxSeries
        Flux at t_0..t_N.
    """
    if spec.alpha != 1.0:
        raise ValueError(f"classical stepper needs alpha = 1, got {spec.alpha}")
    grid = spec.grid
    tau = grid.tau
    sys = spec.system
    interior, dirichlet = sys.interior_dofs, sys.dirichlet_dofs
    a_mat = (sys.mass_rho + tau * sys.stiffness).tocsr()
    lu = spla.splu(a_mat[np.ix_(interior, interior)].tocsc())
    a_id = a_mat[np.ix_(interior, dirichlet)]
    source_at, boundary_at = _data_vectors(spec)

    u = np.array(nodal_field(sys.mesh, spec.u0), dtype=float)
    fluxes = np.empty(grid.n_steps + 1)
    fluxes[0] = boundary_flux(sys, u)
    if observer is not None:
        observer(0.0, u)
    for n in range(1, grid.n_steps + 1):
        rhs = sys.mass_rho @ u
        fn = source_at(n * tau)
        if fn is not None:
            rhs = rhs + tau * (sys.mass @ fn)
        u = _solve_with_bc(lu, a_id, interior, dirichlet, rhs,
                           boundary_at(n * tau))
        fluxes[n] = boundary_flux(sys, u)
        if observer is not None:
            observer(n * tau, u)
    return FluxSeries(grid.times(), fluxes, _flux_metadata(spec))


def write_flux_csv(series: FluxSeries, path, max_rows: Optional[int] = None) -> None:
    """Write a flux series as CSV with #-prefixed metadata lines.

    Parameters
    ----------
    series : FluxSeries
        Series to store.
    path : str or pathlib.Path
        Destination file.
    max_rows : int, optional
        If given and the series is longer, keep a log-spaced subset of this
        size (always including the first and last samples).
    """
    times, values = series.times, series.values
    if max_rows is not None and len(times) > max_rows:
        pos = np.unique(np.geomspace(1, len(times), max_rows).astype(int) - 1)
        times, values = times[pos], values[pos]
    with open(path, "w") as fh:
        for key in sorted(series.metadata):
            fh.write(f"# {key}={series.metadata[key]}\n")
        fh.write("t,flux\n")
        for t, v in zip(times, values):
            fh.write("%.17g,%.17g\n" % (t, v))


def read_flux_csv(path) -> FluxSeries:
    """Read a flux series written by write_flux_csv.

    Parameters
    ----------
    path : str or pathlib.Path
        CSV file with a "t,flux" header and optional # metadata lines.

    Returns
    -------
    FluxSeries
        Parsed series.
    """
    metadata = {}
    times = []
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    metadata[key.strip()] = _parse_meta(val.strip())
                continue
            if line.lower().replace(" ", "") == "t,flux":
                continue
            t_str, _, v_str = line.partition(",")
            times.append(float(t_str))
            values.append(float(v_str))
    return FluxSeries(np.array(times), np.array(values), metadata)


def _parse_meta(text: str):
    try:
        as_float = float(text)
    except ValueError:
        return text
    if as_float == int(as_float) and "." not in text and "e" not in text.lower():
        return int(as_float)
    return as_float
