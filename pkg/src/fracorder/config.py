"""Experiment configuration: INI parsing, named presets, validation.

A config is flat INI text with sections [case], [domain], [coefficients],
[data], [time], [recovery], [soe], [output].  Field values are symbolic
expressions over x (alias x1), x2, and t; time cutoffs are written with the
indicator chi(t, lo, hi).  `parse_config` reads a file, `preset_config`
expands one of the built-in presets, and both return a fully validated
ExperimentConfig.
"""

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib.resources import files
from typing import Optional

import numpy as np

from .expressions import Expression, ExpressionError
from .meshes import BOTTOM, LEFT, OBSTACLE, OUTER, RIGHT, TOP, load_mesh

__all__ = ["ConfigError", "ExperimentConfig", "parse_config",
           "preset_config", "preset_names"]

SIDE_MARKERS = {"left": LEFT, "right": RIGHT, "bottom": BOTTOM, "top": TOP,
                "outer": OUTER, "obstacle": OBSTACLE}

_KNOWN_KEYS = {
    "case": {"label"},
    "domain": {"kind", "resolution", "mesh", "x0"},
    "coefficients": {"a", "q", "rho"},
    "data": {"u0", "source", "cutoff"}
            | {f"dirichlet_{side}" for side in SIDE_MARKERS},
    "time": {"tau", "horizon"},
    "recovery": {"alphas", "windows", "noise", "seeds", "mode", "k",
                 "samples"},
    "soe": {"tol"},
    "output": {"dense"},
}


class ConfigError(ValueError):
    """Raised for unparsable or invalid experiment configs."""


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description.

    Attributes
    ----------
    label : str
        Name used in output files and tables.
    kind : str
        Domain kind: "interval", "square", or "mesh".
    resolution : int
        Cells (interval) or cells per side (square); unused for "mesh".
    mesh_path : str or None
        Mesh file path when kind is "mesh".
    x0 : tuple of float
        Observation point, one coordinate per dimension.
    a, q, rho : Expression
        Spatial coefficients; may not depend on t.
    u0 : Expression or None
        Initial value; may not depend on t.
    source : Expression or None
        Volume source F(x, t).
    dirichlet : dict
        Side name ("left", "bottom", ...) to boundary expression g(x, t).
    cutoff : float
        Time after which source and boundary data vanish.
    alphas : tuple of float
        Orders to run, each in (0, 2).
    tau : float
        Time step.
    horizon : float
        Final time T; an integer number of steps.
    windows : tuple of (float, float)
        Observation windows, each inside (cutoff, horizon].
    noise_levels : tuple of float
        Relative noise amplitudes.
    seeds : tuple of int
        Noise seeds.
    mode : str
        Fit model: "initial_condition", "zero_initial", or "auto" to follow
        the data.
    n_terms : int
        Power terms in the least-squares fit, 1 to 3.
    n_samples : int
        Observation samples per window.
    soe_tol : float
        Kernel compression tolerance.
    dense_output : bool
        Also write the full undownsampled flux series.
    """

    label: str
    kind: str
    resolution: int
    mesh_path: Optional[str]
    x0: tuple
    a: Expression
    q: Expression
    rho: Expression
    u0: Optional[Expression]
    source: Optional[Expression]
    dirichlet: dict = field(default_factory=dict)
    cutoff: float = 0.0
    alphas: tuple = ()
    tau: float = 1e-3
    horizon: float = 100.0
    windows: tuple = ()
    noise_levels: tuple = (0.0,)
    seeds: tuple = (0,)
    mode: str = "auto"
    n_terms: int = 1
    n_samples: int = 11
    soe_tol: float = 1e-8
    dense_output: bool = False

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    def semantic_digest(self) -> str:
        """Hash of every field that can change computed results.

        Output cosmetics (the [output] section) are excluded, so rerunning
        with a different artifact selection keeps the digest stable.
        """
        def expr_key(e):
            return None if e is None else repr(e.ast)

        record = {
            "label": self.label,
            "kind": self.kind,
            "resolution": self.resolution if self.kind != "mesh" else None,
            "mesh": self.mesh_path,
            "x0": list(self.x0),
            "a": expr_key(self.a),
            "q": expr_key(self.q),
            "rho": expr_key(self.rho),
            "u0": expr_key(self.u0),
            "source": expr_key(self.source),
            "dirichlet": {side: expr_key(e)
                          for side, e in sorted(self.dirichlet.items())},
            "cutoff": self.cutoff,
            "alphas": list(self.alphas),
            "tau": self.tau,
            "horizon": self.horizon,
            "windows": [list(w) for w in self.windows],
            "noise": list(self.noise_levels),
            "seeds": list(self.seeds),
            "mode": self.mode,
            "k": self.n_terms,
            "samples": self.n_samples,
            "soe_tol": self.soe_tol,
        }
        canon = json.dumps(record, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _fail(path, message):
    raise ConfigError(f"{path}: {message}")


def _parse_expr(raw, path, *, allowed, dim):
    try:
        expr = Expression(raw)
    except ExpressionError as exc:
        _fail(path, f"bad expression: {exc}")
    extra = expr.variables - allowed
    if extra:
        _fail(path, f"may not use {sorted(extra)}")
    if dim == 1 and "x2" in expr.variables:
        _fail(path, "uses x2 but the domain is one-dimensional")
    return expr


def _floats(raw, path):
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError:
        _fail(path, f"expected numbers, got {raw!r}")


def _windows(raw, path):
    out = []
    for tok in raw.replace(",", " ").split():
        lo, sep, hi = tok.partition(":")
        if not sep:
            _fail(path, f"window {tok!r} is not start:end")
        try:
            out.append((float(lo), float(hi)))
        except ValueError:
            _fail(path, f"window {tok!r} is not start:end")
    return tuple(out)


def _chi_cutoffs(node, out):
    # collect upper cutoff edges from chi(t, lo, hi) with constant bounds
    tag = node[0]
    if tag == "chi":
        if node[1] == ("var", "t") and node[3][0] == "num":
            out.append(node[3][1])
        for child in node[1:]:
            _chi_cutoffs(child, out)
    elif tag in ("neg", "call"):
        _chi_cutoffs(node[-1], out)
    elif tag == "bin":
        _chi_cutoffs(node[2], out)
        _chi_cutoffs(node[3], out)


def _probe_points(cfg_kind, resolution, mesh_path):
    if cfg_kind == "interval":
        return np.linspace(0.0, 1.0, 17)[:, None]
    if cfg_kind == "square":
        side = np.linspace(0.0, 1.0, 9)
        xg, yg = np.meshgrid(side, side)
        return np.column_stack([xg.ravel(), yg.ravel()])
    try:
        mesh = load_mesh(mesh_path)
    except (OSError, ValueError) as exc:
        _fail("domain.mesh", f"cannot load {mesh_path}: {exc}")
    nodes = mesh.nodes
    if len(nodes) > 200:
        step = len(nodes) // 200 + 1
        nodes = nodes[::step]
    return nodes


def _parse_text(text, label_default):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            _fail(section, "unknown section")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                _fail(f"{section}.{key}", "unknown key")

    def get(section, key, default=None):
        return parser.get(section, key, fallback=default)

    label = get("case", "label", label_default)

    kind = get("domain", "kind", "interval")
    if kind not in ("interval", "square", "mesh"):
        _fail("domain.kind", f"expected interval, square, or mesh, "
              f"got {kind!r}")
    dim = 1 if kind == "interval" else 2

    mesh_path = None
    resolution = 0
    if kind == "mesh":
        raw = get("domain", "mesh")
        if raw is None:
            _fail("domain.mesh", "required when kind is mesh")
        if raw.startswith("builtin:"):
            mesh_path = str(files("fracorder.data") / (raw[8:] + ".txt"))
        else:
            mesh_path = raw
    else:
        raw = get("domain", "resolution", "200" if dim == 1 else "64")
        try:
            resolution = int(raw)
        except ValueError:
            _fail("domain.resolution", f"expected an integer, got {raw!r}")
        if resolution < 2:
            _fail("domain.resolution", "must be at least 2")

    x0 = _floats(get("domain", "x0", "0"), "domain.x0")
    if len(x0) != dim:
        _fail("domain.x0", f"expected {dim} coordinates, got {len(x0)}")

    spatial = {"x", "x1", "x2"} if dim == 2 else {"x", "x1"}
    coeffs = {}
    for name in ("a", "q", "rho"):
        coeffs[name] = _parse_expr(get("coefficients", name, "1"),
                                   f"coefficients.{name}",
                                   allowed=spatial, dim=dim)

    raw_u0 = get("data", "u0")
    u0 = None if raw_u0 is None else _parse_expr(
        raw_u0, "data.u0", allowed=spatial, dim=dim)
    raw_source = get("data", "source")
    source = None if raw_source is None else _parse_expr(
        raw_source, "data.source", allowed=spatial | {"t"}, dim=dim)

    dirichlet = {}
    for side in SIDE_MARKERS:
        raw = get("data", f"dirichlet_{side}")
        if raw is None:
            continue
        if dim == 1 and side not in ("left", "right"):
            _fail(f"data.dirichlet_{side}", "not an interval endpoint")
        dirichlet[side] = _parse_expr(raw, f"data.dirichlet_{side}",
                                      allowed=spatial | {"t"}, dim=dim)

    tau = _floats(get("time", "tau", "1e-3"), "time.tau")
    horizon = _floats(get("time", "horizon", "100"), "time.horizon")
    if len(tau) != 1 or tau[0] <= 0:
        _fail("time.tau", "expected one positive number")
    if len(horizon) != 1 or horizon[0] <= 0:
        _fail("time.horizon", "expected one positive number")
    tau, horizon = tau[0], horizon[0]
    n_steps = horizon / tau
    if abs(n_steps - round(n_steps)) > 1e-9 * max(n_steps, 1.0):
        _fail("time.horizon", f"not an integer number of steps of {tau}")
    if round(n_steps) < 2:
        _fail("time.horizon", "needs at least 2 steps")

    alphas = _floats(get("recovery", "alphas", ""), "recovery.alphas")
    if not alphas:
        _fail("recovery.alphas", "at least one order is required")
    for a_val in alphas:
        if not 0.0 < a_val < 2.0:
            _fail("recovery.alphas", f"order {a_val} outside (0, 2)")

    windows = _windows(get("recovery", "windows", ""), "recovery.windows")
    if not windows:
        _fail("recovery.windows", "at least one window is required")
    for lo, hi in windows:
        if not 0.0 < lo < hi:
            _fail("recovery.windows", f"bad window {lo}:{hi}")
        if hi > horizon:
            _fail("recovery.windows",
                  f"window {lo}:{hi} extends past horizon {horizon}")

    noise = _floats(get("recovery", "noise", "0"), "recovery.noise")
    if any(eps < 0 for eps in noise):
        _fail("recovery.noise", "noise levels must be nonnegative")
    seeds = tuple(int(s) for s in
                  _floats(get("recovery", "seeds", "0"), "recovery.seeds"))

    mode = get("recovery", "mode", "auto")
    if mode not in ("auto", "initial_condition", "zero_initial"):
        _fail("recovery.mode", f"unknown mode {mode!r}")

    n_terms = int(_floats(get("recovery", "k", "1"), "recovery.k")[0])
    if not 1 <= n_terms <= 3:
        _fail("recovery.k", "must be 1, 2, or 3")
    n_samples = int(_floats(get("recovery", "samples", "11"),
                            "recovery.samples")[0])
    if n_samples < 2:
        _fail("recovery.samples", "needs at least 2 samples")

    soe_tol = _floats(get("soe", "tol", "1e-8"), "soe.tol")[0]
    if not 0.0 < soe_tol < 1.0:
        _fail("soe.tol", "must lie in (0, 1)")

    dense_raw = get("output", "dense", "false").lower()
    if dense_raw not in ("true", "false", "yes", "no", "1", "0"):
        _fail("output.dense", f"expected a boolean, got {dense_raw!r}")
    dense = dense_raw in ("true", "yes", "1")

    # cutoff: explicit, else the largest constant chi edge in the data
    raw_cutoff = get("data", "cutoff")
    time_dependent = [e for e in [source, *dirichlet.values()]
                      if e is not None and "t" in e.variables]
    if raw_cutoff is not None:
        cutoff = _floats(raw_cutoff, "data.cutoff")[0]
    else:
        edges = []
        for expr in time_dependent:
            _chi_cutoffs(expr.ast, edges)
        if time_dependent and not edges:
            _fail("data.cutoff", "required: time-dependent data without a "
                  "chi(t, lo, hi) factor")
        cutoff = max(edges, default=0.0)
    if cutoff < 0:
        _fail("data.cutoff", "must be nonnegative")
    first_start = min(lo for lo, _ in windows)
    if cutoff >= first_start:
        _fail("data.cutoff", f"cutoff {cutoff} must precede the first "
              f"window start {first_start}; the fit model needs quiescent "
              "data")

    # probe: finite on the domain, and actually quiescent past the cutoff
    points = _probe_points(kind, resolution, mesh_path)
    probe_times = [0.0, 0.5 * cutoff, max(cutoff - 1e-9, 0.0)]
    quiet_times = [cutoff, 0.5 * (cutoff + first_start), first_start,
                   0.5 * (first_start + horizon), horizon]
    named = [("coefficients.a", coeffs["a"]), ("coefficients.q", coeffs["q"]),
             ("coefficients.rho", coeffs["rho"]), ("data.u0", u0),
             ("data.source", source)]
    named += [(f"data.dirichlet_{side}", expr)
              for side, expr in dirichlet.items()]
    for path, expr in named:
        if expr is None:
            continue
        try:
            for t in probe_times:
                expr(points, t)
            if "t" not in expr.variables:
                continue
            for t in quiet_times:
                if np.any(expr(points, t) != 0.0):
                    _fail(path, f"does not vanish at t={t}, after the "
                          f"cutoff {cutoff}")
        except ExpressionError as exc:
            _fail(path, str(exc))

    return ExperimentConfig(
        label=label, kind=kind, resolution=resolution, mesh_path=mesh_path,
        x0=x0, a=coeffs["a"], q=coeffs["q"], rho=coeffs["rho"], u0=u0,
        source=source, dirichlet=dirichlet, cutoff=cutoff, alphas=alphas,
        tau=tau, horizon=horizon, windows=windows, noise_levels=noise,
        seeds=seeds, mode=mode, n_terms=n_terms, n_samples=n_samples,
        soe_tol=soe_tol, dense_output=dense)


def parse_config(path) -> ExperimentConfig:
    """Read and validate an experiment config file.

    Parameters
    ----------
    path : path-like
        INI file as described in the module docstring.

    Returns
    -------
    ExperimentConfig

    Raises
    ------
    ConfigError
        On unreadable files, unknown keys, or any failed validation; the
        message names the offending section.key.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return _parse_text(text, stem)


def preset_config(name) -> ExperimentConfig:
    """Expand a built-in preset by name (see `preset_names`)."""
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; choose from {', '.join(preset_names())}")
    return _parse_text(PRESETS[name], name)


def preset_names():
    """Names of the built-in presets, sorted."""
    return sorted(PRESETS)


_SUB_1D_RECOVERY = """\
[time]
tau = 1e-3
horizon = 100

[recovery]
alphas = 0.25 0.5 0.75
windows = 1:2 1:10 10:20
noise = 0 0.01 0.05
seeds = 0
"""

_DW_RECOVERY = """\
[time]
tau = 1e-3
horizon = 35

[recovery]
alphas = 1.25 1.5 1.75
windows = 1:10 20:30 20:23
noise = 0 0.01 0.05
seeds = 0
"""

PRESETS = {
    "ex4.1i": """\
[domain]
kind = interval
resolution = 200
x0 = 0

[coefficients]
a = 1 + x^2

[data]
u0 = x^2*(1-x)
source = exp(x*(1-x))*x*(1-x)*t*chi(t,0,0.1)
""" + _SUB_1D_RECOVERY + "mode = initial_condition\n",

    "ex4.1ii": """\
[domain]
kind = interval
resolution = 200
x0 = 0

[coefficients]
q = 1 + sin(x)

[data]
source = exp(x^2)*sin(pi*x)*chi(t,0,0.1)
""" + _SUB_1D_RECOVERY + "mode = zero_initial\n",

    "ex4.1iii": """\
[domain]
kind = interval
resolution = 200
x0 = 0

[coefficients]
a = 1 + sin(pi*x)
q = cos(pi*x)

[data]
dirichlet_left = exp(t)*chi(t,0,0.1)
""" + _SUB_1D_RECOVERY + "mode = zero_initial\n",

    "ex4.2i": """\
[domain]
kind = mesh
mesh = builtin:square_hole
x0 = 0, 0.5

[coefficients]
a = 1 + sin(pi*x1)*x2*(1-x2)

[data]
u0 = x1*(1-x1)*sin(pi*x2)
source = x1*(1-x1)*x2*(1-x2)*t*chi(t,0,0.1)
""" + _SUB_1D_RECOVERY + "mode = initial_condition\n",

    "ex4.2ii": """\
[domain]
kind = square
resolution = 64
x0 = 0, 0.5

[data]
source = sin(pi*x1)*x2^2*(1-x2)*chi(t,0,0.1)
""" + _SUB_1D_RECOVERY + "mode = zero_initial\n",

    "ex4.2iii": """\
[domain]
kind = mesh
mesh = builtin:square_hole
x0 = 0, 0.5

[coefficients]
a = 1 + sin(pi*x1)*sin(pi*x2)

[data]
dirichlet_bottom = x1*(1-x1)*exp(t)*chi(t,0,0.1)
""" + _SUB_1D_RECOVERY + "mode = zero_initial\n",
}

PRESETS["ex4.3i"] = PRESETS["ex4.2i"].replace(_SUB_1D_RECOVERY, _DW_RECOVERY)
PRESETS["ex4.3ii"] = PRESETS["ex4.2ii"].replace(_SUB_1D_RECOVERY, _DW_RECOVERY)
PRESETS["ex4.3iii"] = PRESETS["ex4.2iii"].replace(_SUB_1D_RECOVERY,
                                                  _DW_RECOVERY)
