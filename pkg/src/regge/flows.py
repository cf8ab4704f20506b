"""Einstein flows on the cone of metrics.

Seven right-hand sides are provided: the plain gradient flow
``dz/dt = -2 Ein`` and six normalized variants that subtract a multiple of
``z`` (type I) or of the volume gradient ``v`` (type II) so that one of
|z|^2, V or R stays constant. Einstein metrics of the matching type are
fixed points of the normalized flows.

Integration uses classical RK4 with step doubling for the local error
estimate. A step is also rejected, and the step size halved, when a trial
point leaves the metric cone or a conserved quantity drifts too far.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .complex import SimplicialComplex
from .curvature import CurvatureReport, DenominatorZero, curvature_report
from .io import dumps
from .metric import MetricError, boundary_gauge, is_valid

__all__ = [
    "FlowKind",
    "FlowError",
    "InvalidInitialMetric",
    "CONSERVED",
    "rhs",
    "StepControl",
    "StopCriteria",
    "FlowTrajectory",
    "integrate",
    "ExactEinsteinSolution",
    "exact_einstein_flow",
    "rescale_to_normalized",
    "scaling_covariance_check",
    "a_priori_R_bound",
]


class FlowKind(str, Enum):
    UNNORMALIZED = "Unnormalized"
    TYPE_I_1 = "TypeI_1"
    TYPE_I_2 = "TypeI_2"
    TYPE_I_3 = "TypeI_3"
    TYPE_II_1 = "TypeII_1"
    TYPE_II_2 = "TypeII_2"
    TYPE_II_3 = "TypeII_3"

    @classmethod
    def parse(cls, name) -> "FlowKind":
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "_").lower()
        for k in cls:
            if k.value.lower() == key or k.name.lower() == key:
                return k
        raise ValueError(f"unknown flow kind {name!r}")

    @property
    def family(self) -> str | None:
        if self is FlowKind.UNNORMALIZED:
            return None
        return "II" if "II" in self.value else "I"


# Quantities each flow keeps constant; the integrator monitors their drift.
CONSERVED = {
    FlowKind.UNNORMALIZED: (),
    FlowKind.TYPE_I_1: ("norm_z_sq",),
    FlowKind.TYPE_I_2: ("V",),
    FlowKind.TYPE_I_3: ("R",),
    FlowKind.TYPE_II_1: ("norm_z_sq",),
    FlowKind.TYPE_II_2: ("V",),
    FlowKind.TYPE_II_3: ("R",),
}


class FlowError(RuntimeError):
    pass


class InvalidInitialMetric(FlowError):
    pass


def _rhs_from_report(kind: FlowKind, r: CurvatureReport) -> np.ndarray:
    k = r.kappa
    if kind is FlowKind.UNNORMALIZED:
        return -2.0 * r.Ein
    if kind is FlowKind.TYPE_I_1:
        return -2.0 * (r.Ein - k.I1 * r.z)
    if kind is FlowKind.TYPE_I_2:
        return -2.0 * (r.Ein - k.I2 * r.z)
    if kind is FlowKind.TYPE_I_3:
        if k.I3 is None:
            raise DenominatorZero("total scalar curvature vanishes")
        return -2.0 * (r.Ein - k.I3 * r.z)
    if kind is FlowKind.TYPE_II_1:
        return -2.0 * (r.Ein - k.II1 * r.v)
    if kind is FlowKind.TYPE_II_2:
        return -2.0 * (r.Ein - k.II2 * r.v)
    if kind is FlowKind.TYPE_II_3:
        if k.II3 is None:
            raise DenominatorZero("<v, Ein> vanishes")
        return -2.0 * (r.Ein - k.II3 * r.v)
    raise ValueError(kind)


def rhs(kind, K: SimplicialComplex, z, report: CurvatureReport | None = None) -> np.ndarray:
    """Right-hand side of the flow ``kind`` at ``z``.

    Type I_k flows are ``-2 (Ein - kappa_I^(k) z)`` and type II_k flows are
    ``-2 (Ein - kappa_II^(k) v)``, with the estimators of
    :func:`regge.curvature.kappa_estimates`.
    """
    kind = FlowKind.parse(kind)
    r = report if report is not None else curvature_report(K, z)
    return _rhs_from_report(kind, r)


@dataclass
class StepControl:
    """Step-size policy.

    ``h0``, ``h_min`` and ``h_max`` default to multiples of the natural time
    scale ``|z0|^((6-n)/2)``, so that runs from ``z0`` and ``lambda z0`` take
    corresponding steps. ``local_tol`` bounds the relative local error per
    step, ``drift_tol`` the relative drift of conserved quantities per unit
    time. With ``adaptive=False`` the step stays at ``h0`` unless a trial
    point is rejected.
    """
    h0: float | None = None
    h_min: float | None = None
    h_max: float | None = None
    local_tol: float = 1e-10
    drift_tol: float = 1e-8
    adaptive: bool = True
    max_steps: int = 1_000_000

    def resolved(self, n: int, z0: np.ndarray):
        scale = float(np.linalg.norm(z0)) ** ((6 - n) / 2)
        h0 = self.h0 if self.h0 is not None else 1e-3 * scale
        h_min = self.h_min if self.h_min is not None else 1e-9 * scale
        h_max = self.h_max if self.h_max is not None else 1e-1 * scale
        return h0, h_min, h_max


@dataclass
class StopCriteria:
    residual_tol: float = 1e-9
    d_min: float | None = None  # default: 1e-6 * d(z0)


MONITORS = ("R", "V", "norm_z_sq", "d", "delta_I1", "delta_II1")


@dataclass
class FlowTrajectory:
    kind: FlowKind
    n: int
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    monitors: dict = field(default_factory=lambda: {m: [] for m in MONITORS})
    termination: str = "MaxTime"
    message: str = ""
    rejected: int = 0

    @property
    def steps(self) -> int:
        return max(len(self.times) - 1, 0)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @property
    def z(self) -> np.ndarray:
        return np.asarray(self.states)

    def monitor(self, name) -> np.ndarray:
        return np.asarray(self.monitors[name])

    def _record(self, t, z, r: CurvatureReport, d):
        self.times.append(float(t))
        self.states.append(np.array(z, dtype=float))
        m = self.monitors
        m["R"].append(r.R)
        m["V"].append(r.V)
        m["norm_z_sq"].append(r.norm_z_sq)
        m["d"].append(d)
        m["delta_I1"].append(r.delta.I1)
        m["delta_II1"].append(r.delta.II1)

    def summary(self) -> dict:
        out = {"kind": self.kind.value, "termination": self.termination,
               "message": self.message, "steps": self.steps,
               "rejected": self.rejected}
        if self.times:
            out["t_final"] = self.times[-1]
            for name in MONITORS:
                out[f"{name}_final"] = self.monitors[name][-1]
        return out

    def write_csv(self, path, max_rows: int = 10_000):
        """Write the sampled trajectory, decimated to at most ``max_rows``
        rows (first and last rows always kept), plus a JSON sidecar with
        the termination reason at ``<path>.json``."""
        rows = len(self.times)
        if rows > max_rows:
            keep = np.unique(np.linspace(0, rows - 1, max_rows).round().astype(int))
        else:
            keep = np.arange(rows)
        ne = len(self.states[0]) if self.states else 0
        header = ["t", *MONITORS] + [f"z_{i}" for i in range(ne)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in keep:
                row = [self.times[i]] + [self.monitors[m][i] for m in MONITORS]
                row += list(self.states[i])
                w.writerow([repr(float(x)) for x in row])
        with open(f"{path}.json", "w") as fh:
            fh.write(dumps(self.summary()))
            fh.write("\n")


class _Rejected(Exception):
    pass


def _converged(kind: FlowKind, r: CurvatureReport, tol: float) -> bool:
    n = r.n
    norm_E = float(np.linalg.norm(r.Ein))
    floor = math.sqrt(r.norm_z_sq) ** ((n - 4) / 2)
    if kind.family is None:
        return norm_E <= tol * floor
    res = r.delta.I1 if kind.family == "I" else r.delta.II1
    return math.sqrt(max(res, 0.0)) <= tol * (norm_E + floor)


def _closing_in(traj: FlowTrajectory, horizon: float) -> bool:
    """Whether the recorded d(z) extrapolates linearly to zero within
    ``horizon`` time units."""
    d, t = traj.monitors["d"], traj.times
    if len(d) < 2 or t[-1] <= t[-2]:
        return False
    slope = (d[-1] - d[-2]) / (t[-1] - t[-2])
    return slope < 0 and d[-1] / -slope <= horizon


def integrate(kind, K: SimplicialComplex, z0, t_end: float,
              step: StepControl | None = None, stop: StopCriteria | None = None,
              callback: Callable[[float, np.ndarray], None] | None = None) -> FlowTrajectory:
    """Integrate a flow from ``z0`` up to ``t_end``.

    Termination reasons: ``Converged`` (Einstein residual below
    ``residual_tol``; for the plain flow, Einstein-flat), ``MaxTime``,
    ``MaxSteps``, ``BoundaryHit`` (``d(z) < d_min`` or no admissible step
    above ``h_min`` because trial points leave the cone),
    ``DenominatorZero`` and ``StepUnderflow`` (error or drift control
    cannot be met above ``h_min``). A step-size collapse counts as a
    boundary hit when ``d(z)`` is falling fast enough to reach zero within
    ``1000 h_min``. Every accepted step is recorded.
    """
    kind = FlowKind.parse(kind)
    step = step or StepControl()
    stop = stop or StopCriteria()
    z = np.array(z0, dtype=float)
    if z.shape != (K.n_edges,) or not is_valid(K, z):
        raise InvalidInitialMetric("initial metric is not in the metric cone")
    n = K.dim
    h, h_min, h_max = step.resolved(n, z)
    h_fixed = h
    d0 = boundary_gauge(K, z).d
    d_min = stop.d_min if stop.d_min is not None else 1e-6 * d0
    conserved = CONSERVED[kind]

    traj = FlowTrajectory(kind, n)
    rep = curvature_report(K, z)
    traj._record(0.0, z, rep, d0)
    try:
        f0 = _rhs_from_report(kind, rep)
    except DenominatorZero as exc:
        traj.termination, traj.message = "DenominatorZero", str(exc)
        return traj
    q0 = {c: abs(traj.monitors[c][0]) or 1.0 for c in conserved}

    def f(x):
        try:
            r = curvature_report(K, x)
        except (MetricError, np.linalg.LinAlgError) as exc:
            raise _Rejected("boundary") from exc
        return _rhs_from_report(kind, r)

    def rk4(x, hh, k1=None):
        k1 = f(x) if k1 is None else k1
        k2 = f(x + 0.5 * hh * k1)
        k3 = f(x + 0.5 * hh * k2)
        k4 = f(x + hh * k3)
        return x + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    t = 0.0
    accepted = 0
    last_reason = ""
    while True:
        if _converged(kind, rep, stop.residual_tol):
            traj.termination = "Converged"
            break
        if t >= t_end * (1 - 1e-14):
            traj.termination = "MaxTime"
            break
        if accepted >= step.max_steps:
            traj.termination = "MaxSteps"
            break
        hh = min(h, t_end - t)
        try:
            if step.adaptive:
                full = rk4(z, hh, f0)
                half = rk4(z, 0.5 * hh, f0)
                two = rk4(half, 0.5 * hh)
                err = float(np.linalg.norm(two - full)) / (15.0 * float(np.linalg.norm(z)))
                if err > step.local_tol:
                    raise _Rejected("local error")
            else:
                two, err = rk4(z, hh, f0), 0.0
            if not is_valid(K, two):
                raise _Rejected("boundary")
            try:
                new_rep = curvature_report(K, two)
            except (MetricError, np.linalg.LinAlgError) as exc:
                raise _Rejected("boundary") from exc
            values = {"R": new_rep.R, "V": new_rep.V, "norm_z_sq": new_rep.norm_z_sq}
            for c in conserved:
                drift = abs(values[c] - traj.monitors[c][-1]) / q0[c]
                if drift > step.drift_tol * max(hh, 1e-300) and drift > 1e-15:
                    raise _Rejected(f"{c} drift")
            try:
                new_f = _rhs_from_report(kind, new_rep)
            except DenominatorZero as exc:
                traj.termination, traj.message = "DenominatorZero", str(exc)
                t += hh
                z, rep = two, new_rep
                traj._record(t, z, rep, boundary_gauge(K, z).d)
                break
        except _Rejected as exc:
            last_reason = str(exc)
            traj.rejected += 1
            h = 0.5 * hh
            if h < h_min:
                near = last_reason == "boundary" or _closing_in(traj, 1e3 * h_min)
                traj.termination = "BoundaryHit" if near else "StepUnderflow"
                traj.message = f"step size fell below {h_min:g} ({last_reason})"
                break
            continue

        t += hh
        z, rep, f0 = two, new_rep, new_f
        accepted += 1
        d = boundary_gauge(K, z).d
        traj._record(t, z, rep, d)
        if callback is not None:
            callback(t, z)
        if d < d_min:
            traj.termination = "BoundaryHit"
            traj.message = f"d(z) = {d:g} below {d_min:g}"
            break
        last_reason = ""
        if step.adaptive and err < step.local_tol / 32:
            h = min(2 * hh, h_max)
        else:
            h = hh if step.adaptive else h_fixed
    return traj


# -- exact solutions --------------------------------------------------------

@dataclass(frozen=True)
class ExactEinsteinSolution:
    """Scale factor of the plain flow started at a type I Einstein metric
    with constant ``kappa``: ``z(t) = f(t) z(0)``."""
    n: int
    kappa: float

    @property
    def t_max(self) -> float:
        c = (self.n - 6) * self.kappa
        return math.inf if c >= 0 else -1.0 / c

    def f(self, t):
        t = np.asarray(t, dtype=float)
        if self.n == 6:
            return np.exp(-2.0 * self.kappa * t)
        c = (self.n - 6) * self.kappa
        return (1.0 + c * t) ** (-2.0 / (self.n - 6))

    def kappa_at(self, t):
        return self.f(t) ** ((self.n - 6) / 2) * self.kappa


def exact_einstein_flow(n: int, kappa: float) -> ExactEinsteinSolution:
    if n < 3:
        raise ValueError("n must be at least 3")
    return ExactEinsteinSolution(n, float(kappa))


def a_priori_R_bound(R0: float, t, delta_lower: float):
    """Upper bound ``R0 - 2 t N`` for R along a TypeI_1 run, where ``N`` is a
    caller-supplied lower bound for the deviation measure on the sphere of
    the initial radius."""
    if delta_lower < 0:
        raise ValueError("the lower bound must be non-negative")
    return R0 - 2.0 * np.asarray(t, dtype=float) * delta_lower


# -- rescaling --------------------------------------------------------------

def _cumhermite(y, dy, x):
    """Cumulative integral of samples with known derivatives (cubic
    Hermite rule, fourth order)."""
    h = np.diff(x)
    pieces = 0.5 * h * (y[1:] + y[:-1]) + h**2 / 12.0 * (dy[:-1] - dy[1:])
    out = np.zeros_like(y)
    out[1:] = np.cumsum(pieces)
    return out


def rescale_to_normalized(traj: FlowTrajectory, K: SimplicialComplex) -> FlowTrajectory:
    """Map a plain-flow trajectory to a solution of the TypeI_1 flow.

    With ``c(t) = exp((n-2) int_0^t R/|z|^2 ds)`` and
    ``t~(t) = int_0^t c^((6-n)/2) ds`` the path ``c(t) z(t)`` solves the
    TypeI_1 equation in the time ``t~``. The integrals use the cubic
    Hermite rule on the recorded steps, with derivatives taken from the
    plain flow ``dz/dt = -2 Ein``.
    """
    if traj.kind is not FlowKind.UNNORMALIZED:
        raise FlowError("rescaling expects a trajectory of the plain flow")
    n = traj.n
    t = traj.t
    reports = [curvature_report(K, z) for z in traj.states]
    g = np.array([r.R / r.norm_z_sq for r in reports])
    # d/dt (R / |z|^2) along dz/dt = -2 Ein
    dg = np.array([(-2.0 * (r.Ein @ r.Ein) * r.norm_z_sq + 4.0 * r.R * (r.z @ r.Ein))
                   / r.norm_z_sq**2 for r in reports])
    log_c = (n - 2) * _cumhermite(g, dg, t)
    c = np.exp(log_c)
    m = (6 - n) / 2
    w = c**m
    tt = _cumhermite(w, m * (n - 2) * g * w, t)
    out = FlowTrajectory(FlowKind.TYPE_I_1, n, termination=traj.termination,
                         message="rescaled from the plain flow")
    for ti, ci, zi in zip(tt, c, traj.states):
        zt = ci * zi
        out._record(ti, zt, curvature_report(K, zt), boundary_gauge(K, zt).d)
    return out


# -- scaling covariance -----------------------------------------------------

def _hermite(t_nodes, y_nodes, dy_nodes, tq):
    """Cubic Hermite interpolation of vector samples at times ``tq``."""
    idx = np.clip(np.searchsorted(t_nodes, tq) - 1, 0, len(t_nodes) - 2)
    out = []
    for q, i in zip(np.atleast_1d(tq), np.atleast_1d(idx)):
        t0, t1 = t_nodes[i], t_nodes[i + 1]
        hh = t1 - t0
        s = (q - t0) / hh
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        out.append(h00 * y_nodes[i] + h10 * hh * dy_nodes[i]
                   + h01 * y_nodes[i + 1] + h11 * hh * dy_nodes[i + 1])
    return np.array(out)


def scaling_covariance_check(kind, K: SimplicialComplex, z0, lam: float,
                             t_end: float = 0.5, tol: float = 1e-5,
                             step: StepControl | None = None):
    """Compare the run from ``lam * z0`` with ``lam * z(lam^((n-6)/2) t)``.

    Both runs are integrated; the reference run is interpolated (cubic
    Hermite with exact derivatives) at the mapped sample times. Returns
    ``(ok, max_relative_deviation)``.
    """
    kind = FlowKind.parse(kind)
    n = K.dim
    mu = lam ** ((n - 6) / 2)
    z0 = np.asarray(z0, dtype=float)
    step = step or StepControl()
    ref = integrate(kind, K, z0, mu * t_end, step=step)
    scaled = integrate(kind, K, lam * z0, t_end, step=step)
    t_ref = ref.t
    y_ref = ref.z
    dy_ref = np.array([rhs(kind, K, y) for y in y_ref])
    ts = scaled.t
    mapped = np.clip(mu * ts, t_ref[0], t_ref[-1])
    pred = lam * _hermite(t_ref, y_ref, dy_ref, mapped)
    got = scaled.z
    dev = np.linalg.norm(got - pred, axis=1) / np.linalg.norm(got, axis=1)
    worst = float(dev.max())
    return worst <= tol, worst
