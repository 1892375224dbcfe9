"""Event-triggered plant/observer loop simulation.

The plant output is transmitted to the observer only at event instants. The
event generator holds the last transmitted sample y(t_k) and monitors the
weighted sampling error eps(t) = beta * y(t_k) - y(t); a new transmission is
triggered as soon as any component satisfies eps_i >= theta * y_i where
theta = alpha*beta + beta - 1 (the closed form of the violation test). The
observer integrates

    d/dt xhat = A xhat + L (beta * y(t_k) - yhat)

between events, plus the known plant input when a feedback gain is active.

Integration is classical fixed-step 4th order with bisection localization of
event times inside a step; grid points stay regular and events appear as
extra samples. When the system carries an equilibrium, states are expressed
in absolute coordinates and integration happens on deviations; with
use_absolute_output the trigger sees C x (absolute), otherwise C (x - eq).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import matcore, posys
from .synth import ObserverDesign, TriggerConfig


class SimulationAbortedError(RuntimeError):
    """Simulation stopped before the horizon; carries the offending time."""

    def __init__(self, time: float, reason: str):
        super().__init__(f"simulation aborted at t={time:.6g}: {reason}")
        self.time = time
        self.reason = reason


@dataclass(frozen=True)
class SimulationConfig:
    x0: np.ndarray
    horizon: float
    step: float
    xhat0: np.ndarray | None = None
    event_time_tol: float | None = None     # None -> step / 1000
    feedback_gain: np.ndarray | None = None  # plant input u = -K (x - eq)
    use_absolute_output: bool = False
    output_floor: float | None = None

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError("horizon must be > 0")
        if not 0.0 < self.step < self.horizon:
            raise ValueError("step must satisfy 0 < step < horizon")
        if self.event_time_tol is not None and not 0.0 < self.event_time_tol <= self.step:
            raise ValueError("event_time_tol must be in (0, step]")
        if self.output_floor is not None and self.output_floor < 0.0:
            raise ValueError("output_floor must be >= 0")

    @property
    def resolved_event_time_tol(self) -> float:
        return self.event_time_tol if self.event_time_tol is not None else self.step * 1e-3


@dataclass
class EventRecord:
    k: int
    t: float
    y: np.ndarray          # sampled output transmitted at t
    iet: float | None      # t - previous event time; None for the first event
    residual: float | None  # trigger-surface value at the localized time


@dataclass
class SimulationTrace:
    times: np.ndarray
    x: np.ndarray          # (T, n)
    xhat: np.ndarray
    e: np.ndarray          # xhat - x
    y: np.ndarray          # (T, r)
    yhat: np.ndarray
    eps: np.ndarray        # beta * y_held - y, with the sample active on [t_k, t)
    event_flags: np.ndarray  # (T,) 1 where a transmission happened at that row
    events: list[EventRecord]
    iets: np.ndarray
    lyapunov: np.ndarray | None
    transmissions: int
    min_epsilon_seen: float


@dataclass
class ZenoReport:
    bound: float
    min_observed_iet: float
    satisfied: bool


@dataclass
class PositivityAudit:
    x_nonneg: bool
    xhat_nonneg: bool
    e_nonneg: bool
    eps_nonneg: bool
    worst: dict[str, float]


@dataclass
class SavingsReport:
    event_count: int
    periodic_count: int
    savings_pct: float


def trigger_violated(eps, y, trig: TriggerConfig) -> bool:
    """Closed violation test: any component with eps_i >= theta * y_i."""
    ev = matcore.as_vector(eps, "eps")
    yv = matcore.as_vector(y, "y")
    if ev.shape != yv.shape:
        raise ValueError("eps and y must have equal length")
    return bool(np.any(ev >= trig.threshold_coeff * yv))


def min_iet_bound(a, alpha: float) -> float:
    """Guaranteed lower bound on inter-execution times: alpha/((alpha+1)||a||)."""
    if not alpha > 0.0:
        raise ValueError("alpha must be > 0")
    norm = matcore.spectral_norm(a)
    if norm == 0.0:
        raise ValueError("bound undefined for the zero matrix")
    return alpha / ((alpha + 1.0) * norm)


def iet_curve(a, alphas) -> list[tuple[float, float]]:
    """(alpha, bound) pairs, sorted ascending in alpha."""
    vals = matcore.as_vector(alphas, "alphas")
    if np.any(vals <= 0.0):
        raise ValueError("all alphas must be > 0")
    return [(float(al), min_iet_bound(a, float(al))) for al in np.sort(vals)]


def simulate(
    sys: posys.PositiveLinearSystem,
    design: ObserverDesign,
    trig: TriggerConfig,
    cfg: SimulationConfig,
) -> SimulationTrace:
    """Run the coupled loop over [0, horizon].

    The first transmission is forced at t=0. Every grid point and every
    localized event time gets a trace row; event rows carry the pre-refresh
    eps (the trigger-surface values). Aborts with SimulationAbortedError on
    non-finite state or when the trigger fires continuously (some output
    component <= 0 with no output_floor set).
    """
    n, r = sys.n, sys.r
    a_mat, c_mat = sys.A, sys.C
    if design.L.shape != (n, r):
        raise ValueError("design gain shape does not match the system")
    x0 = matcore.as_vector(cfg.x0, "x0")
    if x0.shape != (n,):
        raise ValueError(f"x0 must have length {n}")
    xhat0 = (
        np.zeros(n) if cfg.xhat0 is None else matcore.as_vector(cfg.xhat0, "xhat0")
    )
    if xhat0.shape != (n,):
        raise ValueError(f"xhat0 must have length {n}")

    eq = sys.equilibrium if sys.equilibrium is not None else np.zeros(n)
    if cfg.use_absolute_output and sys.equilibrium is None:
        raise ValueError("use_absolute_output requires a system equilibrium")
    ofs = c_mat @ eq if cfg.use_absolute_output else np.zeros(r)

    if cfg.feedback_gain is not None:
        if sys.B is None:
            raise ValueError("feedback_gain requires an input matrix B")
        k_mat = matcore.as_matrix(cfg.feedback_gain, "feedback_gain")
        if k_mat.shape != (sys.m, n):
            raise ValueError(f"feedback_gain must be ({sys.m},{n})")
        bk = sys.B @ k_mat
    else:
        bk = np.zeros((n, n))

    gain = design.L
    beta = trig.beta
    theta = trig.threshold_coeff
    floor = cfg.output_floor
    tol = cfg.resolved_event_time_tol

    big = np.block(
        [[a_mat - bk, np.zeros((n, n))], [-bk, a_mat - gain @ c_mat]]
    )

    def forcing(y_held):
        v = np.zeros(2 * n)
        v[n:] = gain @ (beta * y_held - ofs)
        return v

    def rk4(z, h, v):
        # overflow here is handled by the non-finite abort in the main loop
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = big @ z + v
            k2 = big @ (z + 0.5 * h * k1) + v
            k3 = big @ (z + 0.5 * h * k2) + v
            k4 = big @ (z + h * k3) + v
            return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def out_y(z):
        return c_mat @ z[:n] + ofs

    def violated(eps, y):
        if floor is not None and np.all(np.abs(y) < floor):
            return False
        return bool(np.any(eps >= theta * y))

    times_l: list[float] = []
    x_l: list[np.ndarray] = []
    xhat_l: list[np.ndarray] = []
    e_l: list[np.ndarray] = []
    y_l: list[np.ndarray] = []
    yhat_l: list[np.ndarray] = []
    eps_l: list[np.ndarray] = []
    flag_l: list[int] = []

    def record(t, z, y_held, is_event):
        yv = out_y(z)
        times_l.append(t)
        x_l.append(z[:n] + eq)
        xhat_l.append(z[n:] + eq)
        e_l.append(z[n:] - z[:n])
        y_l.append(yv)
        yhat_l.append(c_mat @ z[n:] + ofs)
        eps_l.append(beta * y_held - yv)
        flag_l.append(1 if is_event else 0)

    z = np.concatenate([x0 - eq, xhat0 - eq])
    y_held = out_y(z).copy()
    events = [EventRecord(0, 0.0, y_held.copy(), None, None)]
    record(0.0, z, y_held, True)

    def bisect(z_a, t_a, t_b, v):
        # invariant: no violation at (t_a, z_a); violation at t_b from z_a
        while t_b - t_a > tol:
            t_m = 0.5 * (t_a + t_b)
            z_m = rk4(z_a, t_m - t_a, v)
            y_m = out_y(z_m)
            if violated(beta * y_held - y_m, y_m):
                t_b = t_m
            else:
                t_a, z_a = t_m, z_m
        return t_b, rk4(z_a, t_b - t_a, v)

    t = 0.0
    n_steps = int(np.ceil(cfg.horizon / cfg.step - 1e-9))
    for i in range(n_steps):
        t_end = min((i + 1) * cfg.step, cfg.horizon)
        while t < t_end - 1e-15:
            v = forcing(y_held)
            z_try = rk4(z, t_end - t, v)
            if not np.all(np.isfinite(z_try)):
                raise SimulationAbortedError(t_end, "non-finite state (overflow)")
            y_try = out_y(z_try)
            if not violated(beta * y_held - y_try, y_try):
                z, t = z_try, t_end
                record(t, z, y_held, False)
                break
            t_star, z_star = bisect(z, t, t_end, v)
            y_star = out_y(z_star)
            eps_star = beta * y_held - y_star
            record(t_star, z_star, y_held, True)
            events.append(
                EventRecord(
                    k=len(events),
                    t=t_star,
                    y=y_star.copy(),
                    iet=t_star - events[-1].t,
                    residual=float(np.max(eps_star - theta * y_star)),
                )
            )
            y_held = y_star.copy()
            if violated(beta * y_held - y_star, y_star):
                raise SimulationAbortedError(
                    t_star,
                    "trigger violated immediately after refresh (output component"
                    " <= 0); consider setting output_floor",
                )
            z, t = z_star, t_star

    times = np.asarray(times_l)
    trace = SimulationTrace(
        times=times,
        x=np.asarray(x_l),
        xhat=np.asarray(xhat_l),
        e=np.asarray(e_l),
        y=np.asarray(y_l),
        yhat=np.asarray(yhat_l),
        eps=np.asarray(eps_l),
        event_flags=np.asarray(flag_l, dtype=int),
        events=events,
        iets=np.asarray([ev.iet for ev in events[1:]]),
        lyapunov=None,
        transmissions=len(events),
        min_epsilon_seen=float(np.min(eps_l)),
    )
    trace.lyapunov, _ = lyapunov_trace(trace, design)
    return trace


def lyapunov_trace(trace: SimulationTrace, design: ObserverDesign) -> tuple[np.ndarray, bool]:
    """V(t) = x^T P x + e^T Q e along the trace, and its monotonicity.

    monotone is True iff V never increases by more than a 1e-8 relative slip
    between consecutive samples. V uses the recorded x, so for absolute-mode
    runs around a nonzero operating point it is a diagnostic, not a
    certificate.
    """
    if trace.x.shape[1] != design.P_diag.shape[0]:
        raise ValueError("trace and design dimensions do not match")
    v = np.einsum("ti,i,ti->t", trace.x, design.P_diag, trace.x) + np.einsum(
        "ti,i,ti->t", trace.e, design.Q_diag, trace.e
    )
    monotone = bool(np.all(v[1:] <= v[:-1] * (1.0 + 1e-8)))
    return v, monotone


def positivity_audit(trace: SimulationTrace, tol: float = 1e-9) -> PositivityAudit:
    """Elementwise minima of x, xhat, e, eps over the whole trace vs -tol."""
    mins = {
        "x": float(np.min(trace.x)),
        "xhat": float(np.min(trace.xhat)),
        "e": float(np.min(trace.e)),
        "eps": float(np.min(trace.eps)),
    }
    return PositivityAudit(
        x_nonneg=mins["x"] >= -tol,
        xhat_nonneg=mins["xhat"] >= -tol,
        e_nonneg=mins["e"] >= -tol,
        eps_nonneg=mins["eps"] >= -tol,
        worst=mins,
    )


def zeno_report(trace: SimulationTrace, a, alpha: float, event_time_tol: float) -> ZenoReport:
    """Observed minimum inter-execution time against the guaranteed bound."""
    bound = min_iet_bound(a, alpha)
    observed = float(np.min(trace.iets)) if trace.iets.size else float("inf")
    return ZenoReport(
        bound=bound,
        min_observed_iet=observed,
        satisfied=observed >= bound - event_time_tol,
    )


def savings_report(trace: SimulationTrace, periodic_interval: float) -> SavingsReport:
    """Transmissions saved versus periodic sampling of the same horizon."""
    if not periodic_interval > 0.0:
        raise ValueError("periodic_interval must be > 0")
    horizon = float(trace.times[-1])
    periodic = int(np.floor(horizon / periodic_interval + 1e-12))
    if periodic == 0:
        raise ValueError("periodic_interval exceeds the horizon")
    pct = 100.0 * (1.0 - trace.transmissions / periodic)
    return SavingsReport(trace.transmissions, periodic, pct)


def write_trace_csv(trace: SimulationTrace, path) -> None:
    """CSV columns: t, x1..xn, xhat1..xhatn, y1..yr, eps1..epsr, event."""
    n = trace.x.shape[1]
    r = trace.y.shape[1]
    header = (
        ["t"]
        + [f"x{i+1}" for i in range(n)]
        + [f"xhat{i+1}" for i in range(n)]
        + [f"y{i+1}" for i in range(r)]
        + [f"eps{i+1}" for i in range(r)]
        + ["event"]
    )
    lines = [",".join(header)]
    for idx in range(trace.times.shape[0]):
        cells = [format(trace.times[idx], ".17g")]
        cells += [format(vv, ".17g") for vv in trace.x[idx]]
        cells += [format(vv, ".17g") for vv in trace.xhat[idx]]
        cells += [format(vv, ".17g") for vv in trace.y[idx]]
        cells += [format(vv, ".17g") for vv in trace.eps[idx]]
        cells.append(str(int(trace.event_flags[idx])))
        lines.append(",".join(cells))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_events_json(trace: SimulationTrace, path) -> None:
    """Event log: array of {k, t_k, y_k, iet}."""
    doc = [
        {
            "k": ev.k,
            "t_k": ev.t,
            "y_k": [float(vv) for vv in ev.y],
            "iet": ev.iet,
        }
        for ev in trace.events
    ]
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
