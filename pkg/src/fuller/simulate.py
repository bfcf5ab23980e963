"""Bang-bang integration with localized switching events and chatter detection.

Both integrators freeze the control between events: extremals use
``u_i = sign(phi_i) K(t)`` with ``phi_i = <p, g_i>``, closed loops use
``u_i = -sign(s_i(x)) K(t)``.  Sign changes are probed inside every accepted
RK45 step and localized by bisection on the step's dense output.  A switch
interval below the Zeno floor stops the run: that is how accumulating
switches show up at finite precision.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import RK45

from .polyalg import Poly, lambdify
from .system import AffineSystem, AugmentedSystem, ExtremalPoint, augment, hamiltonian_eval


class InsufficientSwitches(ValueError):
    pass


@dataclass(frozen=True)
class SimOptions:
    rtol: float = 1e-11
    atol: float = 1e-14
    tol_event: float = 1e-13
    zeno_floor: float = 1e-10
    tol_graze: float = 1e-12
    max_step: float = np.inf
    sample_dt: float | None = None
    target_radius: float | None = None
    max_events: int = 10_000
    probes: int = 8

    def __post_init__(self):
        for name in ("rtol", "atol", "tol_event", "zeno_floor", "tol_graze", "max_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.sample_dt is not None and not self.sample_dt > 0:
            raise ValueError("sample_dt must be strictly positive")


@dataclass(frozen=True)
class SwitchEvent:
    t: float
    input_index: int
    direction: int
    phi_slope: float


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    p: np.ndarray | None
    u: np.ndarray
    events: list[SwitchEvent]
    terminated_by: str
    message: str = ""
    grazes: list[SwitchEvent] = field(default_factory=list)

    @property
    def samples(self) -> list[ExtremalPoint]:
        return [
            ExtremalPoint(t=float(t), z=z, p=None if self.p is None else self.p[j], u=self.u[j])
            for j, (t, z) in enumerate(zip(self.t, self.z))
        ]

    def events_for(self, i: int) -> list[SwitchEvent]:
        return [e for e in self.events if e.input_index == i]

    def hamiltonian(self, aug: AugmentedSystem) -> np.ndarray:
        if self.p is None:
            raise ValueError("feedback trajectories carry no adjoint")
        return np.array([hamiltonian_eval(aug, z, p, u) for z, p, u in zip(self.z, self.p, self.u)])

    def write_csv(self, path: str | Path) -> None:
        N, m = self.z.shape[1], self.u.shape[1]
        header = ["t"] + [f"z{j}" for j in range(N)]
        if self.p is not None:
            header += [f"p{j}" for j in range(N)]
        header += [f"u{j}" for j in range(m)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for j, t in enumerate(self.t):
                row = [t, *self.z[j]]
                if self.p is not None:
                    row += list(self.p[j])
                row += list(self.u[j])
                w.writerow([_g17(v) for v in row])

    def write_events_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "input", "direction", "slope"])
            for e in self.events:
                w.writerow([_g17(e.t), e.input_index, e.direction, _g17(e.phi_slope)])


def _g17(v) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# Event-driven integration core


def _integrate(
    rhs: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
    switching: Callable[[np.ndarray], np.ndarray],
    control: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    horizon: float,
    opts: SimOptions,
    stop: Callable[[np.ndarray], bool] | None = None,
):
    y = np.asarray(y0, dtype=float)
    t = 0.0
    sigma = np.sign(switching(y))
    suppressed = np.zeros(sigma.shape, dtype=bool)
    last_event = [None] * sigma.size
    phi_scale = max(1.0, float(np.abs(switching(y)).max(initial=0.0)))
    ts, ys, us = [t], [y.copy()], [control(t, sigma)]
    events: list[SwitchEvent] = []
    grazes: list[SwitchEvent] = []

    def record(tt, yy):
        if tt > ts[-1]:
            ts.append(tt)
            ys.append(np.array(yy, dtype=float))
            us.append(control(tt, sigma))

    def mismatch(phi):
        s = np.sign(phi)
        return (s != sigma) & (s != 0) & ~suppressed

    def finish(reason, msg=""):
        return (np.array(ts), np.array(ys), np.array(us), events, reason, msg, grazes)

    if stop is not None and stop(y):
        return finish("target-ball")

    while t < horizon:
        solver = RK45(
            lambda tt, yy: rhs(tt, yy, sigma), t, y, horizon,
            rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step,
        )
        restarted = False
        while solver.status == "running":
            msg = solver.step()
            if solver.status == "failed":
                return finish("error", f"integrator failed at t={solver.t:.17g}: {msg}")
            t_old, t_new = solver.t_old, solver.t
            if not np.all(np.isfinite(solver.y)):
                return finish("error", f"non-finite state after t={t_old:.17g}")
            dense = solver.dense_output()
            probe_t = np.linspace(t_old, t_new, opts.probes + 2)[1:]
            hit = None
            prev_t = t_old
            for pt in probe_t:
                phi = switching(dense(pt))
                phi_scale = max(phi_scale, float(np.abs(phi).max(initial=0.0)))
                # lift suppression once a grazed function is back on its own side
                back = suppressed & (np.sign(phi) == sigma)
                suppressed &= ~back
                bad = mismatch(phi)
                if bad.any():
                    hit = (prev_t, pt, np.flatnonzero(bad))
                    break
                prev_t = pt
            if hit is None:
                _record_grid(record, dense, t_old, t_new, opts.sample_dt)
                record(t_new, solver.y)
                if stop is not None and stop(solver.y):
                    return finish("target-ball")
                continue

            t_a0, t_b0, inputs = hit
            crossings = []
            for i in inputs:
                try:
                    ta, tb = _bisect(dense, switching, i, sigma[i], t_a0, t_b0, opts.tol_event, phi_scale)
                except FloatingPointError as exc:
                    return finish("error", str(exc))
                crossings.append((tb, ta, i))
            crossings.sort()
            tb, ta, i = crossings[0]
            _record_grid(record, dense, t_old, ta, opts.sample_dt)
            y_b = dense(tb)
            if stop is not None and stop(y_b):
                record(tb, y_b)
                return finish("target-ball")
            delta = 1e-6 * (t_new - t_old)
            lo, hi = max(t_old, ta - delta), min(t_new, tb + delta)
            slope = float((switching(dense(hi))[i] - switching(dense(lo))[i]) / (hi - lo))
            new_sign = int(np.sign(switching(y_b)[i]))
            ev = SwitchEvent(t=float(tb), input_index=int(i), direction=new_sign, phi_slope=slope)
            if abs(slope) < opts.tol_graze:
                grazes.append(ev)
                suppressed[i] = True
            else:
                sigma = sigma.copy()
                sigma[i] = new_sign
                events.append(ev)
                # simultaneous crossings localized in the same bracket flip too
                for tb2, _, i2 in crossings[1:]:
                    if tb2 - tb <= opts.tol_event:
                        s2 = int(np.sign(switching(y_b)[i2]))
                        if s2 and s2 != sigma[i2]:
                            sigma[i2] = s2
                            events.append(SwitchEvent(float(tb), int(i2), s2, slope))
            t, y = float(tb), y_b
            record(t, y)
            if abs(slope) >= opts.tol_graze:
                prev = last_event[i]
                last_event[i] = t
                if prev is not None and t - prev < opts.zeno_floor:
                    return finish("zeno-floor", f"switch interval {t - prev:.3g} below Zeno floor")
            if len(events) >= opts.max_events:
                return finish("error", f"event budget of {opts.max_events} exhausted at t={t:.17g}")
            if stop is not None and stop(y):
                return finish("target-ball")
            restarted = True
            break
        if not restarted:
            t, y = solver.t, solver.y
    return finish("horizon")


def _record_grid(record, dense, t0, t1, dt):
    if dt is None or t1 <= t0:
        return
    k0 = math.floor(t0 / dt) + 1
    k1 = math.ceil(t1 / dt)
    for k in range(k0, k1):
        tt = k * dt
        if t0 < tt < t1:
            record(tt, dense(tt))


def _bisect(dense, switching, i, sigma_i, ta, tb, tol, scale):
    """Shrink [ta, tb] around the first sign change of component ``i``.

    ``tol`` is a guarantee, not a target: bisection runs to floating-point
    resolution so the restart state sits as close to the crossing as possible.
    """
    for _ in range(200):
        mid = 0.5 * (ta + tb)
        if mid <= ta or mid >= tb:
            break
        s = np.sign(switching(dense(mid))[i])
        if s != sigma_i and s != 0:
            tb = mid
        else:
            ta = mid
    if tb - ta > tol or abs(switching(dense(tb))[i]) > tol * scale:
        raise FloatingPointError(f"event bisection on input {i} stalled in [{ta:.17g}, {tb:.17g}]")
    return ta, tb


# ---------------------------------------------------------------------------
# Public integrators


def integrate_extremal(
    aug: AugmentedSystem,
    z0: Sequence[float],
    p0: Sequence[float],
    lam: float = 1.0,
    horizon: float = 1.0,
    opts: SimOptions | None = None,
) -> Trajectory:
    """Integrate state and adjoint with ``u = sign(phi) K``.

    ``p0`` is either the full augmented adjoint (``p0[0]`` must equal ``-lam``)
    or just the state part, in which case ``-lam`` is prepended.
    """
    opts = opts or SimOptions()
    N, m = aug.N, aug.m
    z0 = np.asarray(z0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if z0.size != N:
        raise ValueError(f"z0 has length {z0.size}, expected {N}")
    if p0.size == N - 1:
        p0 = np.concatenate([[-float(lam)], p0])
    elif p0.size != N:
        raise ValueError(f"p0 has length {p0.size}, expected {N} or {N - 1}")
    elif p0[0] != -lam:
        raise ValueError(f"p0[0] = {p0[0]} but lambda = {lam}: the adjoint stores p[0] = -lambda")
    if lam == 0 and not np.any(p0):
        raise ValueError("(lambda, p0) must not vanish")
    if aug.source is not None:
        aug.source.check_bound(horizon)
    K = lambdify([aug.K], 1, "t")

    f_num, g_num, df_num, dg_num = aug._f_num, aug._g_num, aug._df_num, aug._dg_num

    def control(t, sigma):
        return sigma * K([t])[0]

    def rhs(t, y, sigma):
        z, p = y[:N], y[N:]
        u = control(t, sigma)
        dz = f_num(z) + u @ g_num(z)
        jac = df_num(z) + np.tensordot(u, dg_num(z), axes=1)
        return np.concatenate([dz, -(p @ jac)])

    def switching(y):
        return g_num(y[:N]) @ y[N:]

    ts, ys, us, events, reason, msg, grazes = _integrate(
        rhs, switching, control, np.concatenate([z0, p0]), horizon, opts
    )
    return Trajectory(t=ts, z=ys[:, :N], p=ys[:, N:], u=us, events=events,
                      terminated_by=reason, message=msg, grazes=grazes)


@dataclass(frozen=True)
class FeedbackLaw:
    """``u_i = -sign(s_i(x)) K(t)``.

    Two forms: explicit polynomials ``s_i`` in the state, or the switching-curve
    family ``s_i = x_i + beta * v_i |v_i|`` on a state laid out as ``(x, v)``.
    """

    polys: tuple[Poly, ...] = ()
    beta: float | None = None

    @classmethod
    def polynomial(cls, polys: Sequence[Poly]) -> "FeedbackLaw":
        return cls(polys=tuple(polys))

    @classmethod
    def fuller(cls, beta: float) -> "FeedbackLaw":
        return cls(beta=float(beta))

    def compile(self, sys: AffineSystem) -> Callable[[np.ndarray], np.ndarray]:
        if self.beta is not None:
            if self.polys:
                raise ValueError("a feedback law is either polynomial or switching-curve, not both")
            if sys.n != 2 * sys.m:
                raise ValueError("the x + beta v|v| law needs a state (x, v) with one input per axis")
            k, beta = sys.m, self.beta
            return lambda x: x[:k] + beta * x[k:] * np.abs(x[k:])
        if len(self.polys) != sys.m:
            raise ValueError(f"need one switching polynomial per input ({sys.m})")
        if any(p.nvars != sys.n for p in self.polys):
            raise ValueError(f"switching polynomials must be in the {sys.n} state variables")
        return lambdify(list(self.polys), sys.n, "x")

    def describe(self) -> dict:
        if self.beta is not None:
            return {"form": "x + beta*v*|v|", "beta": self.beta}
        return {"form": "polynomial", "s": [p.render() for p in self.polys]}


def simulate_feedback(
    sys: AffineSystem,
    law: FeedbackLaw,
    x0: Sequence[float],
    horizon: float = 10.0,
    opts: SimOptions | None = None,
) -> Trajectory:
    """Closed loop on the cost-augmented state; ``z[:, 0]`` accumulates the cost."""
    opts = opts or SimOptions()
    aug = augment(sys)
    x0 = np.asarray(x0, dtype=float)
    if x0.size != sys.n:
        raise ValueError(f"x0 has length {x0.size}, expected {sys.n}")
    sys.check_bound(horizon)
    s_fn = law.compile(sys)
    K = lambdify([sys.K], 1, "t")
    f_num, g_num = aug._f_num, aug._g_num

    def control(t, sigma):
        return -sigma * K([t])[0]

    def rhs(t, z, sigma):
        return f_num(z) + control(t, sigma) @ g_num(z)

    def switching(z):
        return s_fn(z[1:])

    stop = None
    if opts.target_radius is not None:
        r = opts.target_radius
        stop = lambda z: float(np.linalg.norm(z[1:])) <= r  # noqa: E731

    ts, zs, us, events, reason, msg, grazes = _integrate(
        rhs, switching, control, np.concatenate([[0.0], x0]), horizon, opts, stop
    )
    return Trajectory(t=ts, z=zs, p=None, u=us, events=events,
                      terminated_by=reason, message=msg, grazes=grazes)


# ---------------------------------------------------------------------------
# Chatter analysis


@dataclass(frozen=True)
class InputChatter:
    input_index: int
    switch_times: tuple[float, ...]
    intervals: tuple[float, ...]
    switch_count: int
    rho: float | None = None
    fit_r2: float | None = None
    accumulation: bool = False
    accumulation_time: float | None = None

    def ratio_spread(self, last: int = 6) -> float:
        """Relative spread of consecutive interval ratios over the last ``last`` intervals."""
        d = np.asarray(self.intervals[-last:])
        ratios = d[1:] / d[:-1]
        return float((ratios.max() - ratios.min()) / abs(ratios.mean()))


@dataclass(frozen=True)
class ChatterReport:
    inputs: tuple[InputChatter, ...]

    @property
    def accumulation(self) -> bool:
        return any(c.accumulation for c in self.inputs)

    def to_json(self) -> dict:
        return {"accumulation": self.accumulation, "inputs": [asdict(c) for c in self.inputs]}


MIN_SWITCHES = 6


def fit_interval_ratio(intervals: Sequence[float]) -> tuple[float, float]:
    """Least-squares line through ``(j, log d_j)``: returns ``(exp(slope), r^2)``."""
    d = np.asarray(intervals, dtype=float)
    j = np.arange(d.size, dtype=float)
    y = np.log(d)
    slope, icept = np.polyfit(j, y, 1)
    resid = y - (slope * j + icept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-24 * max(1.0, float(np.sum(y**2))) else 1.0 - ss_res / ss_tot
    return float(np.exp(slope)), r2


def fit_chatter_times(times_per_input: Sequence[Sequence[float]]) -> ChatterReport:
    if not any(len(ts) >= MIN_SWITCHES for ts in times_per_input):
        raise InsufficientSwitches(f"need at least {MIN_SWITCHES} switches on some input")
    out = []
    for i, ts in enumerate(times_per_input):
        ts = tuple(float(t) for t in ts)
        d = tuple(b - a for a, b in zip(ts, ts[1:]))
        if len(ts) < MIN_SWITCHES:
            out.append(InputChatter(i, ts, d, len(ts)))
            continue
        rho, r2 = fit_interval_ratio(d)
        acc = rho < 1 - 1e-3 and r2 >= 0.99
        t_star = ts[-1] + d[-1] * rho / (1 - rho) if 0 < rho < 1 else None
        out.append(InputChatter(i, ts, d, len(ts), rho, r2, acc, t_star))
    return ChatterReport(tuple(out))


def fit_chatter(traj: Trajectory) -> ChatterReport:
    m = traj.u.shape[1]
    return fit_chatter_times([[e.t for e in traj.events_for(i)] for i in range(m)])


def accumulation_detected(traj: Trajectory) -> bool:
    try:
        return fit_chatter(traj).accumulation
    except InsufficientSwitches:
        return False


# ---------------------------------------------------------------------------
# Junction data


def estimate_junction(
    traj: Trajectory,
    t_c: float,
    K: Poly | None = None,
    input_index: int = 0,
    tol_jump: float = 1e-6,
    window: int = 6,
) -> tuple[int | None, float]:
    """Lowest control-derivative order (<= 3) with different one-sided limits at ``t_c``.

    One-sided values of ``u, u', u'', u'''`` come from cubic least-squares fits
    to the ``window`` samples nearest ``t_c`` on each side.  The jump threshold
    is relative to ``K(t_c)`` when ``K`` is given.
    """
    t = traj.t
    if not t[0] < t_c < t[-1]:
        raise ValueError("t_c must lie strictly inside the trajectory span")
    u = traj.u[:, input_index]
    left = np.flatnonzero(t < t_c)[-window:]
    right = np.flatnonzero(t >= t_c)[:window]
    if left.size < 4 or right.size < 4:
        raise ValueError("need at least four control samples on each side of t_c")
    scale = 1.0 if K is None else abs(float(K.eval([t_c])))
    h = float(max(t_c - t[left[0]], t[right[-1]] - t_c))

    def derivs(idx):
        s = (t[idx] - t_c) / h
        c = np.polyfit(s, u[idx], 3)[::-1]
        return [c[k] * math.factorial(k) / h**k for k in range(4)]

    dl, dr = derivs(left), derivs(right)
    for r in range(4):
        jump = dr[r] - dl[r]
        if abs(jump) > tol_jump * scale * max(1.0, h ** -r):
            return r, float(jump)
    return None, 0.0


# ---------------------------------------------------------------------------
# Oracles used by acceptance and the CLI


def beta_scan(
    x0: Sequence[float] = (1.0, 0.0),
    betas: Sequence[float] | None = None,
    horizon: float = 20.0,
    opts: SimOptions | None = None,
    converged_radius: float = 1e-6,
) -> tuple[float, dict[float, float]]:
    """Pick the switching-curve coefficient minimizing the simulated Fuller cost.

    A run whose final state is not within ``converged_radius`` of the origin
    (sliding on the curve, or horizon exhausted) scores ``inf``.
    """
    from .problems import fuller_classic

    sys = fuller_classic()
    opts = opts or SimOptions()
    if betas is None:
        betas = np.round(np.arange(0.05, 1.5 + 1e-9, 0.005), 3)
    costs = {}
    for b in betas:
        tr = simulate_feedback(sys, FeedbackLaw.fuller(float(b)), x0, horizon, opts)
        ok = tr.terminated_by != "error" and np.linalg.norm(tr.z[-1, 1:]) <= converged_radius
        costs[float(b)] = float(tr.z[-1, 0]) if ok else math.inf
    best = min(costs, key=costs.get)
    return best, costs


def shoot_fuller_adjoint(
    x0: Sequence[float] = (1.0, 0.0),
    horizon: float = 3.0,
    opts: SimOptions | None = None,
    bracket: tuple[float, float] = (-2.0, 0.0),
    points: int = 21,
    min_width: float = 1e-10,
) -> tuple[float, float]:
    """Adjoint ``(p_x, p_v)`` at ``x0`` for the classic Fuller extremal chattering into the origin.

    ``H = 0`` with ``v0 = 0`` fixes ``|p_v| = x0^2 / 2`` with the sign of the first
    bang arc, leaving a scalar search over ``p_x``.  Nested grids rank candidates
    by switch count, then by the cost accumulated over ``horizon``; each level
    keeps two grid steps either side of the winner.
    """
    from .problems import fuller_classic

    aug = augment(fuller_classic())
    x, v = map(float, x0)
    if v != 0.0:
        raise ValueError("this shooting oracle assumes v0 = 0")
    pv = -math.copysign(0.5 * x * x, x)
    opts = opts or SimOptions()

    def key(px):
        tr = integrate_extremal(aug, (0.0, x, v), (px, pv), 1.0, horizon, opts)
        return (-len(tr.events), float(tr.z[-1, 0]))

    lo, hi = bracket
    best = 0.5 * (lo + hi)
    while hi - lo > min_width:
        grid = np.linspace(lo, hi, points)
        keys = [key(px) for px in grid]
        j = min(range(points), key=keys.__getitem__)
        best = float(grid[j])
        step = grid[1] - grid[0]
        lo, hi = best - 2 * step, best + 2 * step
    return best, pv


def save_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
