"""Forward equilibrium rollout with event detection and cost accounting.

Between interventions the closed loop is the scalar linear ODE
``xdot = a_x(t)*x + b_x*q1(t)``, integrated with classical RK4 on a
uniform grid.  A threshold crossing detected between two nodes is
located by bisection on the step, the impulse resets the state exactly
to the interpolated target, and integration resumes.  Running costs are
accumulated per step with Simpson's rule, using a cubic-Hermite
midpoint state so the quadrature matches the integrator's accuracy.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ImpulseBudgetExceeded, NonFiniteStateError
from .model import (
    GameParams,
    StateBox,
    intervention_cost,
    min_intervention_cost,
    player1_impulse_cost,
    validate_box,
)
from .policy import ThresholdPolicy, impulse_map

EVENT_TIME_TOL = 1e-10   # bisection resolution; exits this close to T are discarded
CHATTER_TOL = 1e-8       # two events closer than this abort the rollout
BOUNDARY_MATCH_TOL = 1e-6


@dataclass(frozen=True)
class ImpulseEvent:
    """One intervention: time, states on both sides, size, both players' costs."""

    tau: float
    x_minus: float
    x_plus: float
    xi: float
    cost_p1: float
    cost_p2: float


@dataclass
class AdmissibilityReport:
    ok: bool
    violations: list = field(default_factory=list)


class Trajectory:
    """Piecewise-continuous equilibrium path with events and accumulated costs.

    ``segments`` is a list of (time array, state array) pairs between
    consecutive interventions; an event time closes one segment at
    ``x_minus`` and opens the next at ``x_plus``.
    """

    def __init__(self, segments, events, j1, j2, terminal_state, path, policy, params):
        self.segments = segments
        self.events = events
        self.j1 = j1
        self.j2 = j2
        self.terminal_state = terminal_state
        self._path = path
        self._policy = policy
        self._params = params

    @property
    def start_time(self):
        return float(self.segments[0][0][0])

    def state_at(self, t):
        """State at time ``t``, right-continuous across interventions."""
        t = float(t)
        for seg_t, seg_x in reversed(self.segments):
            if seg_t[0] <= t <= seg_t[-1]:
                return _hermite_state(self._path, seg_t, seg_x, t)
        raise ValueError(f"t={t!r} outside the trajectory span")

    def control_range(self):
        """(min, max) of Player 1's realized control along the path.

        Together with the event sizes this lets a user check, after the
        fact, that the unclamped feedback stayed inside whatever control
        set the model is meant to respect.
        """
        lo, hi = np.inf, -np.inf
        pr = self._params
        for seg_t, seg_x in self.segments:
            u = -(pr.b / pr.r1) * (self._path.p1_at(seg_t) * seg_x
                                   + self._path.q1_at(seg_t))
            u = np.atleast_1d(u)
            lo = min(lo, float(np.min(u)))
            hi = max(hi, float(np.max(u)))
        return lo, hi

    def impulse_range(self):
        """(min, max) impulse size over the events, (0.0, 0.0) if none."""
        if not self.events:
            return 0.0, 0.0
        sizes = [ev.xi for ev in self.events]
        return min(sizes), max(sizes)

    def costs_from(self, t1):
        """Running, impulse and terminal costs accumulated on [t1, T].

        Events with tau == t1 are counted; to measure the tail after a
        jump, pass a time strictly inside the following segment.
        """
        t1 = float(t1)
        if t1 < self.start_time - 1e-12:
            raise ValueError(f"t1={t1!r} precedes the trajectory start")
        pr = self._params
        j1 = j2 = 0.0
        for seg_t, seg_x in self.segments:
            if seg_t[-1] <= t1:
                continue
            if seg_t[0] >= t1:
                a1, a2 = _segment_costs(self._path, pr, seg_t, seg_x)
            else:
                k = int(np.searchsorted(seg_t, t1, side="right")) - 1
                x1 = _hermite_state(self._path, seg_t, seg_x, t1)
                a1, a2 = _step_cost(self._path, pr, t1, x1, seg_t[k + 1],
                                    _hermite_state(self._path, seg_t, seg_x, seg_t[k + 1]))
                if k + 1 < len(seg_t) - 1:
                    b1, b2 = _segment_costs(self._path, pr, seg_t[k + 1:], seg_x[k + 1:])
                    a1, a2 = a1 + b1, a2 + b2
            j1 += a1
            j2 += a2
        for ev in self.events:
            if ev.tau >= t1:
                j1 += ev.cost_p1
                j2 += ev.cost_p2
        xT = self.terminal_state
        j1 += 0.5 * pr.s1 * (xT - pr.rho1) ** 2
        j2 += 0.5 * pr.s2 * (xT - pr.rho2) ** 2
        return j1, j2


def _drift(path, t, x):
    return path.a_x_at(t) * x + path.constants.b_x * path.q1_at(t)


def _hermite_state(path, seg_t, seg_x, t):
    """Cubic Hermite interpolation of the state inside one segment."""
    if t <= seg_t[0]:
        return float(seg_x[0])
    if t >= seg_t[-1]:
        return float(seg_x[-1])
    k = int(np.searchsorted(seg_t, t, side="right")) - 1
    t0, t1 = seg_t[k], seg_t[k + 1]
    x0, x1 = seg_x[k], seg_x[k + 1]
    h = t1 - t0
    s = (t - t0) / h
    f0 = _drift(path, t0, x0)
    f1 = _drift(path, t1, x1)
    h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
    h10 = s * (1.0 - s) ** 2
    h01 = s * s * (3.0 - 2.0 * s)
    h11 = s * s * (s - 1.0)
    return float(h00 * x0 + h10 * h * f0 + h01 * x1 + h11 * h * f1)


def _running_costs(path, params, t, x):
    """Both players' running-cost integrands at (t, x); vectorized."""
    u = -(params.b / params.r1) * (path.p1_at(t) * x + path.q1_at(t))
    g1 = 0.5 * (params.w1 * (x - params.rho1) ** 2 + params.r1 * u * u)
    g2 = 0.5 * params.w2 * (x - params.rho2) ** 2
    return g1, g2


def _step_cost(path, params, t0, x0, t1, x1):
    """Simpson quadrature of both running costs over one step [t0, t1]."""
    h = t1 - t0
    if h <= 0.0:
        return 0.0, 0.0
    f0 = _drift(path, t0, x0)
    f1 = _drift(path, t1, x1)
    xm = 0.5 * (x0 + x1) + 0.125 * h * (f0 - f1)
    tm = t0 + 0.5 * h
    g1a, g2a = _running_costs(path, params, t0, x0)
    g1m, g2m = _running_costs(path, params, tm, xm)
    g1b, g2b = _running_costs(path, params, t1, x1)
    return h / 6.0 * (g1a + 4.0 * g1m + g1b), h / 6.0 * (g2a + 4.0 * g2m + g2b)


def _segment_costs(path, params, seg_t, seg_x):
    """Vectorized Simpson accumulation over all steps of one segment."""
    if len(seg_t) < 2:
        return 0.0, 0.0
    t0, t1 = seg_t[:-1], seg_t[1:]
    x0, x1 = seg_x[:-1], seg_x[1:]
    h = t1 - t0
    f0 = path.a_x_at(t0) * x0 + path.constants.b_x * path.q1_at(t0)
    f1 = path.a_x_at(t1) * x1 + path.constants.b_x * path.q1_at(t1)
    xm = 0.5 * (x0 + x1) + 0.125 * h * (f0 - f1)
    tm = t0 + 0.5 * h
    g1a, g2a = _running_costs(path, params, t0, x0)
    g1m, g2m = _running_costs(path, params, tm, xm)
    g1b, g2b = _running_costs(path, params, t1, x1)
    j1 = float(np.sum(h / 6.0 * (g1a + 4.0 * g1m + g1b)))
    j2 = float(np.sum(h / 6.0 * (g2a + 4.0 * g2m + g2b)))
    return j1, j2


def _rk4_step(path, t, x, h):
    """One explicit RK4 step of the closed-loop dynamics."""
    b_x = path.constants.b_x
    a0 = path.a_x_at(t)
    a1 = path.a_x_at(t + 0.5 * h)
    a2 = path.a_x_at(t + h)
    b0 = b_x * path.q1_at(t)
    b1 = b_x * path.q1_at(t + 0.5 * h)
    b2 = b_x * path.q1_at(t + h)
    k1 = a0 * x + b0
    k2 = a1 * (x + 0.5 * h * k1) + b1
    k3 = a1 * (x + 0.5 * h * k2) + b1
    k4 = a2 * (x + h * k3) + b2
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class _RolloutGrid:
    """Precomputed stepping data for rollouts sharing one (t0, step) grid.

    Each RK4 step of the affine dynamics collapses to x -> m*x + q with
    per-step constants m, q assembled from the stage coefficients, so
    trajectories with different starting states reuse the same arrays.
    """

    def __init__(self, path, policy, params, t0, step):
        T = params.T
        n = max(1, int(math.ceil((T - t0) / step - 1e-12)))
        ts = t0 + step * np.arange(n + 1)
        ts[-1] = T
        self.path = path
        self.policy = policy
        self.params = params
        self.t0 = t0
        self.ts = ts
        h = np.diff(ts)
        mids = ts[:-1] + 0.5 * h
        b_x = path.constants.b_x
        a_n = path.a_x_at(ts)
        b_n = b_x * path.q1_at(ts)
        a_m = path.a_x_at(mids)
        b_m = b_x * path.q1_at(mids)
        a0, a1, a2 = a_n[:-1], a_m, a_n[1:]
        b0, b1, b2 = b_n[:-1], b_m, b_n[1:]
        u1, v1 = a0, b0
        u2 = a1 * (1.0 + 0.5 * h * u1)
        v2 = a1 * (0.5 * h * v1) + b1
        u3 = a1 * (1.0 + 0.5 * h * u2)
        v3 = a1 * (0.5 * h * v2) + b1
        u4 = a2 * (1.0 + h * u3)
        v4 = a2 * (h * v3) + b2
        self.step_mult = 1.0 + h / 6.0 * (u1 + 2.0 * u2 + 2.0 * u3 + u4)
        self.step_add = h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
        self.ell1, self.alpha, self.beta, self.ell2 = policy.thresholds_at(ts)

    def propagate(self, i0, x_start):
        """All node states from grid node i0 onward, starting at x_start."""
        m = self.step_mult[i0:]
        q = self.step_add[i0:]
        prod = np.concatenate(([1.0], np.cumprod(m)))
        shift = np.concatenate(([0.0], np.cumsum(q / prod[1:])))
        return prod * (x_start + shift)


def impulse_bound(params: GameParams, box: StateBox) -> int:
    """Analytic cap on the number of equilibrium interventions over ``box``."""
    k, _, _, _ = impulse_bound_parts(params, box)
    return k


def impulse_bound_parts(params: GameParams, box: StateBox):
    """(K, sup of running cost, sup of terminal cost, minimal impulse cost).

    The suprema over the box are attained at the endpoint farther from
    Player 2's target, so they are evaluated exactly.
    """
    validate_box(box)
    far = max(abs(box.x_lo - params.rho2), abs(box.x_hi - params.rho2))
    h2_sup = 0.5 * params.w2 * far * far
    s2_sup = 0.5 * params.s2 * far * far
    mu = min_intervention_cost(params)
    k = math.ceil(2.0 * (params.T * h2_sup + s2_sup) / mu)
    return k, h2_sup, s2_sup, mu


def _auto_budget(policy, params, x0):
    """Impulse cap over a box that covers everything a rollout can reach."""
    lo = min(float(np.min(policy.ell1)), x0) - 1.0
    hi = max(float(np.max(policy.ell2)), x0) + 1.0
    return impulse_bound(params, StateBox(lo, hi))


def _terminal_trajectory(path, policy, params, x0):
    """Degenerate rollout started at the horizon: terminal costs only.

    No impulse can fire at the horizon itself, so the state is left
    where it is regardless of region.
    """
    x0 = float(x0)
    seg = (np.array([params.T]), np.array([x0]))
    j1 = 0.5 * params.s1 * (x0 - params.rho1) ** 2
    j2 = 0.5 * params.s2 * (x0 - params.rho2) ** 2
    return Trajectory([seg], [], j1, j2, x0, path, policy, params)


def rollout(path, policy, params: GameParams, t0, x0, step=None, max_events=None):
    """Simulate equilibrium play from (t0, x0) until the horizon.

    If x0 is on or outside a threshold at t0 an intervention fires
    immediately.  Raises ImpulseBudgetExceeded when the event count
    passes the analytic bound or two events chatter, NonFiniteStateError
    if the state diverges.  Starting exactly at the horizon yields the
    bare terminal evaluation.
    """
    T = params.T
    if not 0.0 <= t0 <= T:
        raise ValueError(f"t0 must lie in [0, T] (got {t0!r})")
    if T - t0 <= 1e-12:
        return _terminal_trajectory(path, policy, params, x0)
    if step is None:
        step = T / 4096.0
    if step <= 0.0:
        raise ValueError(f"step must be > 0 (got {step!r})")
    grid = _RolloutGrid(path, policy, params, float(t0), float(step))
    return _rollout_on_grid(grid, float(x0), max_events)


def make_rollout_hook(path, policy, params, step=None):
    """Rollout closure (t, x) -> Trajectory reusing grids across calls."""
    if step is None:
        step = params.T / 4096.0
    grids = {}

    def hook(t0, x0):
        if params.T - t0 <= 1e-12:
            return _terminal_trajectory(path, policy, params, x0)
        g = grids.get(t0)
        if g is None:
            g = _RolloutGrid(path, policy, params, float(t0), float(step))
            grids[t0] = g
        return _rollout_on_grid(g, float(x0), None)

    return hook


def _bisect_crossing(grid, t_lo, x_lo, h):
    """Locate the first threshold crossing inside one step to EVENT_TIME_TOL.

    The state at a trial offset s is an RK4 substep of size s from the
    step's left node, so the located point is on the integrator's own
    trajectory up to its local error.
    """
    policy = grid.policy

    def probe(s):
        x = _rk4_step(grid.path, t_lo, x_lo, s)
        ell1, _, _, ell2 = policy.thresholds_at(t_lo + s)
        return x, min(x - ell1, ell2 - x)

    lo, hi = 0.0, h
    x_hi, m_hi = probe(hi)
    if m_hi > 0.0:
        return None
    while hi - lo > EVENT_TIME_TOL:
        mid = 0.5 * (lo + hi)
        _, m_mid = probe(mid)
        if m_mid <= 0.0:
            hi = mid
        else:
            lo = mid
    x_minus, _ = probe(hi)
    return t_lo + hi, x_minus


def _rollout_on_grid(grid, x0, max_events):
    path, policy, params = grid.path, grid.policy, grid.params
    T = params.T
    ts = grid.ts
    n_nodes = len(ts)
    budget = max_events if max_events is not None else _auto_budget(policy, params, x0)

    events = []
    segments = []
    j1 = j2 = 0.0

    def fire(tau, x_minus):
        hit = impulse_map(policy, tau, x_minus)
        if hit is None:
            # bisection stopped a hair inside the band; snap to the nearer side
            ell1, alpha, beta, ell2 = policy.thresholds_at(tau)
            hit = (alpha, alpha - x_minus) if (x_minus - ell1) <= (ell2 - x_minus) \
                else (beta, beta - x_minus)
        target, xi = hit
        ev = ImpulseEvent(
            tau=float(tau),
            x_minus=float(x_minus),
            x_plus=float(target),
            xi=float(xi),
            cost_p1=player1_impulse_cost(params, xi),
            cost_p2=intervention_cost(params, xi),
        )
        if events and ev.tau - events[-1].tau < CHATTER_TOL:
            raise ImpulseBudgetExceeded(
                f"chattering: events at tau={events[-1].tau!r} and tau={ev.tau!r}"
            )
        events.append(ev)
        if len(events) > budget:
            raise ImpulseBudgetExceeded(
                f"{len(events)} events exceed the analytic bound {budget}"
            )
        return ev

    t_cur, x_cur = grid.t0, x0
    ell1, _, _, ell2 = policy.thresholds_at(t_cur)
    if (x_cur <= ell1 or x_cur >= ell2) and t_cur < T - EVENT_TIME_TOL:
        ev = fire(t_cur, x_cur)
        j1 += ev.cost_p1
        j2 += ev.cost_p2
        segments.append((np.array([t_cur]), np.array([x_cur])))
        x_cur = ev.x_plus

    done = False
    while not done:
        # one pass of this loop builds one impulse-free segment
        seg_t = [t_cur]
        seg_x = [x_cur]
        crossing = None
        while True:
            node = int(np.searchsorted(ts, t_cur, side="left"))
            if node < n_nodes and abs(ts[node] - t_cur) > 1e-12:
                # off-grid start (just after an event): one step back onto the grid
                h = ts[node] - t_cur
                crossing = _bisect_crossing(grid, t_cur, x_cur, h)
                if crossing is not None:
                    break
                x_next = _rk4_step(path, t_cur, x_cur, h)
                d1, d2 = _step_cost(path, params, t_cur, x_cur, ts[node], x_next)
                j1 += d1
                j2 += d2
                t_cur, x_cur = float(ts[node]), x_next
                seg_t.append(t_cur)
                seg_x.append(x_cur)
            if t_cur >= T:
                done = True
                break
            xs = grid.propagate(node, x_cur)
            if not np.all(np.isfinite(xs)):
                bad = node + int(np.flatnonzero(~np.isfinite(xs))[0])
                raise NonFiniteStateError(f"state non-finite at node {bad} (t={ts[bad]!r})")
            margins = np.minimum(xs[1:] - grid.ell1[node + 1:], grid.ell2[node + 1:] - xs[1:])
            exits = np.flatnonzero(margins <= 0.0)
            keep = len(xs) if exits.size == 0 else int(exits[0]) + 1
            if keep > 1:
                d1, d2 = _segment_costs(path, params, ts[node:node + keep], xs[:keep])
                j1 += d1
                j2 += d2
                seg_t.extend(ts[node + 1:node + keep])
                seg_x.extend(xs[1:keep])
                t_cur, x_cur = float(ts[node + keep - 1]), float(xs[keep - 1])
            if exits.size == 0:
                done = True
                break
            h = ts[node + keep] - t_cur
            crossing = _bisect_crossing(grid, t_cur, x_cur, h)
            if crossing is not None:
                break
            # endpoint margin was a spurious nonpositive; accept the node and go on
            x_next = _rk4_step(path, t_cur, x_cur, h)
            d1, d2 = _step_cost(path, params, t_cur, x_cur, ts[node + keep], x_next)
            j1 += d1
            j2 += d2
            t_cur, x_cur = float(ts[node + keep]), x_next
            seg_t.append(t_cur)
            seg_x.append(x_cur)
            if t_cur >= T:
                done = True
                break

        if crossing is not None:
            tau, x_minus = crossing
            d1, d2 = _step_cost(path, params, t_cur, x_cur, tau, x_minus)
            j1 += d1
            j2 += d2
            if tau >= T - EVENT_TIME_TOL:
                # an exit this close to the horizon carries no impulse
                if tau < T:
                    x_end = _rk4_step(path, tau, x_minus, T - tau)
                    e1, e2 = _step_cost(path, params, tau, x_minus, T, x_end)
                    j1 += e1
                    j2 += e2
                else:
                    x_end = x_minus
                seg_t.append(T)
                seg_x.append(x_end)
                t_cur, x_cur = T, x_end
                done = True
            else:
                seg_t.append(tau)
                seg_x.append(x_minus)
                ev = fire(tau, x_minus)
                j1 += ev.cost_p1
                j2 += ev.cost_p2
                t_cur, x_cur = tau, ev.x_plus
        segments.append((np.asarray(seg_t), np.asarray(seg_x)))

    j1 += 0.5 * params.s1 * (x_cur - params.rho1) ** 2
    j2 += 0.5 * params.s2 * (x_cur - params.rho2) ** 2
    return Trajectory(segments, events, j1, j2, x_cur, path, policy, params)


def admissibility_check(traj: Trajectory, policy: ThresholdPolicy) -> AdmissibilityReport:
    """Confirm the events of ``traj`` are exactly the first exit times.

    Every pre-event sample must lie strictly inside the band, each
    x_minus must sit on the crossed boundary (or be the outside start
    state), each reset must land on the matching target, and event times
    must increase strictly and stay below the horizon.
    """
    violations = []
    start = traj.start_time
    T = policy.params.T

    prev_tau = None
    for i, ev in enumerate(traj.events):
        if ev.tau >= T:
            violations.append(f"event {i}: tau={ev.tau!r} not strictly before T")
        if prev_tau is not None and ev.tau <= prev_tau:
            violations.append(f"event {i}: tau={ev.tau!r} not after previous {prev_tau!r}")
        prev_tau = ev.tau
        ell1, alpha, beta, ell2 = policy.thresholds_at(ev.tau)
        initial_exit = ev.tau == start and (ev.x_minus <= ell1 or ev.x_minus >= ell2)
        on_lower = abs(ev.x_minus - ell1) <= BOUNDARY_MATCH_TOL or ev.x_minus < ell1
        on_upper = abs(ev.x_minus - ell2) <= BOUNDARY_MATCH_TOL or ev.x_minus > ell2
        if ev.xi > 0:
            if not (initial_exit or on_lower):
                violations.append(
                    f"event {i}: x_minus={ev.x_minus!r} not at the lower boundary {ell1!r}"
                )
            if abs(ev.x_plus - alpha) > BOUNDARY_MATCH_TOL:
                violations.append(f"event {i}: reset {ev.x_plus!r} differs from alpha {alpha!r}")
        else:
            if not (initial_exit or on_upper):
                violations.append(
                    f"event {i}: x_minus={ev.x_minus!r} not at the upper boundary {ell2!r}"
                )
            if abs(ev.x_plus - beta) > BOUNDARY_MATCH_TOL:
                violations.append(f"event {i}: reset {ev.x_plus!r} differs from beta {beta!r}")

    for k, (seg_t, seg_x) in enumerate(traj.segments):
        if len(seg_t) < 2:
            continue
        inner_t, inner_x = seg_t[:-1], seg_x[:-1]
        if seg_t[0] == start and traj.events and traj.events[0].tau == start:
            inner_t, inner_x = inner_t[1:], inner_x[1:]
        if len(inner_t) == 0:
            continue
        ell1, _, _, ell2 = policy.thresholds_at(inner_t)
        bad = np.flatnonzero((inner_x <= ell1) | (inner_x >= ell2))
        if bad.size:
            j = int(bad[0])
            violations.append(
                f"segment {k}: sample at t={inner_t[j]!r} (x={inner_x[j]!r}) "
                "is outside the open band before the segment end"
            )
    return AdmissibilityReport(ok=not violations, violations=violations)
