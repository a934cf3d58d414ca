"""Numerical certification of the computed equilibrium.

Checks, on a rectangular (t, x) grid over the horizon and a declared
state box: the interior residual of Player 1's optimality equation, the
three coupled relations of Player 2's impulse-control inequality system
(residual sign, obstacle gap against a brute-force intervention
operator, and their complementarity), the root conditions that certify
the residual's sign outside the band, the strict-convexity margin of
Player 2's quadratic coefficient, and an independent coarse dynamic
programming oracle for Player 2's value.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import RegionError
from .model import GameParams, StateBox, intervention_cost, validate_box
from .policy import (
    REGION_ABOVE,
    REGION_BELOW,
    REGION_INTERIOR,
    ThresholdPolicy,
    gamma_star,
    value_v2,
)
from .riccati import CoefficientPath, RiccatiConstants

DEFAULT_RESIDUAL_TOL = 1e-5
DEFAULT_GAP_BASE_TOL = 1e-6


@dataclass(frozen=True)
class QviSample:
    """The three inequality-system quantities at one (t, x) node."""

    residual: float
    gap: float
    complementarity: float
    region: str


@dataclass(frozen=True)
class SufficiencySample:
    """Root conditions certifying the exterior residual sign at one time.

    ``x11``/``x22`` are the relevant roots of the residual quadratics
    below and above the band; the sufficient conditions are
    ``ell1 <= x11`` and ``ell2 >= x22``.  A negative discriminant means
    the quadratic has no real root, the residual is positive throughout
    that region, and the corresponding condition holds vacuously
    (``applicable`` is False and the margin is +inf; no root is made up).
    """

    x11: float
    x22: float
    theta_alpha: float
    theta_beta: float
    margin_ell1: float
    margin_ell2: float
    alpha_applicable: bool
    beta_applicable: bool


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    worst: float
    t: float = None
    x: float = None
    note: str = ""


@dataclass
class VerificationReport:
    """Residual grids, margin curves and per-condition pass flags.

    Every flag is recomputable from the stored arrays and tolerances.
    """

    t_nodes: np.ndarray
    x_nodes: np.ndarray
    region: np.ndarray
    hjb1: np.ndarray
    qvi_residual: np.ndarray
    gap: np.ndarray
    complementarity: np.ndarray
    x11: np.ndarray
    x22: np.ndarray
    theta_alpha: np.ndarray
    theta_beta: np.ndarray
    margin_ell1: np.ndarray
    margin_ell2: np.ndarray
    convexity_margin: np.ndarray
    p2: np.ndarray
    tolerances: dict
    conditions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)


def _phi1_time_derivative(path, t, x):
    p1dot, q1dot, n1dot, _, _, _ = path.ode_rhs_at(t)
    return 0.5 * p1dot * x * x + q1dot * x + n1dot


def _phi2_time_derivative(path, t, x):
    _, _, _, p2dot, q2dot, n2dot = path.ode_rhs_at(t)
    return 0.5 * p2dot * x * x + q2dot * x + n2dot


def hjb1_residual(path: CoefficientPath, policy: ThresholdPolicy,
                  params: GameParams, t, x) -> float:
    """Signed residual of Player 1's optimality equation at an interior point.

    Zero (up to integration error) wherever the coefficient paths solve
    their defining equations; raises RegionError outside the band, where
    Player 1's value is not differentiable in this sense.
    """
    if policy.region(t, x) != REGION_INTERIOR:
        raise RegionError(f"(t={t!r}, x={x!r}) is not in the continuation region")
    u = gamma_star(path, params, t, x)
    dphi1_dx = path.p1_at(t) * x + path.q1_at(t)
    return float(
        _phi1_time_derivative(path, t, x)
        + 0.5 * params.w1 * (x - params.rho1) ** 2
        + 0.5 * params.r1 * u * u
        + dphi1_dx * (params.a * x + params.b * u)
    )


def brute_force_rv2(path, policy, params, t, x, box: StateBox, xi_resolution=None):
    """Intervention operator by brute force: min over a dense target grid
    of (value at the target) + (cost of jumping there).  Vectorized in x."""
    validate_box(box)
    width = box.x_hi - box.x_lo
    if xi_resolution is None:
        xi_resolution = 1e-3 * width
    n_targets = max(2, int(round(width / xi_resolution)) + 1)
    targets = np.linspace(box.x_lo, box.x_hi, n_targets)
    v2_targets = value_v2(path, policy, params, t, targets)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    jump_cost = intervention_cost(params, targets[None, :] - x_arr[:, None])
    out = np.min(v2_targets[None, :] + jump_cost, axis=1)
    return float(out[0]) if np.ndim(x) == 0 else out


def _qvi_arrays(path, policy, params, t, x_arr, box, xi_resolution):
    """residual, gap, complementarity, region codes at one time, vectorized."""
    ell1, alpha, beta, ell2 = policy.thresholds_at(t)
    p2 = path.p2_at(t)
    q2 = path.q2_at(t)
    below = x_arr <= ell1
    above = x_arr >= ell2
    interior = ~(below | above)

    dv2_dt = np.where(
        below,
        _phi2_time_derivative(path, t, alpha),
        np.where(above, _phi2_time_derivative(path, t, beta),
                 _phi2_time_derivative(path, t, x_arr)),
    )
    dv2_dx = np.where(below, -params.c, np.where(above, params.d, p2 * x_arr + q2))
    # Player 1's feedback only acts while the state is inside the band.
    drift = params.a * x_arr + np.where(
        interior, params.b * gamma_star(path, params, t, x_arr), 0.0
    )
    residual = dv2_dt + 0.5 * params.w2 * (x_arr - params.rho2) ** 2 + dv2_dx * drift

    v2 = value_v2(path, policy, params, t, x_arr)
    rv2 = brute_force_rv2(path, policy, params, t, x_arr, box, xi_resolution)
    gap = v2 - rv2
    region = np.where(below, REGION_BELOW, np.where(above, REGION_ABOVE, REGION_INTERIOR))
    return residual, gap, gap * residual, region


def qvi_check(path, policy, params, t, x, box: StateBox, xi_resolution=None) -> QviSample:
    """Evaluate the inequality-system triple at one (t, x) point.

    Inside the band the residual should vanish and the gap be strictly
    negative; outside, the residual should be nonnegative and the gap
    zero up to the target-grid resolution.
    """
    x_arr = np.array([float(x)])
    residual, gap, comp, region = _qvi_arrays(
        path, policy, params, float(t), x_arr, box, xi_resolution
    )
    return QviSample(
        residual=float(residual[0]),
        gap=float(gap[0]),
        complementarity=float(comp[0]),
        region=str(region[0]),
    )


def _sufficiency_arrays(path, policy, params, t_arr):
    a, c, d, w2, rho2 = params.a, params.c, params.d, params.w2, params.rho2
    ell1, alpha, beta, ell2 = policy.thresholds_at(t_arr)
    dphi2_alpha = _phi2_time_derivative(path, t_arr, alpha)
    dphi2_beta = _phi2_time_derivative(path, t_arr, beta)
    theta_alpha = c * c * a * a + 2.0 * w2 * (c * a * rho2 - dphi2_alpha)
    theta_beta = d * d * a * a - 2.0 * w2 * (d * a * rho2 + dphi2_beta)
    alpha_ok = theta_alpha >= 0.0
    beta_ok = theta_beta >= 0.0
    x11 = np.where(
        alpha_ok,
        ((c * a + w2 * rho2) - np.sqrt(np.maximum(theta_alpha, 0.0))) / w2,
        np.nan,
    )
    x22 = np.where(
        beta_ok,
        (-(d * a - w2 * rho2) + np.sqrt(np.maximum(theta_beta, 0.0))) / w2,
        np.nan,
    )
    margin1 = np.where(alpha_ok, x11 - ell1, np.inf)
    margin2 = np.where(beta_ok, ell2 - x22, np.inf)
    return x11, x22, theta_alpha, theta_beta, margin1, margin2, alpha_ok, beta_ok


def sufficiency_margins(path, policy, params, t) -> SufficiencySample:
    """Root conditions for the exterior residual sign at one time node."""
    t_arr = np.array([float(t)])
    x11, x22, ta, tb, m1, m2, aok, bok = _sufficiency_arrays(path, policy, params, t_arr)
    return SufficiencySample(
        x11=float(x11[0]),
        x22=float(x22[0]),
        theta_alpha=float(ta[0]),
        theta_beta=float(tb[0]),
        margin_ell1=float(m1[0]),
        margin_ell2=float(m2[0]),
        alpha_applicable=bool(aok[0]),
        beta_applicable=bool(bok[0]),
    )


def convexity_margin(consts: RiccatiConstants, params: GameParams, t):
    """Margin of the strict-convexity condition on Player 2's value.

    Positive iff h_const*theta + w2*(1 - e^(t*theta)*c1^2 - 2*t*theta*c1)
    is positive; its sign must agree with the sign of p2(t).
    """
    t_arr = np.asarray(t, dtype=float)
    theta, c1 = consts.theta, consts.c1
    e = np.exp(t_arr * theta)
    out = consts.h_const * theta + params.w2 * (1.0 - e * c1 * c1 - 2.0 * t_arr * theta * c1)
    return float(out) if np.ndim(t) == 0 else out


@dataclass
class DpOracleResult:
    """Backward-induction value grid and the intervention region it induces."""

    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray      # shape (nt + 1, nx + 1), row 0 is t = 0
    intervene: np.ndarray   # same shape, True where jumping beat waiting

    def continuation_bracket(self, k=0):
        """(first, last) continuation-node state at time layer ``k``."""
        free = np.flatnonzero(~self.intervene[k])
        if free.size == 0:
            raise ValueError(f"no continuation nodes in layer {k}")
        return float(self.x_grid[free[0]]), float(self.x_grid[free[-1]])


def dp_oracle_v2(params: GameParams, path: CoefficientPath, box: StateBox,
                 nt: int, nx: int) -> DpOracleResult:
    """Independent first-order dynamic-programming oracle for Player 2's value.

    Backward induction on an (nt+1) x (nx+1) grid: at each layer the
    waiting value advances the state one explicit Euler step through
    Player 1's feedback and adds one rectangle of running cost; the
    jumping value is the best target-node value plus the jump cost.
    Against the closed-form value this scheme is first-order accurate.
    """
    if nt < 16 or nx < 16:
        raise ValueError(f"oracle grids need nt, nx >= 16 (got nt={nt}, nx={nx})")
    validate_box(box)
    xg = np.linspace(box.x_lo, box.x_hi, nx + 1)
    dt = params.T / nt
    dx = (box.x_hi - box.x_lo) / nx
    values = np.empty((nt + 1, nx + 1))
    intervene = np.zeros((nt + 1, nx + 1), dtype=bool)
    values[nt] = 0.5 * params.s2 * (xg - params.rho2) ** 2
    # jump cost from node j to target node m
    jump_cost = intervention_cost(params, xg[None, :] - xg[:, None])
    run_cost = dt * 0.5 * params.w2 * (xg - params.rho2) ** 2
    for k in range(nt - 1, -1, -1):
        t = k * dt
        v_next = values[k + 1]
        x_adv = xg + dt * (params.a * xg + params.b * gamma_star(path, params, t, xg))
        v_adv = np.interp(x_adv, xg, v_next)
        low = x_adv < xg[0]
        high = x_adv > xg[-1]
        if low.any():
            v_adv[low] = v_next[0] + (v_next[1] - v_next[0]) / dx * (x_adv[low] - xg[0])
        if high.any():
            v_adv[high] = v_next[-1] + (v_next[-1] - v_next[-2]) / dx * (x_adv[high] - xg[-1])
        cont = v_adv + run_cost
        # a second jump never helps: each jump pays a fixed cost, so the
        # obstacle uses waiting values at the targets
        jump = np.min(cont[None, :] + jump_cost, axis=1)
        values[k] = np.minimum(cont, jump)
        intervene[k] = jump < cont
    return DpOracleResult(t_grid=np.linspace(0.0, params.T, nt + 1), x_grid=xg,
                          values=values, intervene=intervene)


def run_verification(path, policy, params: GameParams, box: StateBox,
                     nt: int = 200, nx: int = 200, xi_resolution=None,
                     residual_tol: float = DEFAULT_RESIDUAL_TOL) -> VerificationReport:
    """Evaluate every certification condition on an (nt+1) x (nx+1) grid."""
    validate_box(box)
    t_nodes = np.linspace(0.0, params.T, nt + 1)
    x_nodes = np.linspace(box.x_lo, box.x_hi, nx + 1)
    width = box.x_hi - box.x_lo
    if xi_resolution is None:
        xi_resolution = 1e-3 * width
    gap_tol = DEFAULT_GAP_BASE_TOL + xi_resolution * (params.c + params.d)

    shape = (nt + 1, nx + 1)
    hjb1 = np.full(shape, np.nan)
    residual = np.empty(shape)
    gap = np.empty(shape)
    comp = np.empty(shape)
    region = np.empty(shape, dtype="U8")

    for k, t in enumerate(t_nodes):
        res_k, gap_k, comp_k, reg_k = _qvi_arrays(
            path, policy, params, float(t), x_nodes, box, xi_resolution
        )
        residual[k] = res_k
        gap[k] = gap_k
        comp[k] = comp_k
        region[k] = reg_k
        inside = reg_k == REGION_INTERIOR
        if inside.any():
            xs = x_nodes[inside]
            u = gamma_star(path, params, float(t), xs)
            dphi1_dx = path.p1_at(float(t)) * xs + path.q1_at(float(t))
            hjb1[k, inside] = (
                _phi1_time_derivative(path, float(t), xs)
                + 0.5 * params.w1 * (xs - params.rho1) ** 2
                + 0.5 * params.r1 * u * u
                + dphi1_dx * (params.a * xs + params.b * u)
            )

    x11, x22, theta_a, theta_b, margin1, margin2, alpha_ok, beta_ok = \
        _sufficiency_arrays(path, policy, params, t_nodes)
    convexity = convexity_margin(path.constants, params, t_nodes)
    p2_vals = path.p2_at(t_nodes)

    def worst_node(values2d, pick):
        flat = pick(np.where(np.isnan(values2d), -np.inf if pick is np.argmax else np.inf,
                             values2d))
        k, j = np.unravel_index(flat, values2d.shape)
        return float(values2d[k, j]), float(t_nodes[k]), float(x_nodes[j])

    conditions = []

    interior_mask = region == REGION_INTERIOR
    abs_hjb = np.where(interior_mask, np.abs(hjb1), -np.inf)
    w, wt, wx = worst_node(abs_hjb, np.argmax)
    conditions.append(ConditionResult(
        "hjb1_interior_residual", w <= residual_tol, w, wt, wx,
        f"max interior |residual|, tol {residual_tol:g}"))

    w, wt, wx = worst_node(residual, np.argmin)
    conditions.append(ConditionResult(
        "qvi_residual_nonnegative", w >= -residual_tol, w, wt, wx,
        f"min residual over all nodes, tol -{residual_tol:g}"))

    abs_res_int = np.where(interior_mask, np.abs(residual), -np.inf)
    w, wt, wx = worst_node(abs_res_int, np.argmax)
    conditions.append(ConditionResult(
        "qvi_interior_equality", w <= residual_tol, w, wt, wx,
        f"max interior |residual|, tol {residual_tol:g}"))

    w, wt, wx = worst_node(gap, np.argmax)
    conditions.append(ConditionResult(
        "obstacle_gap", w <= gap_tol, w, wt, wx,
        f"max gap over all nodes, tol {gap_tol:g}"))

    abs_gap_ext = np.where(~interior_mask, np.abs(gap), -np.inf)
    w, wt, wx = worst_node(abs_gap_ext, np.argmax)
    conditions.append(ConditionResult(
        "exterior_obstacle_equality", w <= gap_tol, w, wt, wx,
        f"max exterior |gap|, tol {gap_tol:g}"))

    comp_tol = float(np.max(np.abs(gap))) * residual_tol \
        + float(np.max(np.abs(residual))) * gap_tol
    w, wt, wx = worst_node(np.abs(comp), np.argmax)
    conditions.append(ConditionResult(
        "complementarity", w <= comp_tol, w, wt, wx,
        f"max |gap*residual|, tol {comp_tol:g}"))

    def worst_t(values1d, pick):
        idx = pick(values1d)
        return float(values1d[idx]), float(t_nodes[idx])

    finite1 = np.where(np.isfinite(margin1), margin1, np.inf)
    w, wt = worst_t(finite1, np.argmin)
    conditions.append(ConditionResult(
        "band_margin_lower", w >= 0.0, w, wt, None,
        f"min (x11 - ell1) over applicable nodes; {int((~alpha_ok).sum())} inapplicable"))

    finite2 = np.where(np.isfinite(margin2), margin2, np.inf)
    w, wt = worst_t(finite2, np.argmin)
    conditions.append(ConditionResult(
        "band_margin_upper", w >= 0.0, w, wt, None,
        f"min (ell2 - x22) over applicable nodes; {int((~beta_ok).sum())} inapplicable"))

    w, wt = worst_t(convexity, np.argmin)
    conditions.append(ConditionResult(
        "convexity_margin", w > 0.0, w, wt, None, "min margin, must be > 0"))

    agree = np.sign(convexity) == np.sign(p2_vals)
    n_bad = int((~agree).sum())
    idx = int(np.argmax(~agree)) if n_bad else 0
    conditions.append(ConditionResult(
        "convexity_sign_agreement", n_bad == 0, float(n_bad), float(t_nodes[idx]), None,
        "nodes where the convexity margin and p2 disagree in sign"))

    return VerificationReport(
        t_nodes=t_nodes,
        x_nodes=x_nodes,
        region=region,
        hjb1=hjb1,
        qvi_residual=residual,
        gap=gap,
        complementarity=comp,
        x11=x11,
        x22=x22,
        theta_alpha=theta_a,
        theta_beta=theta_b,
        margin_ell1=margin1,
        margin_ell2=margin2,
        convexity_margin=convexity,
        p2=p2_vals,
        tolerances={
            "residual_tol": residual_tol,
            "gap_tol": gap_tol,
            "xi_resolution": xi_resolution,
        },
        conditions=conditions,
    )
