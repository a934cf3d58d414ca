"""Time-varying coefficients of both players' quadratic value terms.

Player 1's quadratic coefficient ``p1`` and Player 2's ``p2`` have closed
forms built from the constants ``theta``, ``c1`` and ``h_const``; the
linear and constant coefficients ``q1, n1, q2, n2`` are integrated
backward from their terminal conditions with classical fourth-order
Runge-Kutta on a uniform grid.  Between grid nodes the integrated paths
are evaluated with monotone cubic Hermite interpolation while ``p1``,
``p2`` and the closed-loop gain ``a_x`` always use their closed forms.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DegenerateParameterError, NonFiniteStateError
from .model import GameParams, validate

DEFAULT_STEPS = 4096


@dataclass(frozen=True)
class RiccatiConstants:
    """Scalar constants of the closed-form coefficient solutions.

    theta    decay rate 2*sqrt(a^2 + w1*b^2/r1) of the controlled dynamics
    c1       integration constant fixing p1(T) = s1
    h_const  integration constant fixing p2(T) = s2
    b_x      effective control gain -b^2/r1 of the closed loop
    """

    theta: float
    c1: float
    h_const: float
    b_x: float


def constants(params: GameParams) -> RiccatiConstants:
    """Evaluate theta, c1, h_const and b_x for a validated parameter set."""
    validate(params)
    a, b, r1, s1, w1 = params.a, params.b, params.r1, params.s1, params.w1
    w2, s2, T = params.w2, params.s2, params.T

    b_x = -b * b / r1
    theta = 2.0 * np.sqrt(a * a + w1 * b * b / r1)
    # Same quantity written through b_x; guards against sign mistakes.
    assert np.isclose(theta, 2.0 * np.sqrt(a * a - w1 * b_x), rtol=1e-12, atol=0.0)

    divisor = theta + 2.0 * (b * b / r1) * s1 - 2.0 * a
    if divisor == 0.0:
        raise DegenerateParameterError(
            f"theta + 2*(b^2/r1)*s1 - 2*a vanished (theta={theta!r})"
        )
    c1 = (2.0 * theta / divisor - 1.0) * np.exp(-theta * T)

    if theta == 0.0:
        raise DegenerateParameterError("theta = 0: control has no authority")
    eT = np.exp(theta * T)
    h_const = (
        2.0 * c1 * s2
        + s2 / eT
        - (w2 / eT - c1 * c1 * w2 * eT) / theta
        + c1 * c1 * s2 * eT
        + 2.0 * c1 * T * w2
    )
    return RiccatiConstants(theta=theta, c1=c1, h_const=h_const, b_x=b_x)


def _denominator(consts: RiccatiConstants, t):
    den = consts.c1 * np.exp(consts.theta * np.asarray(t, dtype=float)) + 1.0
    if np.any(den == 0.0):
        raise DegenerateParameterError("c1*exp(theta*t) + 1 vanished")
    return den


def a_x(consts: RiccatiConstants, t):
    """Closed-loop drift gain, theta/2 - theta/(c1*e^(theta*t) + 1).

    Identically equal to a + b_x*p1(t).
    """
    out = consts.theta / 2.0 - consts.theta / _denominator(consts, t)
    return float(out) if np.ndim(t) == 0 else out


def p1_closed_form(consts: RiccatiConstants, params: GameParams, t):
    """Player 1 quadratic coefficient p1(t); p1(T) = s1 by construction."""
    if consts.b_x == 0.0:
        raise DegenerateParameterError("b = 0: p1 closed form undefined")
    out = (a_x(consts, t) - params.a) / consts.b_x
    return float(out) if np.ndim(t) == 0 else out


def p2_closed_form(consts: RiccatiConstants, params: GameParams, t):
    """Player 2 quadratic coefficient p2(t); p2(T) = s2 by construction."""
    t_arr = np.asarray(t, dtype=float)
    theta, c1, h = consts.theta, consts.c1, consts.h_const
    w2 = params.w2
    e = np.exp(theta * t_arr)
    num = -w2 * e * e * c1 * c1 - 2.0 * t_arr * theta * w2 * e * c1 + w2 + h * theta * e
    out = num / (theta * _denominator(consts, t_arr) ** 2)
    return float(out) if np.ndim(t) == 0 else out


class CoefficientPath:
    """Sampled coefficient paths on a uniform grid over [0, T].

    Node arrays are read-only; evaluation at arbitrary times mixes exact
    closed forms (p1, p2, a_x) with monotone cubic interpolation of the
    integrated paths (q1, n1, q2, n2).
    """

    def __init__(self, time_grid, p1, q1, n1, p2, q2, n2, ax_vals, consts, params):
        self.time_grid = time_grid
        self.p1 = p1
        self.q1 = q1
        self.n1 = n1
        self.p2 = p2
        self.q2 = q2
        self.n2 = n2
        self.a_x = ax_vals
        self.constants = consts
        self.params = params
        for arr in (time_grid, p1, q1, n1, p2, q2, n2, ax_vals):
            arr.flags.writeable = False
        self._q1 = PchipInterpolator(time_grid, q1)
        self._n1 = PchipInterpolator(time_grid, n1)
        self._q2 = PchipInterpolator(time_grid, q2)
        self._n2 = PchipInterpolator(time_grid, n2)

    # closed-form evaluations
    def p1_at(self, t):
        return p1_closed_form(self.constants, self.params, t)

    def p2_at(self, t):
        return p2_closed_form(self.constants, self.params, t)

    def a_x_at(self, t):
        return a_x(self.constants, t)

    # interpolated evaluations
    def q1_at(self, t):
        out = self._q1(t)
        return float(out) if np.ndim(t) == 0 else out

    def n1_at(self, t):
        out = self._n1(t)
        return float(out) if np.ndim(t) == 0 else out

    def q2_at(self, t):
        out = self._q2(t)
        return float(out) if np.ndim(t) == 0 else out

    def n2_at(self, t):
        out = self._n2(t)
        return float(out) if np.ndim(t) == 0 else out

    def ode_rhs_at(self, t):
        """Time derivatives of all six coefficients from their defining ODEs.

        Returns (p1dot, q1dot, n1dot, p2dot, q2dot, n2dot) evaluated at
        ``t`` using the closed forms for p1, p2, a_x and interpolation
        for the integrated paths.  Accepts scalars or arrays.
        """
        pr = self.params
        ax_v = self.a_x_at(t)
        p1_v = self.p1_at(t)
        p2_v = self.p2_at(t)
        q1_v = self.q1_at(t)
        q2_v = self.q2_at(t)
        b_x = self.constants.b_x
        p1dot = -pr.w1 - b_x * p1_v * p1_v - 2.0 * pr.a * p1_v
        q1dot = -ax_v * q1_v + pr.w1 * pr.rho1
        n1dot = -0.5 * b_x * q1_v * q1_v - 0.5 * pr.w1 * pr.rho1 ** 2
        p2dot = -pr.w2 - 2.0 * p2_v * ax_v
        q2dot = -ax_v * q2_v - b_x * p2_v * q1_v + pr.w2 * pr.rho2
        n2dot = -b_x * q1_v * q2_v - 0.5 * pr.w2 * pr.rho2 ** 2
        return p1dot, q1dot, n1dot, p2dot, q2dot, n2dot


def solve_backward(params: GameParams, consts: RiccatiConstants = None,
                   n_steps: int = DEFAULT_STEPS) -> CoefficientPath:
    """Integrate q1, n1, q2, n2 backward from their terminal conditions.

    Classical RK4 on a uniform grid of ``n_steps`` intervals over [0, T];
    p1, p2 and a_x are filled from their closed forms at every node.
    """
    if n_steps < 2:
        raise ValueError(f"n_steps must be >= 2 (got {n_steps})")
    validate(params)
    if consts is None:
        consts = constants(params)

    T = params.T
    ts = np.linspace(0.0, T, n_steps + 1)
    h = T / n_steps
    w1, rho1, w2, rho2 = params.w1, params.rho1, params.w2, params.rho2
    b_x = consts.b_x

    def rhs(t, y):
        q1v, n1v, q2v, n2v = y
        axv = a_x(consts, t)
        p2v = p2_closed_form(consts, params, t)
        return np.array([
            -axv * q1v + w1 * rho1,
            -0.5 * b_x * q1v * q1v - 0.5 * w1 * rho1 ** 2,
            -axv * q2v - b_x * p2v * q1v + w2 * rho2,
            -b_x * q1v * q2v - 0.5 * w2 * rho2 ** 2,
        ])

    y = np.array([
        -params.s1 * rho1,
        0.5 * params.s1 * rho1 ** 2,
        -params.s2 * rho2,
        0.5 * params.s2 * rho2 ** 2,
    ])
    out = np.empty((n_steps + 1, 4))
    out[n_steps] = y
    for i in range(n_steps, 0, -1):
        t = ts[i]
        k1 = rhs(t, y)
        k2 = rhs(t - 0.5 * h, y - 0.5 * h * k1)
        k3 = rhs(t - 0.5 * h, y - 0.5 * h * k2)
        k4 = rhs(t - h, y - h * k3)
        y = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteStateError(f"coefficient integration diverged at node {i - 1}")
        out[i - 1] = y

    p1_vals = p1_closed_form(consts, params, ts)
    p2_vals = p2_closed_form(consts, params, ts)
    ax_vals = a_x(consts, ts)
    for name, arr in (("p1", p1_vals), ("p2", p2_vals), ("a_x", ax_vals)):
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise NonFiniteStateError(f"{name} non-finite at node {bad[0]}")

    return CoefficientPath(
        time_grid=ts,
        p1=p1_vals,
        q1=out[:, 0].copy(),
        n1=out[:, 1].copy(),
        p2=p2_vals,
        q2=out[:, 2].copy(),
        n2=out[:, 3].copy(),
        ax_vals=ax_vals,
        consts=consts,
        params=params,
    )
