"""Equilibrium feedback objects for both players.

Player 1 plays the linear state feedback ``u = -(b/r1)*(p1(t)*x + q1(t))``.
Player 2 plays a band policy: wait while the state stays strictly between
the moving thresholds ``ell1(t)`` and ``ell2(t)``, and on exit reset it to
``alpha(t)`` from below or ``beta(t)`` from above.  The band boundaries
follow from value matching and the reset targets from the stationarity
conditions ``p2*alpha + q2 = -c`` and ``p2*beta + q2 = d``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConvexityViolation, OrderingViolation
from .model import GameParams
from .riccati import CoefficientPath

REGION_BELOW = "below"
REGION_INTERIOR = "interior"
REGION_ABOVE = "above"


@dataclass(frozen=True)
class ValueSample:
    """Both players' values at one (t, x) point, with the region it lies in."""

    t: float
    x: float
    v1: float
    v2: float
    region: str


class ThresholdPolicy:
    """Sampled threshold curves ell1 < alpha < beta < ell2 on the path grid."""

    def __init__(self, time_grid, ell1, alpha, beta, ell2, params):
        self.time_grid = time_grid
        self.ell1 = ell1
        self.alpha = alpha
        self.beta = beta
        self.ell2 = ell2
        self.params = params
        for arr in (ell1, alpha, beta, ell2):
            arr.flags.writeable = False
        self._ell1 = PchipInterpolator(time_grid, ell1)
        self._alpha = PchipInterpolator(time_grid, alpha)
        self._beta = PchipInterpolator(time_grid, beta)
        self._ell2 = PchipInterpolator(time_grid, ell2)

    def thresholds_at(self, t):
        """(ell1, alpha, beta, ell2) at time ``t`` (scalar or array)."""
        if np.ndim(t) == 0:
            return (float(self._ell1(t)), float(self._alpha(t)),
                    float(self._beta(t)), float(self._ell2(t)))
        return self._ell1(t), self._alpha(t), self._beta(t), self._ell2(t)

    def region(self, t, x) -> str:
        """Classify ``x`` at time ``t``; the intervention set is closed."""
        ell1, _, _, ell2 = self.thresholds_at(t)
        if x <= ell1:
            return REGION_BELOW
        if x >= ell2:
            return REGION_ABOVE
        return REGION_INTERIOR


def _check_ordering(time_grid, ell1, alpha, beta, ell2):
    """Raise OrderingViolation (with node index) unless ell1 < alpha < beta < ell2."""
    ok = (ell1 < alpha) & (alpha < beta) & (beta < ell2)
    if not np.all(ok):
        idx = int(np.flatnonzero(~ok)[0])
        raise OrderingViolation(
            f"threshold ordering failed at node {idx} (t={time_grid[idx]!r}): "
            f"ell1={ell1[idx]!r} alpha={alpha[idx]!r} beta={beta[idx]!r} ell2={ell2[idx]!r}"
        )


def build_policy(path: CoefficientPath, params: GameParams) -> ThresholdPolicy:
    """Fill all four threshold curves at every path node and verify ordering."""
    p2 = path.p2
    q2 = path.q2
    if np.any(p2 <= 0.0):
        idx = int(np.flatnonzero(p2 <= 0.0)[0])
        raise ConvexityViolation(
            f"p2(t) <= 0 at node {idx} (t={path.time_grid[idx]!r}, p2={p2[idx]!r})"
        )
    alpha = -(q2 + params.c) / p2
    beta = (params.d - q2) / p2
    ell1 = (-params.c - q2 - np.sqrt(2.0 * params.C * p2)) / p2
    ell2 = (-q2 + params.d + np.sqrt(2.0 * params.D * p2)) / p2
    _check_ordering(path.time_grid, ell1, alpha, beta, ell2)
    return ThresholdPolicy(path.time_grid, ell1, alpha, beta, ell2, params)


def gamma_star(path: CoefficientPath, params: GameParams, t, x):
    """Player 1's equilibrium control -(b/r1)*(p1(t)*x + q1(t)).

    Defined from the continuation region but evaluable anywhere; the
    resulting closed-loop drift is a_x(t)*x + b_x*q1(t).
    """
    return -(params.b / params.r1) * (path.p1_at(t) * x + path.q1_at(t))


def impulse_map(policy: ThresholdPolicy, t, x):
    """Player 2's reset rule at (t, x).

    Returns None while ell1(t) < x < ell2(t); otherwise the pair
    (target, xi) with target alpha(t) from below or beta(t) from above
    and xi = target - x.
    """
    ell1, alpha, beta, ell2 = policy.thresholds_at(t)
    if x <= ell1:
        return alpha, alpha - x
    if x >= ell2:
        return beta, beta - x
    return None


def phi2(path: CoefficientPath, t, x):
    """Interior quadratic of Player 2's value, 0.5*p2*x^2 + q2*x + n2."""
    return 0.5 * path.p2_at(t) * np.asarray(x, dtype=float) ** 2 \
        + path.q2_at(t) * np.asarray(x, dtype=float) + path.n2_at(t)


def phi1(path: CoefficientPath, t, x):
    """Interior quadratic of Player 1's value between interventions.

    Uses the backward n1 with no jump corrections, so it tracks Player
    1's value only on impulse-free subintervals; exposed for diagnostic
    comparison against the rollout-based value.
    """
    return 0.5 * path.p1_at(t) * np.asarray(x, dtype=float) ** 2 \
        + path.q1_at(t) * np.asarray(x, dtype=float) + path.n1_at(t)


def value_v2(path: CoefficientPath, policy: ThresholdPolicy, params: GameParams, t, x):
    """Player 2's value at (t, x): quadratic inside the band, linear outside.

    Continuous across both boundaries by construction of ell1 and ell2.
    Accepts a scalar or array ``x``.
    """
    x_arr = np.asarray(x, dtype=float)
    ell1, alpha, beta, ell2 = policy.thresholds_at(t)
    below = phi2(path, t, alpha) + params.C + params.c * (alpha - x_arr)
    above = phi2(path, t, beta) + params.D + params.d * (x_arr - beta)
    interior = phi2(path, t, x_arr)
    out = np.where(x_arr <= ell1, below, np.where(x_arr >= ell2, above, interior))
    return float(out) if np.ndim(x) == 0 else out


def value_v1(path, policy, params: GameParams, t, x, rollout_hook):
    """Player 1's value at (t, x), realized as the equilibrium cost-to-go.

    ``rollout_hook(t, x)`` must produce the equilibrium trajectory object
    from (t, x); its accumulated j1 is the value.  Evaluation by rollout
    avoids tracking the jump corrections of the constant coefficient n1,
    which depend on the pre-impulse state.
    """
    return rollout_hook(t, x).j1


def value_sample(path, policy, params, t, x, rollout_hook) -> ValueSample:
    """Bundle both values and the region flag at one (t, x) point."""
    return ValueSample(
        t=float(t),
        x=float(x),
        v1=value_v1(path, policy, params, t, x, rollout_hook),
        v2=value_v2(path, policy, params, t, x),
        region=policy.region(t, x),
    )
