"""Distinguished solutions of the Pruefer equations and their asymptotic classification.

Solutions normalised at ``r = 0`` (``Theta0``, ``X0``, ``theta0_simplified``) are
integrated forward: their limits at 0 are repelling towards the origin, so errors
in the starting value contract in the direction of integration.  Solutions
normalised at infinity (``Xinf``, ``thetainf_simplified``) are integrated backward
for the same reason.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConvergenceError, DomainError
from .model import ModelParams, asymptotic_angles, infinity_angles
from .odecore import (
    SIMPLIFIED,
    ZERO,
    AngleTrace,
    Equation,
    EquationKind,
    StepControl,
    integrate,
    stable_interval_check,
)

__all__ = [
    "Which",
    "DistinguishedSpec",
    "LimitClass",
    "distinguished_spec",
    "init_at_zero",
    "init_at_infinity",
    "choose_anchor",
    "solve_distinguished",
    "classify_limit",
    "simplified_limit",
    "phase_drop_bounds",
    "infinity_radius",
]

MAX_PREDICTED_CORRECTION = 1e-3
SELF_CONSISTENCY_TOL = 1e-8
BUCKET_THRESHOLD = 0.1


class Which(str, enum.Enum):
    THETA0 = "Theta0"
    X0 = "X0"
    XINF = "Xinf"
    THETA0_SIMPLIFIED = "theta0_simplified"
    THETAINF_SIMPLIFIED = "thetainf_simplified"

    @property
    def endpoint(self) -> str:
        return "infinity" if self in (Which.XINF, Which.THETAINF_SIMPLIFIED) else "zero"

    @property
    def default_kind(self) -> EquationKind:
        if self in (Which.THETA0_SIMPLIFIED, Which.THETAINF_SIMPLIFIED):
            return SIMPLIFIED
        if self is Which.THETA0:
            return EquationKind(Equation.FULL_PRUFER)
        return ZERO


@dataclass(frozen=True)
class DistinguishedSpec:
    """Where a distinguished solution is normalised and how it is started.

    At ``zero`` the start value is ``limit_value + correction_slope * r``; at
    ``infinity`` it is ``limit_value + correction_slope / r``.
    """

    which: Which
    endpoint: str
    limit_value: float
    correction_slope: float
    anchor_r: Optional[float] = None

    def start_value(self, r: float) -> float:
        if self.endpoint == "zero":
            return self.limit_value + self.correction_slope * r
        return self.limit_value + self.correction_slope / r

    def correction(self, r: float) -> float:
        return self.start_value(r) - self.limit_value


def distinguished_spec(which, p: ModelParams, anchor_r: Optional[float] = None) -> DistinguishedSpec:
    which = Which(which)
    k, c, alpha = p.k, p.c, p.alpha
    ang = asymptotic_angles(k, c, alpha)
    gamma = p.gamma
    if which in (Which.THETA0, Which.THETA0_SIMPLIFIED):
        limit = math.pi if alpha == -1 else 0.5 * math.pi
        if which is Which.THETA0_SIMPLIFIED:
            # rho theta' = c + (k + alpha/rho) sin 2theta balanced against alpha/rho
            slope = 0.5 * c
        else:
            if p.a == 0:
                raise DomainError("Theta0 needs a < 0; use X0 for a = 0")
            slope = 0.5 * c / (-p.a)
    elif which is Which.X0:
        limit = ang.theta_plus
        slope = (p.mu * math.cos(2 * ang.theta_plus) - p.lam) / (1.0 + 2.0 * gamma)
    elif which is Which.XINF:
        s = math.sqrt(max(0.0, 1.0 - p.lam * p.lam))
        if s == 0.0:
            raise ConvergenceError("X_inf is not defined by decay at |lambda| = 1")
        limit = infinity_angles(p.mu, p.lam).x_minus
        slope = -(c + k * math.sin(2 * limit)) / (2.0 * s)
    else:
        limit = ang.theta_minus
        slope = alpha * c / (k * (1.0 + 2.0 * gamma))
    return DistinguishedSpec(which, which.endpoint, limit, slope, anchor_r)


def init_at_zero(which, p: ModelParams, r0: float) -> float:
    """Asymptotic start value of a zero-normalised distinguished solution at ``r0``."""
    spec = distinguished_spec(which, p)
    if spec.endpoint != "zero":
        raise DomainError(f"{spec.which.value} is normalised at infinity")
    if not r0 > 0:
        raise DomainError("r0 must be positive")
    return spec.start_value(r0)


def init_at_infinity(which, p: ModelParams, r_max: float) -> float:
    spec = distinguished_spec(which, p)
    if spec.endpoint != "infinity":
        raise DomainError(f"{spec.which.value} is normalised at zero")
    return spec.start_value(r_max)


def _default_anchor(which: Which, p: ModelParams, r_eval: float) -> float:
    if which is Which.X0:
        return min(1e-6, 1e-3 * r_eval)
    rho0 = 0.05
    scale = 1.0 if which is Which.THETA0_SIMPLIFIED else -p.a
    return min(rho0 * scale, 1e-3 * r_eval)


def _integrate_from_zero(which, p, r0, r_eval, ctl, kind):
    spec = distinguished_spec(which, p)
    return integrate(kind, p, r0, r_eval, spec.start_value(r0), ctl)


def choose_anchor(which, p: ModelParams, r_eval: float, ctl: Optional[StepControl] = None,
                  kind: Optional[EquationKind] = None, r0: Optional[float] = None,
                  max_halvings: int = 40) -> tuple[float, AngleTrace]:
    """Shrink the start radius until the first-order correction is below 1e-3 rad and
    halving it changes the value at ``r_eval`` by less than 1e-8.

    Returns the accepted anchor and the trace started from it.
    """
    which = Which(which)
    ctl = ctl or StepControl()
    kind = kind or which.default_kind
    spec = distinguished_spec(which, p)
    r0 = r0 if r0 is not None else _default_anchor(which, p, r_eval)
    while abs(spec.correction(r0)) >= MAX_PREDICTED_CORRECTION:
        r0 *= 0.5
    trace = _integrate_from_zero(which, p, r0, r_eval, ctl, kind)
    for _ in range(max_halvings):
        half = _integrate_from_zero(which, p, 0.5 * r0, r_eval, ctl, kind)
        if abs(half.final - trace.final) < SELF_CONSISTENCY_TOL:
            return r0, trace
        r0, trace = 0.5 * r0, half
    raise ConvergenceError(
        f"{which.value}: no self-consistent anchor down to r0={r0:.3g} "
        f"(last change {abs(half.final - trace.final):.3g})"
    )


def infinity_radius(which, p: ModelParams, r_eval: float, budget: float = 30.0) -> float:
    """Start radius for a solution normalised at infinity.

    ``Xinf`` decays backward at rate ``2 sqrt(1 - lam^2)`` once past the outer
    turning point ``|c|/(1 - lam)``, so ``budget / sqrt(1 - lam^2)`` beyond it
    gives ``2*budget`` e-folds of contraction.
    """
    which = Which(which)
    if which is Which.XINF:
        s = math.sqrt(max(0.0, 1.0 - p.lam * p.lam))
        if s < 1e-8:
            raise ConvergenceError(f"contraction budget unattainable for lambda={p.lam!r}")
        r_turn = -p.c / (1.0 - p.lam)
        return max(r_eval, r_turn) + budget / s
    ang = asymptotic_angles(p.k, p.c, p.alpha)
    base = max(r_eval, 1.0 / p.k, ang.rho_plus)
    return base * math.exp(min(budget / p.gamma, 40.0))


def solve_distinguished(which, p: ModelParams, r_eval: float, ctl: Optional[StepControl] = None, *,
                        kind: Optional[EquationKind] = None, anchor_r: Optional[float] = None,
                        check: bool = True, budget: float = 30.0) -> tuple[float, AngleTrace]:
    """Value at ``r_eval`` of a distinguished solution, and the trace leading to it.

    ``kind`` overrides the equation (e.g. ``FULL_PRUFER`` with a cutoff for ``Theta0``,
    or without a cutoff for ``Xinf`` of the uncut operator).  With ``check`` the
    anchor at zero is validated by :func:`choose_anchor`; otherwise ``anchor_r`` (or
    the default) is used as is.
    """
    which = Which(which)
    ctl = ctl or StepControl()
    kind = kind or which.default_kind
    if not r_eval > 0:
        raise DomainError("r_eval must be positive")
    if which.endpoint == "zero":
        if check:
            _, trace = choose_anchor(which, p, r_eval, ctl, kind, r0=anchor_r)
        else:
            r0 = anchor_r if anchor_r is not None else _default_anchor(which, p, r_eval)
            spec = distinguished_spec(which, p)
            while abs(spec.correction(r0)) >= MAX_PREDICTED_CORRECTION:
                r0 *= 0.5
            trace = _integrate_from_zero(which, p, r0, r_eval, ctl, kind)
    else:
        r_max = anchor_r if anchor_r is not None else infinity_radius(which, p, r_eval, budget)
        if r_max <= r_eval:
            raise DomainError("start radius at infinity must exceed r_eval")
        trace = integrate(kind, p, r_max, r_eval, init_at_infinity(which, p, r_max), ctl)
    return trace.final, trace


@dataclass(frozen=True)
class LimitClass:
    """Asymptotic class of a simplified-equation solution.

    ``bucket_m`` is ``None`` when unresolved.
    """

    limit: float
    bucket_m: Optional[int]
    evidence_window: tuple
    residual: float
    final_angle: float = float("nan")

    @property
    def resolved(self) -> bool:
        return self.bucket_m is not None


def _trap_halfwidth(ang, threshold):
    return min(threshold, 0.45 * (ang.theta_plus - ang.theta_minus))


def classify_limit(trace: AngleTrace, p: ModelParams, threshold: float = BUCKET_THRESHOLD,
                   grid_n: int = 32) -> LimitClass:
    """Bucket index ``m`` with ``lim theta = theta_+(c) - m pi`` for a simplified trace.

    ``m`` is reported only if the final angle sits within the threshold of
    ``theta_+ - m pi`` and that neighbourhood is a certified trapping interval on
    ``[rho_end, inf)``; otherwise the class is unresolved.
    """
    ang = asymptotic_angles(p.k, p.c, p.alpha)
    rho_end = float(trace.r[-1])
    final = trace.final
    w = _trap_halfwidth(ang, threshold)
    m = int(round((ang.theta_plus - final) / math.pi))
    target = ang.theta_plus - m * math.pi
    residual = abs(final - target)
    window = (rho_end, rho_end * 1e6)
    lo, hi = target - w, target + w
    trapped = (
        residual < w
        and stable_interval_check(SIMPLIFIED, p, lo, hi, window, grid_n)
        # the rhs at fixed angle is affine in 1/rho, so rho -> inf closes the check
        and p.c + p.k * math.sin(2 * lo) > 0
        and p.c + p.k * math.sin(2 * hi) < 0
    )
    limit = math.fmod(final, math.pi)
    if limit < 0:
        limit += math.pi
    if trapped:
        return LimitClass(target % math.pi, m, window, residual, final)
    return LimitClass(limit, None, window, residual, final)


def simplified_limit(p: ModelParams, rho_max: Optional[float] = None, ctl: Optional[StepControl] = None,
                     max_rho: float = 1e120, extension: float = 1e8,
                     threshold: float = BUCKET_THRESHOLD) -> LimitClass:
    """Classify ``theta_0`` of the simplified equation.

    The trace is extended geometrically (cheap in log-radius) past ``rho_max`` until
    the final angle is trapped or ``max_rho`` is reached.
    """
    ctl = ctl or StepControl()
    ang = asymptotic_angles(p.k, p.c, p.alpha)
    if rho_max is None:
        rho_max = max(1e6, 100.0 * max(ang.rho_plus, 1.0 / p.k))
    _, trace = solve_distinguished(Which.THETA0_SIMPLIFIED, p, rho_max, ctl, check=False)
    cls = classify_limit(trace, p, threshold)
    rho, value = rho_max, trace.final
    while not cls.resolved and rho * extension <= max_rho:
        nxt = integrate(SIMPLIFIED, p, rho, rho * extension, value, ctl)
        rho, value = rho * extension, nxt.final
        cls = classify_limit(nxt, p, threshold)
    return cls


def phase_drop_bounds(k: float, c: float) -> tuple[float, float]:
    """Closed-form bounds on ``theta(rho_+) - theta(rho_-)`` for any solution of the
    simplified equation with ``alpha = -1``.

    They follow from ``(c - |k - 1/rho|)/rho <= theta' <= (c + |k - 1/rho|)/rho``
    integrated across the gap.
    """
    if not (-k < c < 0):
        raise DomainError(f"c must lie in (-k, 0), got {c!r}")
    lower = (c - k) * math.log(k / (k + c)) - (c + k) * math.log(k / (k - c))
    upper = (k - c) * math.log(k / (k - c)) + (k + c) * math.log(k / (k + c))
    return lower, upper
