"""Scalar Pruefer and Riccati equations and a log-radius integrator for them.

All equations are first order and scalar with singular points at ``r = 0`` and
``r = inf``.  Integration runs in ``t = log r``: the ``1/r`` terms become bounded
and the ``1/r^2`` anomaly term becomes ``e^{-t}``, so both ends are reached over
finite ``t``-intervals with an ordinary explicit embedded Runge-Kutta pair.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from math import cos, exp, log, sin
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DomainError, RiccatiPoleError, StepSizeError
from .model import ModelParams

__all__ = [
    "Equation",
    "EquationKind",
    "StepControl",
    "AngleTrace",
    "Envelope",
    "rhs",
    "log_rhs",
    "integrate",
    "integrate_function",
    "comparison_envelope",
    "stable_interval_check",
    "POLE_GUARD",
]

POLE_GUARD = 1e6
# Accepted steps may move an angle by less than this; keeps mod-pi bookkeeping safe.
MAX_ANGLE_INCREMENT = math.pi / 4


class Equation(enum.Enum):
    SIMPLIFIED_PRUFER = "21"
    FULL_PRUFER = "31"
    ZERO_PRUFER = "32"
    RICCATI_ZERO = "33"
    RICCATI_FULL = "34"
    RICCATI_DIFF = "35"

    @property
    def is_angle(self) -> bool:
        return self in (Equation.SIMPLIFIED_PRUFER, Equation.FULL_PRUFER, Equation.ZERO_PRUFER)

    @property
    def has_anomaly(self) -> bool:
        return self in (Equation.FULL_PRUFER, Equation.RICCATI_FULL, Equation.RICCATI_DIFF)


@dataclass(frozen=True)
class EquationKind:
    """An equation of the catalog plus the optional anomaly cutoff radius ``R``.

    With a cutoff the ``|a|/r^2`` term is multiplied by the indicator of ``(0, R)``.
    """

    tag: Equation
    cutoff_R: Optional[float] = None

    def __post_init__(self):
        if self.cutoff_R is not None:
            if not self.tag.has_anomaly:
                raise DomainError(f"cutoff_R is meaningless for equation {self.tag.value}")
            if not self.cutoff_R > 0:
                raise DomainError(f"cutoff_R must be positive, got {self.cutoff_R!r}")

    @classmethod
    def coerce(cls, kind) -> "EquationKind":
        if isinstance(kind, EquationKind):
            return kind
        if isinstance(kind, Equation):
            return cls(kind)
        return cls(Equation(str(kind)))


SIMPLIFIED = EquationKind(Equation.SIMPLIFIED_PRUFER)
ZERO = EquationKind(Equation.ZERO_PRUFER)


@dataclass(frozen=True)
class StepControl:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step_log: float = 0.25
    min_r: float = 1e-300
    max_r: float = 1e300
    max_steps: int = 400_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not (0 < v <= 1e-2):
                raise DomainError(f"{name} must lie in (0, 1e-2], got {v!r}")
        if not self.max_step_log > 0:
            raise DomainError("max_step_log must be positive")
        if not (0 < self.min_r < self.max_r):
            raise DomainError("need 0 < min_r < max_r")

    def refined(self, factor: float = 0.5) -> "StepControl":
        return StepControl(
            self.rel_tol * factor, self.abs_tol * factor, self.max_step_log,
            self.min_r, self.max_r, self.max_steps,
        )


@dataclass(frozen=True)
class AngleTrace:
    """Sampled solution ``(r_i, y_i)`` in integration order."""

    r: np.ndarray
    values: np.ndarray
    direction: str
    coordinates: str = "log-r"
    accepted_tolerance: float = 0.0
    variable: str = "theta"

    def __len__(self):
        return len(self.r)

    @property
    def final(self) -> float:
        return float(self.values[-1])

    @property
    def initial(self) -> float:
        return float(self.values[0])

    def max_increment(self) -> float:
        if len(self.values) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values))))

    def value_at(self, r: float) -> float:
        """Value at a sample radius (exact match, up to 1 ulp-scale relative error)."""
        idx = np.flatnonzero(np.isclose(self.r, r, rtol=1e-13, atol=0.0))
        if idx.size == 0:
            raise KeyError(f"r={r!r} is not a sample point of this trace")
        return float(self.values[idx[-1]])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", self.variable])
            for r, v in zip(self.r, self.values):
                w.writerow([f"{r:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path, direction: str = "forward") -> "AngleTrace":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        r = np.array([float(row[0]) for row in body])
        v = np.array([float(row[1]) for row in body])
        return cls(r, v, direction, variable=header[1])


# ---------------------------------------------------------------------------
# right-hand sides


def rhs(kind, r: float, y: float, p: ModelParams, companion: Optional[Callable[[float], float]] = None) -> float:
    """``dy/dr`` for an equation of the catalog (``d theta/d rho`` for the simplified one).

    Where an equation is written as ``r y' = F`` this returns ``F/r``.  The Riccati
    forms use ``mu`` explicitly: ``(c - (lam + mu) r) y^2 + ... + c - (lam - mu) r``,
    which is the printed form for ``mu = 1``.  ``RICCATI_DIFF`` needs the companion
    solution ``z(r)`` of the zero-anomaly Riccati equation.
    """
    kind = EquationKind.coerce(kind)
    if not r > 0:
        raise DomainError(f"r must be positive, got {r!r}")
    k, c, alpha, mu, lam = p.k, p.c, p.alpha, p.mu, p.lam
    abs_a = -p.a
    if kind.cutoff_R is not None and r >= kind.cutoff_R:
        abs_a = 0.0
    tag = kind.tag
    if tag is Equation.SIMPLIFIED_PRUFER:
        return (c + (k + alpha / r) * math.sin(2 * y)) / r
    if tag is Equation.FULL_PRUFER:
        return c / r + (k / r + alpha * abs_a / r**2) * math.sin(2 * y) + mu * math.cos(2 * y) - lam
    if tag is Equation.ZERO_PRUFER:
        return c / r + (k / r) * math.sin(2 * y) + mu * math.cos(2 * y) - lam
    if tag is Equation.RICCATI_ZERO:
        return ((c - (lam + mu) * r) * y * y + 2 * k * y + c - (lam - mu) * r) / r
    if tag is Equation.RICCATI_FULL:
        return ((c - (lam + mu) * r) * y * y + 2 * (k + alpha * abs_a / r) * y + c - (lam - mu) * r) / r
    if tag is Equation.RICCATI_DIFF:
        if companion is None:
            raise DomainError("RICCATI_DIFF needs the companion solution z(r)")
        z = companion(r)
        return (((c - (lam + mu) * r) * (y + 2 * z) + 2 * k) * y + 2 * alpha * abs_a * (y + z) / r) / r
    raise DomainError(f"unknown equation {tag!r}")


def log_rhs(kind, p: ModelParams, anomaly_on: bool = True, companion=None) -> Callable[[float, float], float]:
    """Closure ``g(t, y) = r * dy/dr`` at ``r = e^t``.

    ``anomaly_on`` selects the side of the cutoff; the integrator splits the range at
    ``R`` so a closure never sees both sides.
    """
    kind = EquationKind.coerce(kind)
    tag = kind.tag
    k, c, alpha, mu, lam = p.k, p.c, float(p.alpha), float(p.mu), p.lam
    aa = alpha * (-p.a) if anomaly_on else 0.0
    lp, lm = lam + mu, lam - mu

    if tag is Equation.SIMPLIFIED_PRUFER:
        def g(t, y):
            return c + (k + alpha * exp(-t)) * sin(2.0 * y)
    elif tag is Equation.FULL_PRUFER:
        if aa == 0.0:
            def g(t, y):
                r = exp(t)
                return c + k * sin(2.0 * y) + r * (mu * cos(2.0 * y) - lam)
        else:
            def g(t, y):
                r = exp(t)
                y2 = 2.0 * y
                return c + (k + aa / r) * sin(y2) + r * (mu * cos(y2) - lam)
    elif tag is Equation.ZERO_PRUFER:
        def g(t, y):
            r = exp(t)
            return c + k * sin(2.0 * y) + r * (mu * cos(2.0 * y) - lam)
    elif tag is Equation.RICCATI_ZERO:
        def g(t, y):
            r = exp(t)
            return (c - lp * r) * y * y + 2.0 * k * y + c - lm * r
    elif tag is Equation.RICCATI_FULL:
        def g(t, y):
            r = exp(t)
            return (c - lp * r) * y * y + 2.0 * (k + aa / r) * y + c - lm * r
    elif tag is Equation.RICCATI_DIFF:
        if companion is None:
            raise DomainError("RICCATI_DIFF needs the companion solution z(r)")

        def g(t, y):
            r = exp(t)
            z = companion(r)
            return ((c - lp * r) * (y + 2.0 * z) + 2.0 * k) * y + 2.0 * aa * (y + z) / r
    else:
        raise DomainError(f"unknown equation {tag!r}")
    return g


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


def _segment(g, t0, t1, y0, h, ctl, angle, pole, ts, ys):
    """Integrate ``dy/dt = g(t, y)`` from t0 to t1, appending accepted samples.

    Returns the step size proposed for a following segment.
    """
    rtol, atol, hmax = ctl.rel_tol, ctl.abs_tol, ctl.max_step_log
    sgn = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    hmin = 1e-13 * max(1.0, abs(t0), abs(t1))
    h = sgn * min(abs(h), hmax, span)
    t, y = t0, y0
    k1 = g(t, y)
    steps = 0
    while sgn * (t1 - t) > 0:
        steps += 1
        if steps > ctl.max_steps:
            raise StepSizeError(f"step budget exhausted near r={exp(t):.6g}", r=exp(t))
        last = abs(h) >= abs(t1 - t) * (1.0 - 1e-12)
        if last:
            h_full, h = h, t1 - t
        k2 = g(t + _C2 * h, y + h * _A21 * k1)
        k3 = g(t + _C3 * h, y + h * (_A31 * k1 + _A32 * k2))
        k4 = g(t + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
        k5 = g(t + _C5 * h, y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
        tn = t1 if last else t + h
        k6 = g(tn, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
        yn = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = g(tn, yn)
        err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        scale = atol + rtol * max(abs(y), abs(yn))
        errn = abs(err) / scale
        ok = errn <= 1.0
        if errn != errn:
            ok, errn = False, 1e10
        if ok and angle and abs(yn - y) >= MAX_ANGLE_INCREMENT:
            ok, errn = False, max(errn, 32.0)
        if ok:
            if pole is not None and abs(yn) > pole:
                raise RiccatiPoleError(
                    f"Riccati solution exceeded pole guard {pole:g} near r={exp(tn):.6g}", r=exp(tn)
                )
            t, y, k1 = tn, yn, k7
            ts.append(t)
            ys.append(y)
            fac = 5.0 if errn == 0.0 else min(5.0, 0.9 * errn ** -0.2)
            # a truncated final step says nothing about the next segment
            h = sgn * min(max(abs(h) * fac, abs(h_full)) if last else abs(h) * fac, hmax)
        else:
            fac = max(0.1, 0.9 * errn ** -0.2)
            h *= fac
            if abs(h) < hmin:
                raise StepSizeError(f"step size underflow near r={exp(t):.6g}", r=exp(t))
    return h


def _run(segments, r_start, y_start, ctl, angle, pole):
    """Run consecutive segments ``(g, r_a, r_b)``; returns radii and values with the
    segment end points reproduced exactly."""
    ts, ys = [log(r_start)], [float(y_start)]
    exact = [(0, r_start)]
    h = ctl.max_step_log * 0.01
    for g, ra, rb in segments:
        if ra != rb:
            h = _segment(g, log(ra), log(rb), ys[-1], h, ctl, angle, pole, ts, ys)
        exact.append((len(ts) - 1, rb))
    r = np.exp(np.array(ts))
    for i, rv in exact:
        r[i] = rv
    return r, np.array(ys)


def _check_range(ctl, *rs):
    for r in rs:
        if not (ctl.min_r <= r <= ctl.max_r):
            raise DomainError(f"radius {r!r} outside [{ctl.min_r:g}, {ctl.max_r:g}]")


def _breakpoints(r_start, r_end, stops):
    lo, hi = min(r_start, r_end), max(r_start, r_end)
    pts = sorted({float(s) for s in stops if lo < s < hi}, reverse=bool(r_end < r_start))
    return [r_start] + pts + [r_end]


def integrate(
    kind,
    p: ModelParams,
    r_start: float,
    r_end: float,
    y_start: float,
    ctl: Optional[StepControl] = None,
    *,
    companion: Optional[Callable[[float], float]] = None,
    stops: Sequence[float] = (),
    pole_guard: float = POLE_GUARD,
) -> AngleTrace:
    """Integrate one equation of the catalog between two radii (either direction).

    The cutoff radius, if any, and all ``stops`` become mesh points.  Riccati charts
    abort with :class:`RiccatiPoleError` once ``|y|`` exceeds ``pole_guard``.
    Results are bit-reproducible for identical inputs.
    """
    kind = EquationKind.coerce(kind)
    ctl = ctl or StepControl()
    _check_range(ctl, r_start, r_end)
    R = kind.cutoff_R
    bps = _breakpoints(r_start, r_end, list(stops) + ([R] if R is not None else []))
    cache = {}
    segments = []
    for ra, rb in zip(bps, bps[1:]):
        on = R is None or 0.5 * (ra + rb) < R
        if on not in cache:
            cache[on] = log_rhs(kind, p, anomaly_on=on, companion=companion)
        segments.append((cache[on], ra, rb))
    angle = kind.tag.is_angle
    r, ys = _run(segments, r_start, y_start, ctl, angle, None if angle else pole_guard)
    return AngleTrace(
        r=r,
        values=ys,
        direction="forward" if r_end > r_start else "backward",
        accepted_tolerance=ctl.rel_tol,
        variable="theta" if angle else "y",
    )


def integrate_function(
    f: Callable[[float, float], float],
    r_start: float,
    r_end: float,
    y_start: float,
    ctl: Optional[StepControl] = None,
    *,
    angle: bool = True,
    stops: Sequence[float] = (),
) -> AngleTrace:
    """Same integrator for an arbitrary ``dy/dr = f(r, y)``."""
    ctl = ctl or StepControl()
    _check_range(ctl, r_start, r_end)

    def g(t, y):
        r = exp(t)
        return r * f(r, y)

    bps = _breakpoints(r_start, r_end, stops)
    segments = [(g, a, b) for a, b in zip(bps, bps[1:])]
    r, ys = _run(segments, r_start, y_start, ctl, angle, None)
    return AngleTrace(r, ys, "forward" if r_end > r_start else "backward",
                      accepted_tolerance=ctl.rel_tol, variable="theta" if angle else "y")


# ---------------------------------------------------------------------------
# comparison utilities


class Envelope(NamedTuple):
    lo: AngleTrace
    hi: AngleTrace
    ordered: bool


def comparison_envelope(f_lo, f_hi, r0, y_lo0, y_hi0, r1, ctl=None, tol=1e-9) -> Envelope:
    """Integrate ``y' = f_lo`` and ``y' = f_hi`` from ``r0`` to ``r1`` and report whether
    the solutions stay ordered (Caplygin/Peano comparison).

    The upper solution is forced through every sample radius of the lower one so
    the comparison is made at shared points.  ``f_lo <= f_hi`` is a caller-asserted
    hypothesis; it is spot-checked on both traces and a violation raises
    :class:`DomainError`.
    """
    ctl = ctl or StepControl()
    lo = integrate_function(f_lo, r0, r1, y_lo0, ctl, angle=False)
    hi = integrate_function(f_hi, r0, r1, y_hi0, ctl, angle=False, stops=lo.r[1:-1])
    hi_at = dict(zip(hi.r.tolist(), hi.values.tolist()))
    pairs = [(r, y, hi_at[r]) for r, y in zip(lo.r.tolist(), lo.values.tolist()) if r in hi_at]
    for r, ylo, yhi in pairs[:: max(1, len(pairs) // 50)]:
        for y in (ylo, yhi):
            d = f_lo(r, y) - f_hi(r, y)
            if d > tol * (1.0 + abs(f_hi(r, y))):
                raise DomainError(f"comparison hypothesis f_lo <= f_hi violated at r={r:.6g}, y={y:.6g}")
    ordered = all(ylo <= yhi + tol for _, ylo, yhi in pairs)
    return Envelope(lo, hi, ordered)


def stable_interval_check(kind, p: ModelParams, y1: float, y2: float, r_window, grid_n: int = 64,
                          companion=None) -> bool:
    """True iff ``f(r, y1) > 0`` and ``f(r, y2) < 0`` on a log-spaced grid of the window,
    which makes ``[y1, y2]`` forward-invariant there."""
    if grid_n < 2:
        raise DomainError("grid_n must be at least 2")
    if not y1 < y2:
        return False
    r_lo, r_hi = r_window
    for r in np.geomspace(r_lo, r_hi, grid_n):
        r = float(r)
        if not (rhs(kind, r, y1, p, companion) > 0 and rhs(kind, r, y2, p, companion) < 0):
            return False
    return True
