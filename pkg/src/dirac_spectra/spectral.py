"""Shooting eigensolver for the radial Coulomb-Dirac operator.

The angle normalised at the origin (``Theta0`` for ``a < 0``, ``X0`` for ``a = 0``)
is matched against ``Xinf`` at the radius ``R``.  The mismatch

    D(lam) = left(R, lam) - Xinf(R, lam)

is continuous and strictly decreasing in ``lam``; eigenvalues are the solutions of
``D(lam) = -j*pi`` and ``j`` is reported as the branch index.  For ``a = 0`` the
branch index coincides with the usual radial quantum number ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .distinguished import Which, choose_anchor, simplified_limit, solve_distinguished
from .errors import ConvergenceError, DomainError, GridTooCoarseError, NumericalError
from .model import ModelParams, asymptotic_angles
from .odecore import ZERO, AngleTrace, Equation, EquationKind, StepControl
from .parallel import parallel_map

__all__ = [
    "MatchConfig",
    "EigenResult",
    "Eigenfunction",
    "SweepPoint",
    "SweepResult",
    "Certificate",
    "Shooter",
    "mismatch",
    "find_eigenvalues",
    "eigenfunction",
    "sweep_anomaly",
    "variant_gap",
    "stability_certificate",
]

VARIANTS = ("auxiliary", "full")
# the search never touches the degenerate edges lam = +-1
LAMBDA_EDGE = 1.0 - 1e-9
EIGENFUNCTION_STEP = 0.01


@dataclass(frozen=True)
class MatchConfig:
    """Matching radius (also the anomaly cutoff of the auxiliary operator), search
    window, bisection tolerance and operator variant."""

    R: float = 1.0
    lambda_window: tuple = (-0.99, 0.99)
    bisect_tol: float = 1e-10
    variant: str = "auxiliary"
    grid_step: float = 1e-3
    ctl: StepControl = field(default_factory=StepControl)
    budget: float = 30.0
    max_refine: int = 16

    def __post_init__(self):
        lo, hi = (float(x) for x in self.lambda_window)
        object.__setattr__(self, "lambda_window", (lo, hi))
        if not self.R > 0:
            raise DomainError(f"matching radius R must be positive, got {self.R!r}")
        if not (-1.0 < lo < hi < 1.0):
            raise DomainError(f"lambda window must satisfy -1 < lo < hi < 1, got {self.lambda_window!r}")
        if not self.bisect_tol > 0:
            raise DomainError("bisect_tol must be positive")
        if not self.grid_step > 0:
            raise DomainError("grid_step must be positive")
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    def with_window(self, lo: float, hi: float) -> "MatchConfig":
        return replace(self, lambda_window=(max(lo, -LAMBDA_EDGE), min(hi, LAMBDA_EDGE)))


@dataclass(frozen=True)
class EigenResult:
    lam: float
    branch_index: int
    nodes: int
    residual: float
    variant: str
    a: float
    lower_nodes: int = 0
    kappa: float = float("nan")
    c: float = float("nan")

    def row(self) -> dict:
        return {
            "kappa": self.kappa, "c": self.c, "a": self.a, "variant": self.variant,
            "branch_index": self.branch_index, "lambda": self.lam, "nodes": self.nodes,
            "residual": self.residual,
        }


class Shooter:
    """Mismatch evaluator for one parameter set; the start radius at the origin is
    validated once (at the window midpoint) and then reused for every ``lam``."""

    def __init__(self, p: ModelParams, cfg: MatchConfig, anchor: Optional[float] = None):
        self.p = p
        self.cfg = cfg
        R = cfg.R
        if p.a == 0:
            self.which = Which.X0
            self.left_kind = ZERO
            self.right_kind = ZERO
        else:
            self.which = Which.THETA0
            cut = R if cfg.variant == "auxiliary" else None
            self.left_kind = EquationKind(Equation.FULL_PRUFER, cutoff_R=cut)
            self.right_kind = ZERO if cfg.variant == "auxiliary" else EquationKind(Equation.FULL_PRUFER)
        if anchor is None:
            mid = 0.5 * sum(cfg.lambda_window)
            anchor, _ = choose_anchor(self.which, p.replace(lam=mid), R, cfg.ctl, self.left_kind)
        self.anchor = anchor

    def left(self, lam: float) -> AngleTrace:
        _, trace = solve_distinguished(
            self.which, self.p.replace(lam=lam), self.cfg.R, self.cfg.ctl,
            kind=self.left_kind, anchor_r=self.anchor, check=False,
        )
        return trace

    def right(self, lam: float) -> AngleTrace:
        _, trace = solve_distinguished(
            Which.XINF, self.p.replace(lam=lam), self.cfg.R, self.cfg.ctl,
            kind=self.right_kind, budget=self.cfg.budget,
        )
        return trace

    def __call__(self, lam: float) -> float:
        return self.left(lam).final - self.right(lam).final


def mismatch(lam: float, p: ModelParams, cfg: Optional[MatchConfig] = None) -> float:
    """``D(lam) = left(R, lam) - Xinf(R, lam)``; eigenvalues are where ``D`` is a
    multiple of pi."""
    cfg = cfg or MatchConfig()
    return Shooter(p, cfg)(lam)


def _eval_task(args):
    p, cfg, anchor, lam = args
    return Shooter(p, cfg, anchor)(lam)


def _scan(shoot: Shooter, lo: float, hi: float, step: float):
    n = max(2, int(math.ceil((hi - lo) / step - 1e-9)) + 1)
    grid = np.linspace(lo, hi, n).tolist()
    tasks = [(shoot.p, shoot.cfg, shoot.anchor, lam) for lam in grid]
    values = parallel_map(_eval_task, tasks)
    return grid, values


def _refine(shoot: Shooter, grid: list, values: list, max_refine: int):
    """Insert midpoints until adjacent mismatch values differ by less than pi."""
    lams, ds = [grid[0]], [values[0]]
    stack = list(zip(grid[1:], values[1:], [0] * (len(grid) - 1)))[::-1]
    while stack:
        lam_b, d_b, depth = stack.pop()
        lam_a, d_a = lams[-1], ds[-1]
        if d_a - d_b >= math.pi:
            if depth >= max_refine:
                raise GridTooCoarseError(
                    f"mismatch still jumps by {d_a - d_b:.3g} on [{lam_a:.12g}, {lam_b:.12g}] "
                    f"after {max_refine} refinements"
                )
            mid = 0.5 * (lam_a + lam_b)
            stack.append((lam_b, d_b, depth + 1))
            stack.append((mid, shoot(mid), depth + 1))
            continue
        lams.append(lam_b)
        ds.append(d_b)
    return lams, ds


def _bisect(shoot: Shooter, level: float, a: float, b: float, d_a: float, tol: float):
    """Root of the decreasing function ``D - level`` in ``[a, b)``."""
    if d_a == level:
        return a, 0.0
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if shoot(mid) > level:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b), b - a


def _crossings(theta: np.ndarray, offset: float) -> int:
    levels = np.floor((theta - offset) / math.pi)
    return int(np.sum(np.abs(np.diff(levels))))


def _node_offsets(mu: int) -> tuple[float, float]:
    # mu = 1: u = |u|(cos, sin); mu = -1: u = |u|(sin, -cos)
    return (0.5 * math.pi, 0.0) if mu == 1 else (0.0, 0.5 * math.pi)


def _profile(shoot: Shooter, lam: float):
    """Angle along (0, inf): left trace, then the right trace shifted by the integer
    multiple of pi that makes it continuous at R."""
    left = shoot.left(lam)
    right = shoot.right(lam)
    D = left.final - right.final
    j = int(round(D / math.pi))
    r = np.concatenate([left.r, right.r[::-1][1:]])
    theta = np.concatenate([left.values, right.values[::-1][1:] + j * math.pi])
    inner = np.zeros(len(r), dtype=bool)
    inner[: len(left.r)] = True
    return r, theta, inner, D, j


def _node_counts(p: ModelParams, theta: np.ndarray) -> tuple[int, int]:
    up, low = _node_offsets(p.mu)
    return _crossings(theta, up), _crossings(theta, low)


def find_eigenvalues(p: ModelParams, cfg: Optional[MatchConfig] = None) -> list[EigenResult]:
    """All eigenvalues in ``cfg.lambda_window`` (half-open at the top), sorted.

    A grid scan brackets every level ``-j*pi`` crossed by ``D``; each bracket is
    bisected to ``bisect_tol``.  The returned ``residual`` is the final bracket width.
    """
    cfg = cfg or MatchConfig()
    shoot = Shooter(p, cfg)
    lo, hi = cfg.lambda_window
    grid, values = _scan(shoot, lo, hi, cfg.grid_step)
    grid, values = _refine(shoot, grid, values, cfg.max_refine)
    for (la, da), (lb, db) in zip(zip(grid, values), zip(grid[1:], values[1:])):
        if db > da + 1e-6:
            raise NumericalError(
                f"mismatch increases on [{la:.12g}, {lb:.12g}] ({da:.12g} -> {db:.12g}); "
                "tighten the step control"
            )
    results = []
    for (la, da), (lb, db) in zip(zip(grid, values), zip(grid[1:], values[1:])):
        j_hi = math.floor(da / math.pi)
        j_lo = math.floor(db / math.pi)
        for j in range(j_hi, j_lo, -1):
            level = j * math.pi
            if not (db < level <= da):
                continue
            lam, width = _bisect(shoot, level, la, lb, da, cfg.bisect_tol)
            _, theta, _, _, _ = _profile(shoot, lam)
            nodes, lower = _node_counts(p, theta)
            results.append(EigenResult(
                lam=lam, branch_index=-j, nodes=nodes, residual=width, variant=cfg.variant,
                a=p.a, lower_nodes=lower, kappa=p.kappa, c=p.c,
            ))
    results.sort(key=lambda e: e.lam)
    return results


@dataclass(frozen=True)
class Eigenfunction:
    """Normalised eigenfunction on the integration mesh.

    ``u1`` is the upper component; ``nodes`` counts its sign changes on the whole
    half-line and ``lower_nodes`` those of ``u2``.
    """

    lam: float
    r: np.ndarray
    theta: np.ndarray
    log_u: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    nodes: int
    lower_nodes: int
    branch_index: int
    mismatch_residual: float
    mu: int

    def nodes_between(self, r_lo: float, r_hi: float, component: str = "upper") -> int:
        up, low = _node_offsets(self.mu)
        offset = up if component == "upper" else low
        sel = (self.r >= r_lo) & (self.r <= r_hi)
        return _crossings(self.theta[sel], offset)

    def norm(self) -> float:
        t = np.log(self.r)
        return float(np.trapezoid(np.exp(2.0 * self.log_u) * self.r, t))


def _log_radius_rate(p: ModelParams, r: np.ndarray, theta: np.ndarray, inner: np.ndarray,
                     variant: str) -> np.ndarray:
    """``r * (log|u|)'`` from ``(log|u|)' = mu sin 2theta - S cos 2theta`` where ``S`` is the
    coefficient of ``sin 2theta`` in the angle equation."""
    anomaly = -p.a * p.alpha / r**2
    if variant == "auxiliary":
        anomaly = np.where(inner, anomaly, 0.0)
    S = p.k / r + anomaly
    return r * (p.mu * np.sin(2 * theta) - S * np.cos(2 * theta))


def eigenfunction(p: ModelParams, lam: float, cfg: Optional[MatchConfig] = None,
                  grid: Optional[Sequence[float]] = None, residual_tol: float = 1e-5,
                  shooter: Optional[Shooter] = None) -> Eigenfunction:
    """Reconstruct ``u`` at an eigenvalue: the matched angle gives the direction and
    trapezoidal quadrature of the radius equation (in ``log r``) gives ``|u|``,
    normalised to ``int |u|^2 dr = 1``.  With ``grid`` the result is interpolated
    (linearly in ``log r``) onto those radii.
    """
    cfg = cfg or MatchConfig()
    if shooter is None:
        lo, hi = cfg.lambda_window
        if not lo <= lam <= hi:
            cfg = cfg.with_window(lam - 1e-3, lam + 1e-3)
        # a dense mesh keeps the quadrature and the interpolation accurate
        fine = replace(cfg.ctl, max_step_log=min(cfg.ctl.max_step_log, EIGENFUNCTION_STEP))
        cfg = replace(cfg, ctl=fine)
        shooter = Shooter(p, cfg)
    r, theta, inner, D, j = _profile(shooter, lam)
    res = abs(D - j * math.pi)
    if res > residual_tol:
        raise DomainError(
            f"lambda={lam!r} is not an eigenvalue: mismatch is {res:.3g} away from a multiple of pi"
        )
    t = np.log(r)
    rate = _log_radius_rate(p, r, theta, inner, cfg.variant)
    log_u = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(t))])
    log_u -= log_u.max()
    norm = np.trapezoid(np.exp(2.0 * log_u) * r, t)
    log_u -= 0.5 * math.log(norm)
    nodes, lower = _node_counts(p, theta)
    if grid is not None:
        g = np.asarray(grid, dtype=float)
        if np.any(g <= 0):
            raise DomainError("grid radii must be positive")
        tg = np.log(g)
        theta = np.interp(tg, t, theta)
        log_u = np.interp(tg, t, log_u, left=-np.inf, right=-np.inf)
        r = g
    mod = np.exp(log_u)
    if p.mu == 1:
        u1, u2 = mod * np.cos(theta), mod * np.sin(theta)
    else:
        u1, u2 = mod * np.sin(theta), -mod * np.cos(theta)
    return Eigenfunction(lam, r, theta, log_u, u1, u2, nodes, lower, -j, res, p.mu)


@dataclass(frozen=True)
class SweepPoint:
    a: float
    lambda_a: float
    count_in_window: int
    branch_index: Optional[int]
    nodes: Optional[int]
    lower_nodes: Optional[int]


@dataclass(frozen=True)
class SweepResult:
    """Eigenvalues near ``lambda0`` as the anomaly tends to zero.

    ``shift_m`` is the branch-index shift between the ``a = 0`` eigenvalue and its
    perturbation at the smallest ``|a|``; ``node_shift`` and ``lower_node_shift`` are
    the corresponding changes in the node counts of ``u1`` and ``u2``.
    """

    lambda0: float
    window_epsilon: float
    points: tuple
    reference: Optional[EigenResult]
    shift_m: Optional[int]
    node_shift: Optional[int]
    lower_node_shift: Optional[int]
    bucket_m: Optional[int] = None

    @property
    def branch(self) -> list:
        return [(pt.a, pt.lambda_a) for pt in self.points]

    @property
    def count_in_window(self) -> list:
        return [pt.count_in_window for pt in self.points]

    def distances(self) -> list:
        return [abs(pt.lambda_a - self.lambda0) for pt in self.points]

    @property
    def converging(self) -> bool:
        """Exactly one eigenvalue in the window for every ``a`` and the distance to
        ``lambda0`` strictly decreasing as ``|a|`` decreases."""
        if any(n != 1 for n in self.count_in_window):
            return False
        d = self.distances()
        return all(b < a for a, b in zip(d, d[1:]))

    def rows(self) -> list:
        return [
            {"a": pt.a, "lambda_a": pt.lambda_a, "count_in_window": pt.count_in_window,
             "shift_m": self.shift_m if self.shift_m is not None else ""}
            for pt in self.points
        ]


def _sweep_task(args):
    p, cfg = args
    return find_eigenvalues(p, cfg)


def sweep_anomaly(p_base: ModelParams, a_list: Sequence[float], lambda0: float, epsilon: float,
                  cfg: Optional[MatchConfig] = None) -> SweepResult:
    """Eigenvalues of ``H_a`` in ``(lambda0 - epsilon, lambda0 + epsilon)`` for each ``a``.

    ``a_list`` must increase strictly towards ``0-``.  The window at ``a = 0`` is
    solved too; if it holds exactly one eigenvalue that is the reference for the
    reported shifts.
    """
    cfg = cfg or MatchConfig()
    a_list = [float(a) for a in a_list]
    if not a_list:
        raise DomainError("a_list is empty")
    if any(a >= 0 for a in a_list):
        raise DomainError("all anomalies in a sweep must be negative")
    if any(b <= a for a, b in zip(a_list, a_list[1:])):
        raise DomainError("a_list must increase strictly towards 0")
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    wcfg = cfg.with_window(lambda0 - epsilon, lambda0 + epsilon)
    tasks = [(p_base.replace(a=0.0, lam=0.0), wcfg)] + [(p_base.replace(a=a, lam=0.0), wcfg) for a in a_list]
    found = parallel_map(_sweep_task, tasks)
    ref = found[0][0] if len(found[0]) == 1 else None
    points = []
    for a, res in zip(a_list, found[1:]):
        best = min(res, key=lambda e: abs(e.lam - lambda0)) if res else None
        points.append(SweepPoint(
            a=a,
            lambda_a=best.lam if best else float("nan"),
            count_in_window=len(res),
            branch_index=best.branch_index if best else None,
            nodes=best.nodes if best else None,
            lower_nodes=best.lower_nodes if best else None,
        ))
    last = points[-1]
    shift = nshift = lshift = None
    if ref is not None and last.count_in_window == 1:
        shift = last.branch_index - ref.branch_index
        nshift = last.nodes - ref.nodes
        lshift = last.lower_nodes - ref.lower_nodes
    bucket = 0
    if p_base.alpha == -1:
        bucket = simplified_limit(ModelParams(p_base.k, -1, p_base.mu, p_base.c)).bucket_m
    return SweepResult(lambda0, epsilon, tuple(points), ref, shift, nshift, lshift, bucket)


def variant_gap(p: ModelParams, cfg: Optional[MatchConfig] = None, branch_index: Optional[int] = None) -> float:
    """``|lam_aux - lam_full|`` for the same branch under both operator variants (the
    lowest branch found in both windows unless ``branch_index`` is given)."""
    if not p.a < 0:
        raise DomainError("variant_gap needs a < 0")
    cfg = cfg or MatchConfig()
    aux = {e.branch_index: e for e in find_eigenvalues(p, replace(cfg, variant="auxiliary"))}
    full = {e.branch_index: e for e in find_eigenvalues(p, replace(cfg, variant="full"))}
    common = sorted(set(aux) & set(full))
    if branch_index is None:
        if not common:
            raise ConvergenceError("no branch has an eigenvalue in the window under both variants")
        branch_index = common[0]
    elif branch_index not in common:
        raise ConvergenceError(f"branch {branch_index} not found in the window under both variants")
    return abs(aux[branch_index].lam - full[branch_index].lam)


@dataclass(frozen=True)
class Certificate:
    ok: bool
    a1: float
    violated: tuple
    lhs: tuple
    bound: float


def stability_certificate(k: float, c: float, d: float, R: float, lam: Optional[float], r_hat: float) -> Certificate:
    """Check the two smallness conditions on ``R`` under which the anomaly-free and the
    anomalous Riccati solutions stay in a common stable band up to ``R``, and return the
    anomaly threshold ``a1(r_hat)``.

    ``lam=None`` checks the conditions uniformly for ``lam`` in ``[-1, 1]`` (the worst
    case is ``lam = 1``).
    """
    problems = []
    if not k > 0:
        problems.append(f"k must be positive (got {k!r})")
    elif not (-k < c < 0):
        problems.append(f"c must lie in (-k, 0) = ({-k:g}, 0) (got {c!r})")
    if problems:
        raise DomainError("; ".join(problems))
    gamma = math.sqrt(k * k - c * c)
    d_max = gamma / (3 * abs(c))
    if not (0 < d < d_max):
        problems.append(f"d must lie in (0, sqrt(k^2-c^2)/(3|c|)) = (0, {d_max:.6g}) (got {d!r})")
    if not (0 < R <= d):
        problems.append(f"R must lie in (0, d] = (0, {d:g}] (got {R!r})")
    if not (0 < r_hat < R):
        problems.append(f"r_hat must lie in (0, R) = (0, {R:g}) (got {r_hat!r})")
    if lam is not None and not (-1 <= lam <= 1):
        problems.append(f"lambda must lie in [-1, 1] (got {lam!r})")
    if problems:
        raise DomainError("; ".join(problems))
    y_plus = asymptotic_angles(k, c).y_plus
    lp, lm = (2.0, 0.0) if lam is None else (abs(lam + 1), abs(lam - 1))
    first = (3.0 / d) * abs(lp * (y_plus + d) ** 2 + lm) * R
    second = 6.0 * lp * (y_plus + d) * R
    violated = tuple(name for name, v in (("first", first), ("second", second)) if not v < gamma)
    a1 = gamma / (6.0 * (y_plus / d + 1.0)) * r_hat
    return Certificate(not violated, a1, violated, (first, second), gamma)
