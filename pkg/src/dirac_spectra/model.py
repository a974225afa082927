"""Closed-form quantities of the normalised radial Coulomb-Dirac problem.

The radial operator is

    H_a = -i sigma_2 d/dr + sigma_3 + (kappa/r + a/r^2) sigma_1 + c/r,   a, c < 0,

and every Pruefer-type equation in this package is parameterised by
``(k, alpha, mu, c, a, lam)`` with ``k = |kappa|``, ``alpha = -sgn kappa`` and
``mu = sgn kappa`` for physical data.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError

__all__ = [
    "ModelParams",
    "AsymptoticAngles",
    "InfinityAngles",
    "CouplingWindow",
    "from_physical",
    "asymptotic_angles",
    "infinity_angles",
    "sommerfeld_eigenvalue",
    "coupling_windows",
    "check_coupling",
]


def check_coupling(k: float, c: float) -> None:
    if not k > 0:
        raise DomainError(f"k must be positive, got {k!r}")
    if not (-k < c < 0):
        raise DomainError(
            f"c must lie in (-|kappa|, 0) = ({-k:g}, 0), got {c!r}: "
            "distinguished realisation requires kappa^2 - c^2 > 0"
        )


def _check_sign(name: str, value: int) -> None:
    if value not in (-1, 1):
        raise DomainError(f"{name} must be -1 or +1, got {value!r}")


@dataclass(frozen=True)
class ModelParams:
    """Parameter tuple shared by all equations.

    ``a`` is the (non-positive) anomaly, ``lam`` the spectral parameter.  The
    simplified equation ignores both.
    """

    k: float
    alpha: int
    mu: int
    c: float
    a: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        check_coupling(self.k, self.c)
        _check_sign("alpha", self.alpha)
        _check_sign("mu", self.mu)
        if not self.a <= 0:
            raise DomainError(f"anomaly a must be <= 0, got {self.a!r}")
        if not (-1.0 <= self.lam <= 1.0):
            raise DomainError(f"lambda must lie in [-1, 1], got {self.lam!r}")

    @property
    def kappa(self) -> float:
        """Signed angular momentum number implied by ``mu``."""
        return self.mu * self.k

    @property
    def gamma(self) -> float:
        return math.sqrt(self.k * self.k - self.c * self.c)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


def from_physical(kappa: float, c: float, a: float = 0.0, lam: float = 0.0) -> ModelParams:
    """Normalise physical data: ``k = |kappa|``, ``alpha = -sgn kappa``, ``mu = sgn kappa``."""
    if kappa == 0:
        raise DomainError("kappa must be nonzero")
    sign = 1 if kappa > 0 else -1
    return ModelParams(k=abs(float(kappa)), alpha=-sign, mu=sign, c=float(c), a=float(a), lam=float(lam))


@dataclass(frozen=True)
class AsymptoticAngles:
    theta_minus: float
    theta_plus: float
    rho_minus: float
    rho_plus: float
    y_plus: float


def asymptotic_angles(k: float, c: float, alpha: int = -1) -> AsymptoticAngles:
    """Zeros ``theta_-(c) < pi/4 < theta_+(c)`` of ``c + k sin 2theta`` and the gap
    endpoints ``rho_+-(c) = 1/(k +- c)`` of the simplified equation.

    For ``alpha = 1`` there is no gap and ``rho_plus`` is set to 0 by convention.
    """
    check_coupling(k, c)
    _check_sign("alpha", alpha)
    theta_minus = 0.5 * math.asin(-c / k)
    theta_plus = 0.5 * math.pi - theta_minus
    gamma = math.sqrt(k * k - c * c)
    rho_minus = 1.0 / (k - c)
    rho_plus = 1.0 / (k + c) if alpha == -1 else 0.0
    return AsymptoticAngles(theta_minus, theta_plus, rho_minus, rho_plus, (k + gamma) / -c)


@dataclass(frozen=True)
class InfinityAngles:
    x_minus: float
    x_plus: float
    degenerate: bool = False


def infinity_angles(mu: int, lam: float) -> InfinityAngles:
    """Angles ``X_+-`` in ``[0, pi]`` with ``cos 2X = mu*lam`` and
    ``sin 2X = +-mu*sqrt(1 - lam^2)``.

    At ``|lam| = 1`` both coincide; the result is flagged ``degenerate`` instead of
    raising, callers keep their searches inside ``(-1, 1)``.
    """
    _check_sign("mu", mu)
    if not (-1.0 <= lam <= 1.0):
        raise DomainError(f"lambda must lie in [-1, 1], got {lam!r}")
    s = math.sqrt(max(0.0, 1.0 - lam * lam))

    def half_angle(sin2):
        two_x = math.atan2(sin2, mu * lam)
        if two_x < 0:
            two_x += 2.0 * math.pi
        return abs(0.5 * two_x)

    return InfinityAngles(half_angle(-mu * s), half_angle(mu * s), degenerate=(s == 0.0))


def sommerfeld_eigenvalue(kappa: float, c: float, n: int) -> float:
    """Closed-form point spectrum of the distinguished realisation of ``H_0``.

    ``lam_n = (1 + c^2/(n + gamma)^2)^(-1/2)`` with ``gamma = sqrt(kappa^2 - c^2)``;
    ``n >= 0`` for ``kappa < 0`` and ``n >= 1`` for ``kappa > 0``.  Used only as an
    independent oracle for the shooting solver.
    """
    if kappa == 0:
        raise DomainError("kappa must be nonzero")
    check_coupling(abs(kappa), c)
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a nonnegative integer, got {n!r}")
    if kappa > 0 and n == 0:
        raise DomainError("n = 0 does not occur for kappa > 0; the index starts at 1")
    gamma = math.sqrt(kappa * kappa - c * c)
    return 1.0 / math.sqrt(1.0 + (c / (n + gamma)) ** 2)


@dataclass(frozen=True)
class CouplingWindow:
    m: int
    lower: float
    upper: float

    def __contains__(self, c: float) -> bool:
        return self.lower < c < self.upper


def coupling_windows(
    k: float, exceptional: Sequence[float], alpha: int = -1, complete: bool = True
) -> list[CouplingWindow]:
    """Split ``(-k, 0)`` at the exceptional couplings ``c_0 > c_1 > ...``.

    Window ``m`` is ``(c_m, c_{m-1})`` with ``c_{-1} = 0``.  The trailing window
    ``(-k, c_max)`` is appended only if the list is declared ``complete``.
    """
    if not k > 0:
        raise DomainError(f"k must be positive, got {k!r}")
    values = [float(x) for x in exceptional]
    if alpha == 1:
        if values:
            raise DomainError("alpha = 1 has no exceptional couplings")
        return [CouplingWindow(0, -k, 0.0)]
    for x in values:
        if not (-k < x < 0):
            raise DomainError(f"exceptional value {x!r} outside (-k, 0)")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise DomainError("exceptional values must be strictly decreasing")
    edges = [0.0] + values
    windows = [CouplingWindow(m, edges[m + 1], edges[m]) for m in range(len(values))]
    if complete:
        windows.append(CouplingWindow(len(values), -k, edges[-1]))
    return windows
