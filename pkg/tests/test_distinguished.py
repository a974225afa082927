import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirac_spectra.distinguished import (
    LimitClass,
    Which,
    choose_anchor,
    classify_limit,
    distinguished_spec,
    infinity_radius,
    init_at_infinity,
    init_at_zero,
    phase_drop_bounds,
    simplified_limit,
    solve_distinguished,
)
from dirac_spectra.errors import ConvergenceError, DomainError
from dirac_spectra.model import ModelParams, asymptotic_angles, from_physical, infinity_angles
from dirac_spectra.odecore import SIMPLIFIED, ZERO, Equation, EquationKind, integrate, rhs

from oracles import exceptional_closed_form, phase_drop_integrals, theta0_simplified, xinf_zero

# scipy Radau, alpha=+1, k=1, c=-0.5, rho=1e6
THETA0_PLUS_1E6 = 1.308997621843153
# scipy DOP853, kappa=-1, c=-0.5, lam=0.8, r=1
XINF_AT_1 = 1.1471787993522817
# scipy quad of the comparison bounds, k=1, c=-0.5
PHASE_DROP = (-0.8369882167858357, -0.26162407188227405)


def test_init_at_zero_examples():
    p = from_physical(1, -0.5, -1e-3, 0.2)
    assert init_at_zero(Which.THETA0, p, 1e-5) == pytest.approx(math.pi - 0.5 * 0.5 * 1e-5 / 1e-3, rel=1e-14)
    q = from_physical(-1, -0.5, -1e-3, 0.2)
    assert distinguished_spec(Which.THETA0, q).limit_value == pytest.approx(math.pi / 2)
    x0 = init_at_zero(Which.X0, from_physical(1, -0.5, 0, 0.2), 1e-8)
    assert x0 == pytest.approx(5 * math.pi / 12, abs=1e-7)


def test_init_rejects_wrong_endpoint():
    p = from_physical(-1, -0.5, 0, 0.8)
    with pytest.raises(DomainError):
        init_at_zero(Which.XINF, p, 1e-3)
    with pytest.raises(DomainError):
        init_at_infinity(Which.X0, p, 100.0)
    with pytest.raises(DomainError):
        init_at_zero(Which.THETA0, p, 1e-3)
    with pytest.raises(DomainError):
        init_at_zero(Which.X0, p, 0.0)


def test_xinf_undefined_at_threshold():
    with pytest.raises(ConvergenceError):
        distinguished_spec(Which.XINF, from_physical(-1, -0.5, 0, 1.0))
    with pytest.raises(ConvergenceError):
        infinity_radius(Which.XINF, from_physical(-1, -0.5, 0, 1.0), 1.0)


@pytest.mark.parametrize("kappa, lam", [(1, 0.3), (-1, 0.9), (3, -0.5)])
def test_x0_slope_solves_equation_to_first_order(kappa, lam):
    p = from_physical(kappa, -0.4, 0, lam)
    spec = distinguished_spec(Which.X0, p)
    for r in (1e-3, 1e-4, 1e-5):
        x = spec.start_value(r)
        residual = r * rhs(ZERO, r, x, p) - spec.correction_slope * r
        assert abs(residual) < 10 * r * r


def test_xinf_start_solves_equation_to_first_order():
    p = from_physical(-1, -0.5, 0, 0.8)
    spec = distinguished_spec(Which.XINF, p)
    for r in (1e2, 1e3, 1e4):
        x = spec.start_value(r)
        slope = -spec.correction_slope / r**2
        assert abs(rhs(ZERO, r, x, p) - slope) < 10 / r**2


def test_theta0_simplified_plus_matches_oracle():
    p = ModelParams(1.0, 1, -1, -0.5)
    value, trace = solve_distinguished(Which.THETA0_SIMPLIFIED, p, 1e6)
    assert value == pytest.approx(THETA0_PLUS_1E6, abs=1e-9)
    assert value == pytest.approx(asymptotic_angles(1.0, -0.5).theta_plus, abs=1e-6)
    assert trace.max_increment() < math.pi / 2


def test_theta0_simplified_minus_matches_oracle():
    p = ModelParams(2.0, -1, 1, -1.2)
    value, _ = solve_distinguished(Which.THETA0_SIMPLIFIED, p, 5.0)
    assert value == pytest.approx(theta0_simplified(2.0, -1.2, -1, 5.0), abs=1e-8)


def test_xinf_matches_oracle():
    p = from_physical(-1, -0.5, 0, 0.8)
    value, trace = solve_distinguished(Which.XINF, p, 1.0)
    assert value == pytest.approx(XINF_AT_1, abs=1e-9)
    assert trace.direction == "backward"
    q = from_physical(2, -0.7, 0, 0.3)
    assert solve_distinguished(Which.XINF, q, 2.0)[0] == pytest.approx(xinf_zero(2, -0.7, 0.3, 2.0, 200.0), abs=1e-8)


def test_xinf_limit_is_decaying_branch():
    p = from_physical(1, -0.5, 0, 0.0)
    _, trace = solve_distinguished(Which.XINF, p, 1.0)
    assert trace.initial == pytest.approx(infinity_angles(1, 0.0).x_minus, abs=0.05)
    assert trace.initial == init_at_infinity(Which.XINF, p, float(trace.r[0]))


def test_solve_rejects_bad_radii():
    p = from_physical(-1, -0.5, 0, 0.8)
    with pytest.raises(DomainError):
        solve_distinguished(Which.XINF, p, 0.0)
    with pytest.raises(DomainError):
        solve_distinguished(Which.XINF, p, 5.0, anchor_r=2.0)


@pytest.mark.parametrize("which, p, r_eval", [
    (Which.X0, from_physical(1, -0.5, 0, 0.4), 1.0),
    (Which.THETA0, from_physical(-2, -0.9, -1e-3, 0.4), 1.0),
    (Which.THETA0_SIMPLIFIED, ModelParams(1.0, -1, 1, -0.5), 10.0),
])
def test_anchor_uniqueness(which, p, r_eval):
    r0, trace = choose_anchor(which, p, r_eval)
    spec = distinguished_spec(which, p)
    assert abs(spec.correction(r0)) < 1e-3
    quarter = integrate(which.default_kind, p, r0 / 4, r_eval, spec.start_value(r0 / 4))
    assert abs(quarter.final - trace.final) < 2e-8


def test_theta0_decreases_in_lambda():
    kind = EquationKind(Equation.FULL_PRUFER, cutoff_R=1.0)
    vals = [solve_distinguished(Which.THETA0, from_physical(-1, -0.5, -1e-3, lam), 1.0, kind=kind)[0]
            for lam in np.linspace(-0.9, 0.9, 7)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_xinf_increases_in_lambda():
    vals = [solve_distinguished(Which.XINF, from_physical(-1, -0.5, 0, lam), 1.0)[0]
            for lam in np.linspace(-0.9, 0.9, 7)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_theta0_simplified_non_decreasing_in_c():
    vals = [solve_distinguished(Which.THETA0_SIMPLIFIED, ModelParams(1.0, -1, 1, c), 1.0)[0]
            for c in (-0.9, -0.7, -0.5, -0.3, -0.1)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("delta", [0.1, -0.1, 1.0, -1.3])
def test_generic_solutions_leave_theta_plus(delta):
    # only X0 tends to theta_+ at the origin; every other solution tends to theta_- mod pi
    p = from_physical(1, -0.5, 0, 0.3)
    ang = asymptotic_angles(p.k, p.c)
    v, _ = solve_distinguished(Which.X0, p, 0.5)
    end = integrate(ZERO, p, 0.5, 1e-10, v + delta).final
    turns = (end - ang.theta_minus) / math.pi
    assert abs(turns - round(turns)) < 1e-6


def test_classify_examples():
    assert simplified_limit(ModelParams(1.0, -1, 1, -0.5)).bucket_m == 0
    assert simplified_limit(ModelParams(3.0, -1, 1, -2.9)).bucket_m == 2
    assert simplified_limit(ModelParams(5.0, -1, 1, -4.5)).bucket_m == 2


def test_classify_deep_k1_is_bucket_zero():
    # k = 1 has no exceptional coupling, so theta_0 stays in bucket 0 down to c -> -1
    p = ModelParams(1.0, -1, 1, -0.99)
    cls = simplified_limit(p)
    assert cls.bucket_m == 0
    assert cls.final_angle == pytest.approx(asymptotic_angles(1.0, -0.99).theta_plus, abs=0.1)
    assert theta0_simplified(1.0, -0.99, -1, 1e6) == pytest.approx(cls.final_angle, abs=1e-3)


def test_classify_truncated_trace_is_unresolved():
    p = ModelParams(1.0, -1, 1, -0.5)
    _, trace = solve_distinguished(Which.THETA0_SIMPLIFIED, p, 1.0, check=False)
    cls = classify_limit(trace, p)
    assert isinstance(cls, LimitClass)
    assert not cls.resolved and cls.bucket_m is None
    assert 0 <= cls.limit < math.pi


def test_classify_respects_max_rho():
    p = ModelParams(1.0, -1, 1, -0.5)
    assert not simplified_limit(p, rho_max=1.0, max_rho=1.0).resolved


@pytest.mark.parametrize("k", [2.0, 5.0, 10.0])
def test_bucket_matches_closed_form_windows(k):
    cs = exceptional_closed_form(k)
    edges = [0.0] + cs + [-k]
    for m, (hi, lo) in enumerate(zip(edges, edges[1:])):
        mid = 0.5 * (hi + lo)
        assert simplified_limit(ModelParams(k, -1, 1, mid)).bucket_m == m


def test_phase_drop_example():
    lo, hi = phase_drop_bounds(1.0, -0.5)
    assert lo == pytest.approx(PHASE_DROP[0], abs=1e-12)
    assert hi == pytest.approx(PHASE_DROP[1], abs=1e-12)


def test_phase_drop_rejects():
    with pytest.raises(DomainError):
        phase_drop_bounds(1.0, -1.0)
    with pytest.raises(DomainError):
        phase_drop_bounds(1.0, 0.1)


@given(st.floats(0.2, 12.0), st.floats(0.02, 0.98))
@settings(max_examples=60, deadline=None)
def test_phase_drop_matches_quadrature(k, frac):
    c = -k * frac
    lo, hi = phase_drop_bounds(k, c)
    qlo, qhi = phase_drop_integrals(k, c)
    assert lo == pytest.approx(qlo, abs=1e-9)
    assert hi == pytest.approx(qhi, abs=1e-9)
    assert lo < hi < 0


@pytest.mark.parametrize("k, c", [(1.0, -0.5), (3.0, -2.0), (5.0, -4.7)])
def test_theta0_drop_within_bounds(k, c):
    p = ModelParams(k, -1, 1, c)
    ang = asymptotic_angles(k, c)
    a, _ = solve_distinguished(Which.THETA0_SIMPLIFIED, p, ang.rho_minus)
    b = integrate(SIMPLIFIED, p, ang.rho_minus, ang.rho_plus, a).final
    lo, hi = phase_drop_bounds(k, c)
    assert lo - 1e-9 <= b - a <= hi + 1e-9
