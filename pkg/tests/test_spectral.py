import math

import numpy as np
import pytest

from dirac_spectra.distinguished import Which, solve_distinguished
from dirac_spectra.errors import DomainError
from dirac_spectra.model import asymptotic_angles, from_physical, sommerfeld_eigenvalue
from dirac_spectra.odecore import Equation, integrate
from dirac_spectra.spectral import (
    MatchConfig,
    Shooter,
    eigenfunction,
    find_eigenvalues,
    mismatch,
    stability_certificate,
    sweep_anomaly,
    variant_gap,
)

from oracles import dirac_eigenvalue

# Wronskian matching of the two-component system with scipy DOP853 (tests/oracles.py)
FROZEN = {
    (-1, -0.5, -1e-2, "auxiliary"): 0.8683821243673785,
    (-1, -0.5, -1e-3, "auxiliary"): 0.8663062142579148,
    (-1, -0.5, -1e-4, "auxiliary"): 0.8660545988965563,
    (-1, -0.5, -1e-4, "full"): 0.8660645467620564,
    (1, -0.5, -1e-4, "auxiliary"): 0.9659252625470472,
    (2, -1.85, -1e-4, "auxiliary"): 0.6891374689524832,
    (2, -1.6, -1e-4, "auxiliary"): 0.8087288798108522,
}


def _window(lam, eps=0.01):
    return MatchConfig(lambda_window=(lam - eps, min(lam + eps, 0.999)))


@pytest.mark.parametrize("kwargs", [
    {"R": 0.0}, {"lambda_window": (0.5, 0.4)}, {"lambda_window": (-1.0, 0.5)},
    {"bisect_tol": 0.0}, {"variant": "other"}, {"grid_step": -1.0},
])
def test_config_rejects(kwargs):
    with pytest.raises(DomainError):
        MatchConfig(**kwargs)


def test_with_window_clamps_to_open_interval():
    cfg = MatchConfig().with_window(0.5, 1.5)
    assert cfg.lambda_window[1] < 1.0


def test_mismatch_vanishes_at_sommerfeld_ground_state():
    p = from_physical(-1, -0.5)
    assert abs(mismatch(math.sqrt(3) / 2, p)) < 1e-8


def test_mismatch_levels_at_excited_states():
    p = from_physical(1, -0.5)
    lam = sommerfeld_eigenvalue(1, -0.5, 1)
    assert mismatch(lam, p) == pytest.approx(-math.pi, abs=1e-8)


def test_mismatch_decreases():
    p = from_physical(2, -0.9, -1e-3)
    shoot = Shooter(p, MatchConfig())
    values = [shoot(lam) for lam in np.linspace(-0.9, 0.9, 25)]
    assert all(b < a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("kappa", [-2, -1, 1, 2])
def test_a_zero_reproduces_sommerfeld(kappa):
    c = -0.5
    res = find_eigenvalues(from_physical(kappa, c), MatchConfig(lambda_window=(0.0, 0.99)))
    n0 = 0 if kappa < 0 else 1
    expected = [sommerfeld_eigenvalue(kappa, c, n) for n in range(n0, 40)]
    expected = [v for v in expected if v < 0.99]
    assert [e.branch_index for e in res] == list(range(n0, n0 + len(expected)))
    for e, v in zip(res, expected):
        assert e.lam == pytest.approx(v, abs=1e-9)
        assert e.residual <= 1e-10


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_negative_anomaly_matches_wronskian(key):
    kappa, c, a, variant = key
    lam = FROZEN[key]
    cfg = MatchConfig(lambda_window=(lam - 0.01, lam + 0.01), variant=variant)
    res = find_eigenvalues(from_physical(kappa, c, a), cfg)
    assert len(res) == 1
    assert res[0].lam == pytest.approx(lam, abs=1e-9)
    assert res[0].variant == variant and res[0].a == a


def test_live_oracle_other_radius():
    lam = dirac_eigenvalue(-2, -0.8, -1e-3, 0.9, 0.96, R=0.5)
    res = find_eigenvalues(from_physical(-2, -0.8, -1e-3), MatchConfig(R=0.5, lambda_window=(0.9, 0.96)))
    assert [e.lam for e in res] == pytest.approx([lam], abs=1e-9)


def test_row_keys():
    res = find_eigenvalues(from_physical(-1, -0.5), _window(math.sqrt(3) / 2))
    assert set(res[0].row()) == {"kappa", "c", "a", "variant", "branch_index", "lambda", "nodes", "residual"}


@pytest.mark.parametrize("kappa", [-2, -1, 1, 3])
def test_node_law_without_anomaly(kappa):
    c = -0.6
    n0 = 0 if kappa < 0 else 1
    for n in range(n0, n0 + 3):
        lam = sommerfeld_eigenvalue(kappa, c, n)
        (e,) = find_eigenvalues(from_physical(kappa, c), _window(lam, 1e-4))
        assert e.branch_index == n
        assert e.lower_nodes == n
        assert e.nodes == (n if kappa < 0 else n - 1)


def test_eigenfunction_ground_state():
    p = from_physical(-1, -0.5)
    ef = eigenfunction(p, math.sqrt(3) / 2)
    assert ef.nodes == 0 and ef.lower_nodes == 0 and ef.branch_index == 0
    assert ef.norm() == pytest.approx(1.0, abs=1e-12)
    assert ef.mismatch_residual < 1e-8


def test_eigenfunction_power_law_at_origin():
    p = from_physical(1, -0.5)
    ef = eigenfunction(p, sommerfeld_eigenvalue(1, -0.5, 1))
    sel = (ef.r > 1e-5) & (ef.r < 1e-3)
    slope = np.polyfit(np.log(ef.r[sel]), ef.log_u[sel], 1)[0]
    assert slope == pytest.approx(p.gamma, abs=1e-3)


def test_eigenfunction_essential_singularity_profile():
    p = from_physical(1, -0.5, -1e-3)
    e = find_eigenvalues(p, MatchConfig(lambda_window=(0.9, 0.99)))[0]
    ef = eigenfunction(p, e.lam)
    sel = (ef.r > 1e-3 / 40) & (ef.r < 1e-3 / 4)
    slope = np.polyfit(1 / ef.r[sel], ef.log_u[sel], 1)[0]
    assert slope == pytest.approx(-1e-3, rel=0.1)


def test_eigenfunction_solves_system():
    p = from_physical(-1, -0.5, -1e-3)
    lam = FROZEN[(-1, -0.5, -1e-3, "auxiliary")]
    ef = eigenfunction(p, lam)
    r, u1, u2 = ef.r, ef.u1, ef.u2
    W = p.kappa / r + np.where(r < 1.0, p.a / r**2, 0.0)
    f1 = -W * u1 + (1 - p.c / r + lam) * u2
    f2 = (1 + p.c / r - lam) * u1 + W * u2
    d1, d2 = np.gradient(u1, r), np.gradient(u2, r)
    sel = (r > 1e-3) & (r < 20) & (np.abs(r - 1.0) > 0.05)
    scale = np.max(np.abs(f1[sel])) + np.max(np.abs(f2[sel]))
    assert np.max(np.abs(d1 - f1)[sel] + np.abs(d2 - f2)[sel]) < 1e-2 * scale


def test_eigenfunction_on_grid():
    p = from_physical(-1, -0.5)
    g = np.geomspace(1e-4, 30, 200)
    ef = eigenfunction(p, math.sqrt(3) / 2, grid=g)
    assert np.array_equal(ef.r, g)
    assert np.all(np.isfinite(ef.u1))
    with pytest.raises(DomainError):
        eigenfunction(p, math.sqrt(3) / 2, grid=[0.0, 1.0])


def test_eigenfunction_rejects_non_eigenvalue():
    with pytest.raises(DomainError, match="not an eigenvalue"):
        eigenfunction(from_physical(-1, -0.5), 0.8)


def test_exceptional_window_adds_nodes_near_origin():
    p = from_physical(2, -1.85, -1e-4)
    lam = FROZEN[(2, -1.85, -1e-4, "auxiliary")]
    ef = eigenfunction(p, lam)
    assert ef.branch_index == 2
    assert ef.nodes_between(1e-7, 1e-2, "upper") == 2
    assert ef.nodes_between(1e-7, 1e-2, "lower") == 1
    assert ef.nodes_between(1e-2, 1e4, "upper") == 0


def test_sweep_converges_without_exceptional_shift():
    l0 = math.sqrt(3) / 2
    s = sweep_anomaly(from_physical(-1, -0.5), [-1e-2, -1e-3, -1e-4], l0, 0.02)
    assert s.count_in_window == [1, 1, 1]
    assert s.converging
    assert s.shift_m == 0 and s.bucket_m == 0
    assert s.distances()[-1] < 5e-5
    rows = s.rows()
    assert [r["a"] for r in rows] == [-1e-2, -1e-3, -1e-4]


def test_sweep_midpoint_control_has_no_eigenvalue():
    # halfway between two a = 0 levels nothing converges
    mid = 0.5 * (sommerfeld_eigenvalue(-1, -0.5, 0) + sommerfeld_eigenvalue(-1, -0.5, 1))
    s = sweep_anomaly(from_physical(-1, -0.5), [-1e-3, -1e-4], mid, 0.02)
    assert s.count_in_window == [0, 0]
    assert s.reference is None and s.shift_m is None and not s.converging


@pytest.mark.parametrize("kappa, c, m", [(2, -1.6, 0), (2, -1.85, 1), (3, -2.9, 2)])
def test_sweep_shift_matches_bucket(kappa, c, m):
    l0 = sommerfeld_eigenvalue(kappa, c, 1)
    s = sweep_anomaly(from_physical(kappa, c), [-1e-2, -1e-3, -1e-4], l0, 0.02)
    assert s.converging
    assert s.bucket_m == m
    assert s.shift_m == m
    assert s.lower_node_shift == m
    assert s.node_shift == m + 1


@pytest.mark.parametrize("a_list", [[], [-1e-3, 0.0], [-1e-4, -1e-3]])
def test_sweep_rejects(a_list):
    with pytest.raises(DomainError):
        sweep_anomaly(from_physical(-1, -0.5), a_list, 0.8, 0.01)


def test_variant_gap_example():
    gap = variant_gap(from_physical(-1, -0.5, -1e-4), MatchConfig(lambda_window=(0.8, 0.9)))
    expected = FROZEN[(-1, -0.5, -1e-4, "full")] - FROZEN[(-1, -0.5, -1e-4, "auxiliary")]
    assert gap == pytest.approx(expected, abs=2e-9)
    assert gap <= 1e-4


def test_variant_gap_shrinks_with_anomaly():
    cfg = MatchConfig(lambda_window=(0.8, 0.9))
    gaps = [variant_gap(from_physical(-1, -0.5, a), cfg) for a in (-1e-2, -1e-3, -1e-4)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_variant_gap_rejects_zero_anomaly():
    with pytest.raises(DomainError):
        variant_gap(from_physical(-1, -0.5))


def test_certificate_fails_at_large_radius():
    cert = stability_certificate(1.0, -0.5, 0.5, 0.02, None, 0.01)
    assert not cert.ok
    assert cert.violated == ("first", "second")
    assert cert.lhs[0] > cert.bound


def test_certificate_threshold_closed_form_at_lambda_zero():
    # a1 = sqrt(0.75)/(6(3.732/0.4 + 1)) * 0.01, but the first smallness condition fails at R = 0.02
    cert = stability_certificate(1.0, -0.5, 0.4, 0.02, 0.0, 0.01)
    assert cert.a1 == pytest.approx(1.3972e-4, rel=1e-3)
    assert not cert.ok and cert.violated == ("first",)
    assert stability_certificate(1.0, -0.5, 0.4, 0.005, 0.0, 0.0025).ok


def test_certificate_example():
    assert not stability_certificate(1.0, -0.5, 0.5, 0.005, None, 0.0025).ok
    cert = stability_certificate(1.0, -0.5, 0.5, 0.005, 0.5, 0.0025)
    assert cert.ok and cert.violated == ()
    assert stability_certificate(1.0, -0.5, 0.5, 0.003, None, 0.0015).ok
    y_plus = 2 + math.sqrt(3)
    assert cert.a1 == pytest.approx(math.sqrt(0.75) / (6 * (y_plus / 0.5 + 1)) * 0.0025, rel=1e-12)


def test_certificate_lists_every_violation():
    with pytest.raises(DomainError) as info:
        stability_certificate(1.0, -0.5, 5.0, 10.0, 2.0, 20.0)
    msg = str(info.value)
    for word in ("d must", "R must", "r_hat must", "lambda must"):
        assert word in msg
    with pytest.raises(DomainError):
        stability_certificate(1.0, -1.5, 0.1, 0.01, None, 0.005)


@pytest.mark.parametrize("kappa, lam", [(1, 0.5), (-1, 0.5), (1, -0.9), (-1, 0.0)])
def test_certificate_soundness(kappa, lam):
    k, c, d, R, r_hat = 1.0, -0.5, 0.5, 0.005, 0.0025
    cert = stability_certificate(k, c, d, R, lam, r_hat)
    assert cert.ok
    y_plus = asymptotic_angles(k, c).y_plus
    p0 = from_physical(kappa, c, 0.0, lam)
    z = integrate(Equation.RICCATI_ZERO, p0, 1e-9, R, y_plus)
    assert np.max(np.abs(z.values - y_plus)) < d
    for a in (-cert.a1, -0.1 * cert.a1):
        p = from_physical(kappa, c, a, lam)
        _, tr = solve_distinguished(Which.THETA0, p, R)
        late = tr.r >= r_hat
        assert np.max(np.abs(np.tan(tr.values[late]) - y_plus)) < d
