import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pucci_lab.barrier import (
    B_SLOPE,
    C_SLOPE,
    SQ3,
    BarrierSpec,
    PowerBarrierSpec,
    barrier_eval,
    gamma_constant,
    in_E12,
    lemma1_lhs,
    power_rho0,
    power_rho_limit,
    preset,
    sample_cut,
    strip_profile,
    verify_lem1_power,
    verify_lemma1,
    verify_sectors,
    verify_strip_supersolution,
)
from pucci_lab.errors import OutsideDomain, SpecError
from pucci_lab.operator import OperatorSpec


def pucci_minus_oracle(H, a, A):
    lam = np.linalg.eigvalsh(H)
    return a * lam[lam > 0].sum() + A * lam[lam < 0].sum()


def test_gamma_examples():
    assert gamma_constant(1, 1, 0, 1, 1) == pytest.approx(16)
    assert gamma_constant(1, 1, 0, 3, 0.5) == pytest.approx(296)
    # the V branch alone: make it dominant with a large potential
    V = 1e6
    assert gamma_constant(1, 1, 0, 1, 1, V_inf=V) == pytest.approx(math.sqrt(4 * V))


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.1, 2), extra=st.floats(0, 3), alpha=st.floats(-0.9, 2), b=st.floats(0.2, 4),
       c=st.floats(0.2, 4), h=st.floats(0, 10), V=st.floats(0, 10), dh=st.floats(0, 5), dV=st.floats(0, 5))
def test_gamma_monotone_in_data(a, extra, alpha, b, c, h, V, dh, dV):
    A = a + extra
    g = gamma_constant(a, A, alpha, b, c, h, V)
    assert gamma_constant(a, A, alpha, b, c, h + dh, V) >= g
    assert gamma_constant(a, A, alpha, b, c, h, V + dV) >= g
    # larger b^2/c^2 at fixed b
    assert gamma_constant(a, A, alpha, b, c / 1.5, 0, 0) >= gamma_constant(a, A, alpha, b, c, 0, 0)


def test_gamma_rejects_bad_input():
    with pytest.raises(SpecError):
        gamma_constant(2, 1, 0, 1, 1)
    with pytest.raises(SpecError):
        BarrierSpec((0, 0), 1, 1, -1.0)


def test_barrier_values_on_level_sets():
    spec = preset("unit", gamma=5.0)
    v, _, _ = barrier_eval(spec, (1.0, 0.0))
    assert v == pytest.approx(0.0, abs=1e-15)
    v, _, _ = barrier_eval(spec, (0.5, 0.0))
    assert v == pytest.approx(1.0)
    v, _, _ = barrier_eval(spec, (0.7, 0.2))
    assert 0 < v < 1
    with pytest.raises(OutsideDomain):
        barrier_eval(spec, (1.2, 0.0))


@pytest.mark.parametrize("name", ["unit", "E1", "E2", "E3"])
def test_derivatives_match_finite_differences(name):
    spec = preset(name, gamma=3.0)
    x1, x2 = sample_cut(spec, 128, seed=3)
    step = 1e-4
    val = lambda p: barrier_eval(spec, p)[0]  # noqa: E731
    errs = []
    for p in zip(x1[:100], x2[:100]):
        p = np.array(p)
        s2 = spec.sigma2(*p)
        if s2 > 0.97:
            continue  # keep the stencil inside the ellipse
        _, g, H = barrier_eval(spec, p)
        e = np.eye(2) * step
        fd_g = np.array([(val(p + e[i]) - val(p - e[i])) / (2 * step) for i in range(2)])
        fd_H = np.array([[(val(p + e[i] + e[j]) - val(p + e[i] - e[j]) - val(p - e[i] + e[j])
                           + val(p - e[i] - e[j])) / (4 * step * step) for j in range(2)] for i in range(2)])
        errs.append(max(np.max(np.abs(fd_g - g)), np.max(np.abs(fd_H - H)) * 1e-2))
    assert len(errs) > 40
    assert max(errs) < 1e-5


def test_lemma1_lhs_against_direct_evaluation():
    alpha, a, A, h_inf, V_inf = 0.5, 1.0, 2.0, 0.7, 1.3
    spec = preset("unit", gamma=20.0)
    x1, x2 = sample_cut(spec, 64, seed=9)
    lhs = lemma1_lhs(alpha, a, A, h_inf, V_inf, spec, x1, x2)
    for k in range(0, 64, 7):
        v, g, H = barrier_eval(spec, (x1[k], x2[k]))
        gn = np.linalg.norm(g)
        direct = gn ** alpha * pucci_minus_oracle(H, a, A) - h_inf * gn ** (1 + alpha) - V_inf * v ** (1 + alpha)
        s2 = spec.sigma2(x1[k], x2[k])
        vt = math.exp(-20 * s2) / (math.exp(-5) - math.exp(-20))
        assert lhs[k] * vt ** (1 + alpha) == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_lemma1_examples():
    lin = OperatorSpec(0.0, 1.0, 1.0, "pucci_plus")
    rep = verify_lemma1(lin, preset("unit"), 20_000)
    assert rep.gamma == pytest.approx(16) and rep.passed and rep.min_residual > 0
    low, ok = verify_lemma1(lin, preset("unit", gamma=0.1), 20_000)
    assert not ok and low < 0


@pytest.mark.parametrize("name", ["unit", "E1", "E3"])
def test_lemma1_mirror_symmetry(name):
    spec = OperatorSpec(0.5, 1.0, 2.0, "pucci_plus")
    b = preset(name, a=1.0, A=2.0, alpha=0.5)
    m1 = verify_lemma1(spec, b, 8192, seed=4).min_residual
    m2 = verify_lemma1(spec, b.mirrored(), 8192, seed=4).min_residual
    assert m1 == pytest.approx(m2, rel=1e-9)


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
def test_lemma1_margin_monotone_in_gamma(alpha):
    spec = OperatorSpec(alpha, 1.0, 2.0, "pucci_plus", h_inf=1.0, V_inf=2.0)
    g0 = gamma_constant(1.0, 2.0, alpha, 1.0, 1.0, 1.0, 2.0)
    mins = [verify_lemma1(spec, preset("unit", gamma=k * g0), 8192).min_residual for k in (1, 2, 4)]
    assert mins[0] > 0
    assert mins[0] <= mins[1] <= mins[2]


def test_lemma1_deterministic():
    spec = OperatorSpec(0.0, 1.0, 2.0, "pucci_plus")
    a = verify_lemma1(spec, preset("E2", a=1, A=2), 4096, seed=11)
    b = verify_lemma1(spec, preset("E2", a=1, A=2), 4096, seed=11)
    assert a.to_dict() == b.to_dict()


def test_lemma1_scale_invariance_in_rho():
    # the barrier on rho E at unit data: gradient terms rescale, the sign of the margin does not
    spec = OperatorSpec(0.0, 1.0, 2.0, "pucci_plus")
    b = preset("E1", a=1, A=2)
    base = verify_lemma1(spec, b, 4096).min_residual
    small = verify_lemma1(spec, b.scaled(0.5), 4096).min_residual
    assert small == pytest.approx(base * 0.5 ** -2, rel=1e-9)


def strip_oracle(alpha, a, A, M, g, n=20001):
    # second differences of sin^g on a fine grid
    # u extends smoothly past the strip, so the stencil may straddle the endpoints
    x = np.linspace(0, M, n)
    step = 1e-5 * M
    u = lambda s: np.sin(s * math.pi / (4 * M) + math.pi / 8) ** g  # noqa: E731
    du = (u(x + step) - u(x - step)) / (2 * step)
    d2u = (u(x + step) - 2 * u(x) + u(x - step)) / step ** 2
    F = np.abs(du) ** alpha * np.where(d2u > 0, A * d2u, a * d2u)
    return float(np.min(-F * M ** (2 + alpha) / u(x) ** (1 + alpha)))


@pytest.mark.parametrize("alpha,a,A,g", [(0.0, 1, 1, 0.5), (0.0, 1, 2, 0.25), (1.0, 1, 3, 0.75),
                                         (-0.5, 2, 2, 0.5)])
def test_strip_constant_matches_oracle(alpha, a, A, g):
    rep = verify_strip_supersolution(alpha, a, A, 1.0, g, 50_000)
    assert rep.passed and rep.C > 0
    assert rep.C == pytest.approx(strip_oracle(alpha, a, A, 1.0, g), rel=1e-4)
    assert rep.C == pytest.approx(rep.closed_form_min, rel=1e-4)


def test_strip_constant_independent_of_width():
    c1 = verify_strip_supersolution(0.5, 1, 2, 1.0, 0.5, 4096).C
    c2 = verify_strip_supersolution(0.5, 1, 2, 2.0, 0.5, 4096).C
    c7 = verify_strip_supersolution(0.5, 1, 2, 7.0, 0.5, 4096).C
    assert c1 == pytest.approx(c2, rel=1e-12) and c1 == pytest.approx(c7, rel=1e-12)


def test_strip_profile_positive_and_argument_range():
    x = np.linspace(1e-6, 1 - 1e-6, 1001)
    u, du, d2u = strip_profile(x, 1.0, 0.5)
    assert np.all((u > 0) & (u < 1))
    th = x * math.pi / 4 + math.pi / 8
    assert th.min() > math.pi / 8 and th.max() < 3 * math.pi / 8
    # sin^g with g < 1 is concave here
    assert np.all(d2u < 0)
    with pytest.raises(SpecError):
        verify_strip_supersolution(0, 1, 1, 1, 1.0)


def lens_c_slope_oracle(n=2_000_001):
    # dense sweep of the E1 arc inside E2; the minimum of (x2 + 3)/|x1| sits on the lens boundary
    t = np.linspace(-math.pi / 2, math.pi / 2, n)
    x1, x2 = -2.5 + 3 * np.cos(t), SQ3 / 4 + 0.5 * np.sin(t)
    keep = in_E12(x1, x2) & (np.abs(x1) > 1e-9)
    return float(np.min((x2[keep] + 3) / np.abs(x1[keep])))


@pytest.fixture(scope="module")
def sectors():
    return verify_sectors(100_000)


def test_sectors_pass(sectors):
    delta, ok = sectors
    assert ok and delta > 0
    assert sectors.min_cos > -1 + sectors.margin


def test_sector_b_slope_is_the_quoted_value(sectors):
    assert B_SLOPE == pytest.approx(6 * math.sqrt(11) / 5)
    assert sectors.b_slope_max == pytest.approx(B_SLOPE, rel=1e-12)


def test_sector_c_slope_is_below_the_quoted_value(sectors):
    oracle = lens_c_slope_oracle()
    assert oracle == pytest.approx(6.853869, abs=2e-6)
    assert sectors.c_slope_min == pytest.approx(oracle, abs=1e-6)
    # the quoted (sqrt(3) + 12)/2 overstates the minimum by about 0.18%
    assert C_SLOPE == pytest.approx(6.866025, abs=1e-6)
    assert sectors.c_slope_min < C_SLOPE


def test_sector_cosines_frozen(sectors):
    assert sectors.min_cos_E12 == pytest.approx(-0.96985, abs=2e-4)
    assert sectors.delta == pytest.approx(math.sqrt(1 + sectors.min_cos))


def test_power_exponent_and_constant():
    assert PowerBarrierSpec.exponent(0.0) == 2
    assert PowerBarrierSpec.exponent(1.0) == 1.5
    for alpha in (-0.5, 0.0, 1.0):
        c_1 = PowerBarrierSpec.for_data(alpha, 1.0, 0.5, f_inf=1.0).C1
        c_2 = PowerBarrierSpec.for_data(alpha, 1.0, 0.5, f_inf=2.0).C1
        assert c_2 / c_1 == pytest.approx(2 ** (1 / (1 + alpha)))
    with pytest.raises(SpecError):
        PowerBarrierSpec(1.0, 1.0)


def power_lhs_oracle(alpha, a, h_inf, delta, rho_t):
    # radial profile: |Dw| = C1 q r^(q-1), Hessian eigenvalues C1 q (q-1) r^(q-2) and C1 q r^(q-2)
    spec = PowerBarrierSpec.for_data(alpha, a, delta)
    C1, q = spec.C1, spec.q
    g = C1 * q * rho_t ** (q - 1)
    mminus = a * C1 * q * rho_t ** (q - 2) * q
    return delta ** alpha * 2 ** (-abs(alpha - 2) / 2) * g ** alpha * mminus - h_inf * 2 ** alpha * g ** (1 + alpha)


def test_power_check_small_drift_passes():
    delta = verify_sectors(4096).delta
    rep = verify_lem1_power(1.0, 1.0, 1e-3, delta, 20_000)
    assert rep.passed and rep.rho0 == 1.0
    assert rep.rho_tilde_max <= rep.rho_tilde_limit


def test_power_check_without_drift_is_tight():
    rep = verify_lem1_power(0.0, 1.0, 0.0, 0.5, 4096)
    assert rep.passed and rep.min_margin == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
def test_power_check_fails_at_prescribed_radius(alpha):
    # with the prescribed rho0 the sampled rho-tilde overshoots the exact limit by a factor
    # between 2 and 3.46, so the inequality fails once the drift term is active
    rep = verify_lem1_power(alpha, 1.0, 1.0, 0.5, 20_000)
    assert not rep.passed
    assert rep.rho_tilde_max > rep.rho_tilde_limit
    # the prescribed radius is the exact limit, capped at 1
    assert rep.rho0 == pytest.approx(min(1.0, rep.rho_tilde_limit), rel=1e-12)
    wx, wy = rep.worst_point
    r = math.hypot(wx, wy + 3 * rep.rho0)
    assert rep.min_margin == pytest.approx(power_lhs_oracle(alpha, 1.0, 1.0, 0.5, r) - 1, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
def test_power_check_passes_on_reduced_radius(alpha):
    lim = power_rho_limit(alpha, 1.0, 1.0, 0.5)
    rep = verify_lem1_power(alpha, 1.0, 1.0, 0.5, 20_000, rho0=lim / 3.5)
    assert rep.passed and rep.rho_tilde_max < lim


def test_power_radius_formula():
    q = 1.5
    assert power_rho0(1.0, 1.0, 0.2, 0.5) == pytest.approx(min(1, 2 ** -2.5 * 0.5 * q / 0.2))
    assert power_rho0(1.0, 1.0, 0.0, 0.5) == 1.0
