import math

import numpy as np
import pytest

from pucci_lab.errors import BracketInvalid, Diverged, NotMonotone, NotPositive, SpecError
from pucci_lab.grid import Disc, Rectangle, StripTruncated, build_grid, sample_field
from pucci_lab.operator import OperatorSpec
from pucci_lab.eigen import (
    default_start,
    eigen_bisect,
    eigen_down,
    eigen_exhaust,
    eigen_residual,
    eigen_up,
    extrapolate_inverse_square,
    solve_below,
)
from pucci_lab.solver import SolveConfig


def discrete_square_eigenvalue(h, side=1.0):
    # first eigenvalue of the five-point Laplacian on a side x side square
    return 2 * (4 / h ** 2) * math.sin(math.pi * h / (2 * side)) ** 2


@pytest.fixture(scope="module")
def square16():
    return build_grid(Rectangle(0, 1, 0, 1), 1 / 16)


@pytest.fixture(scope="module")
def lap():
    return OperatorSpec(0.0, 1.0, 1.0, "weighted_laplacian")


@pytest.fixture(scope="module")
def square_up(square16, lap):
    return eigen_up(lap, square16)


def test_square_matches_discrete_spectrum(square_up):
    assert square_up.lam == pytest.approx(discrete_square_eigenvalue(1 / 16), rel=1e-6)
    assert square_up.lam == pytest.approx(2 * math.pi ** 2, rel=0.02)


def test_eigenfunction_normalised_and_positive(square16, square_up):
    phi = square_up.eigenfunction
    vals = phi.values[square16.interior]
    assert np.all(vals > 0) and vals.max() == pytest.approx(1.0)
    assert square_up.probe_value > 0
    # the discrete mode is a sine product
    exact = default_start(square16).values[square16.interior]
    assert np.max(np.abs(vals - exact)) < 1e-5


def test_residual_bound_is_tight(square16, lap, square_up):
    r = eigen_residual(lap, square_up.eigenfunction, square_up.lam, square16.h)
    assert r == pytest.approx(square_up.residual_norm)
    assert r < 1e-4 * square_up.lam


@pytest.mark.parametrize("alpha", [-0.5, 1.0])
def test_ray_invariance_of_residual(alpha):
    grid = build_grid(Disc(0, 0, 1), 1 / 8)
    spec = OperatorSpec(alpha, 1.0, 2.0, "pucci_plus")
    res = eigen_up(spec, grid)
    t = 3.0
    r1 = eigen_residual(spec, res.eigenfunction, res.lam, grid.h)
    rt = eigen_residual(spec, res.eigenfunction.scaled(t), res.lam, grid.h * t)
    assert rt == pytest.approx(t ** (1 + alpha) * r1, rel=1e-9)


def test_down_equals_up_in_linear_case(square16, lap, square_up):
    down = eigen_down(lap, square16)
    assert down.lam == pytest.approx(square_up.lam, rel=1e-6)
    assert np.all(down.eigenfunction.values[square16.interior] < 0)
    assert down.eigenfunction.values[square16.interior].min() == pytest.approx(-1.0)


def test_pucci_ordering_on_square():
    # M+ >= a tr and M+ >= A tr, so lambda_up <= a lam_lap and lambda_down >= A lam_lap
    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 8)
    up = eigen_up(OperatorSpec(0.0, 1.0, 2.0, "pucci_plus"), grid).lam
    down = eigen_down(OperatorSpec(0.0, 1.0, 2.0, "pucci_plus"), grid).lam
    lap = discrete_square_eigenvalue(1 / 8)
    assert 0 < up <= lap + 1e-6
    assert down >= 2 * lap - 1e-6


def test_positivity_of_bounded_domain_eigenvalue():
    grid = build_grid(Disc(0, 0, 1), 1 / 8)
    for alpha in (-0.5, 0.0, 1.0):
        assert eigen_up(OperatorSpec(alpha, 1, 3, "pucci_minus"), grid).lam > 0


def test_domain_monotonicity(lap):
    small = eigen_up(lap, build_grid(Disc(0, 0, 0.75), 1 / 16)).lam
    large = eigen_up(lap, build_grid(Disc(0, 0, 1.0), 1 / 16)).lam
    assert small >= large


def test_bad_start_rejected(square16, lap):
    with pytest.raises(NotPositive):
        eigen_up(lap, square16, u_init=sample_field(square16, lambda x, y: x - 0.5))


def test_bisection_brackets_threshold(lap):
    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 8)
    b = eigen_bisect(lap, grid, lambda_range=(10, 30))
    ref = discrete_square_eigenvalue(1 / 8)
    assert abs(float(b) - ref) <= 0.05 * ref
    assert b.bracket[0] <= ref * (1 + 1e-3) and b.bracket[1] >= ref * (1 - 1e-3)
    assert all("status" in t for t in b.trials)


def test_bisection_invalid_brackets(lap):
    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 8)
    with pytest.raises(BracketInvalid):
        eigen_bisect(lap, grid, lambda_range=(0, 1))
    with pytest.raises(BracketInvalid):
        eigen_bisect(lap, grid, lambda_range=(40, 60))
    with pytest.raises(SpecError):
        eigen_bisect(lap, grid, lambda_range=(5, 1))


def test_extrapolation_exact_on_model():
    L = [4.0, 8.0, 16.0]
    lam = [3.0 + 7.0 / x ** 2 for x in L]
    assert extrapolate_inverse_square(L, lam) == pytest.approx(3.0)


def test_exhaustion_on_coarse_strip(lap):
    res = eigen_exhaust(lap, 1.0, h=1 / 8, schedule=[2.0, 4.0, 8.0])
    assert res.monotone
    assert res.lambdas[0] >= res.lambdas[1] >= res.lambdas[2]
    # transverse discrete mode of the five-point Laplacian
    transverse = (4 / (1 / 8) ** 2) * math.sin(math.pi / 16) ** 2
    assert res.limit == pytest.approx(transverse, rel=0.01)
    assert [r["L"] for r in res.rows()] == [2.0, 4.0, 8.0]
    assert res.product == pytest.approx(res.limit)


def test_exhaustion_errors(lap):
    with pytest.raises(SpecError):
        eigen_exhaust(lap, 1.0, h=1 / 8, schedule=[4.0, 2.0])
    # a negative tolerance turns any decrease into a violation
    with pytest.raises(NotMonotone):
        eigen_exhaust(lap, 1.0, h=1 / 8, schedule=[2.0, 4.0], mono_tol=-100.0)


def test_strip_scale_copies():
    # strips of width M and 2M with h proportional to M are lattice copies
    spec = OperatorSpec(0.0, 1.0, 2.0, "pucci_plus")
    a = eigen_up(spec, build_grid(StripTruncated(1.0, 2.0), 1 / 8)).lam
    b = eigen_up(spec, build_grid(StripTruncated(2.0, 4.0), 1 / 4)).lam
    assert a == pytest.approx(4 * b, rel=1e-6)


def centre_bump(x, y):
    return -1.0 * ((np.abs(x - 0.5) <= 0.25) & (np.abs(y - 0.5) <= 0.25))


def test_solve_below_positive(lap):
    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 16)
    res = solve_below(lap, grid, lam=0.0, f=centre_bump)
    assert np.all(res.field.values[grid.interior] > 0)
    assert res.sup_ratio > 0 and res.outcome.converged


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
def test_solve_below_homogeneity(alpha):
    from pucci_lab.harnack import scaled_config

    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 16)
    spec = OperatorSpec(alpha, 1.0, 2.0, "pucci_plus")
    cfg = SolveConfig(1e-10, 1e-10)
    thr = 30.0
    v1 = solve_below(spec, grid, cfg, lam=0.0, f=centre_bump, threshold=thr)
    t = 2.0
    v2 = solve_below(spec, grid, scaled_config(cfg, grid, t, alpha), lam=0.0,
                     f=lambda x, y: t ** (1 + alpha) * centre_bump(x, y), threshold=thr)
    assert np.max(np.abs(v2.field.values - t * v1.field.values)) <= 3 * cfg.tol_step * t
    assert v2.sup_ratio == pytest.approx(v1.sup_ratio, rel=1e-9)


def test_solve_below_grows_towards_threshold(lap):
    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 8)
    thr = discrete_square_eigenvalue(1 / 8)
    sups = [solve_below(lap, grid, lam=f * thr, threshold=thr, margin=0.95).field.sup_norm()
            for f in (0.0, 0.5, 0.9)]
    assert sups[0] < sups[1] < sups[2]


def test_solve_below_errors(lap):
    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 8)
    with pytest.raises(SpecError):
        solve_below(lap, grid, f=1.0, threshold=20.0)
    with pytest.raises(SpecError):
        solve_below(lap, grid, f=0.0, threshold=20.0)
    with pytest.raises(SpecError):
        solve_below(lap, grid, lam=19.0, threshold=20.0)
    # a wrong (too large) threshold lets the shift pass the guard, and the solve blows up
    with pytest.raises(Diverged):
        solve_below(lap, grid, lam=40.0, threshold=1000.0)
