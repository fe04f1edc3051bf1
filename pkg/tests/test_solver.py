import numpy as np
import pytest

from pucci_lab import backend
from pucci_lab.errors import ComparisonViolation, SpecError
from pucci_lab.grid import Disc, Rectangle, build_grid, sample_field
from pucci_lab.operator import EvalContext, OperatorSpec, residual
from pucci_lab.solver import (
    CONVERGED,
    DIVERGED,
    MAXSWEEPS,
    SolveConfig,
    check_comparison,
    solve_dirichlet,
)

CFG = SolveConfig(1e-9, 1e-9)


def test_config_validation():
    with pytest.raises(SpecError):
        SolveConfig(0.0, 1e-6)
    with pytest.raises(SpecError):
        SolveConfig(1e-6, 1e-6, cfl=1.5)
    with pytest.raises(SpecError):
        SolveConfig(1e-6, 1e-6, epsilon=-1.0)


def test_constant_boundary_data_is_reproduced(laplacian):
    grid = build_grid(Disc(0, 0, 1), 0.1)
    out = solve_dirichlet(OperatorSpec(0.5, 1, 3, "pucci_minus"), grid, 0.0, 2.5, cfg=CFG)
    assert out.status == CONVERGED
    assert np.max(np.abs(out.field.values[grid.active] - 2.5)) < 1e-12


def test_harmonic_quadratic_is_exact(laplacian):
    grid = build_grid(Disc(0, 0, 1), 0.1)
    g = lambda x, y: x * x - y * y  # noqa: E731
    out = solve_dirichlet(laplacian, grid, 0.0, g, cfg=CFG)
    exact = sample_field(grid, g).values
    assert out.converged
    assert np.max(np.abs(out.field.values - exact)) < 1e-8
    assert out.final_residual <= CFG.tol_res


def test_converged_means_small_residual():
    grid = build_grid(Disc(0, 0, 1), 0.1)
    spec = OperatorSpec(1.0, 1.0, 2.0, "pucci_plus", drift=lambda x, y: (-x, -y), potential=lambda x, y: -1 + 0 * x)
    out = solve_dirichlet(spec, grid, -1.0, lambda x, y: 0.2 * x, cfg=CFG)
    assert out.converged
    r = residual(spec, EvalContext(grid.h, 0.0), out.field, sample_field(grid, -1.0))
    assert np.max(np.abs(r.values)) <= CFG.tol_res


@pytest.mark.slow
def test_thin_rectangle_matches_two_point_problem(laplacian):
    # u'' = -2, u(0) = u(1) = 0 gives x (1 - x); mid-section of [0,1]x[0,8]
    h = 1 / 64
    grid = build_grid(Rectangle(0, 1, 0, 8), h)
    out = solve_dirichlet(laplacian, grid, -2.0, 0.0, cfg=SolveConfig(1e-7, 1e-9))
    assert out.converged
    row = np.argmin(np.abs(grid.ys - 4.0))
    mid = out.field.values[row]
    xs = grid.xs
    inside = grid.interior[row]
    assert np.max(mid) == pytest.approx(0.25, rel=0.02)
    assert np.max(np.abs(mid[inside] - xs[inside] * (1 - xs[inside]))) < 0.005


def test_resolution_convergence(laplacian):
    exact = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)  # noqa: E731
    f = lambda x, y: -2 * np.pi ** 2 * exact(x, y)  # noqa: E731
    errs = []
    for h in (1 / 8, 1 / 16, 1 / 32):
        grid = build_grid(Rectangle(0, 1, 0, 1), h)
        out = solve_dirichlet(laplacian, grid, f, exact, cfg=SolveConfig(1e-10, 1e-12))
        errs.append(np.max(np.abs(out.field.values - sample_field(grid, exact).values)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.1)


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
def test_homogeneity_of_solution_map(alpha):
    from pucci_lab.harnack import scaled_config

    grid = build_grid(Disc(0, 0, 1), 0.125)
    spec = OperatorSpec(alpha, 1.0, 2.0, "pucci_plus", drift=lambda x, y: (0.5 + 0 * x, -y))
    g = lambda x, y: 1 + 0.3 * x  # noqa: E731
    base = solve_dirichlet(spec, grid, -1.0, g, cfg=CFG)
    t = 3.0
    scaled = solve_dirichlet(spec, grid, -(t ** (1 + alpha)), lambda x, y: t * g(x, y),
                             cfg=scaled_config(CFG, grid, t, alpha))
    assert base.converged and scaled.converged
    assert np.max(np.abs(scaled.field.values - t * base.field.values)) <= 1e-12 * t


@pytest.mark.parametrize("spec", [OperatorSpec(0.0, 1, 1, "weighted_laplacian"),
                                  OperatorSpec(1.0, 1, 3, "pucci_plus"),
                                  OperatorSpec(-0.5, 1, 2, "pucci_minus")])
def test_positivity_below_threshold(spec):
    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 16)
    out = solve_dirichlet(spec, grid, lambda x, y: -1.0 * ((np.abs(x - 0.5) < 0.2) & (np.abs(y - 0.5) < 0.2)),
                          0.0, lam=0.0, cfg=CFG)
    assert out.converged
    assert np.all(out.field.interior_values() > 0)


def test_divergence_above_threshold(laplacian):
    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 8)
    out = solve_dirichlet(laplacian, grid, -1.0, 0.0, lam=40.0, cfg=CFG)
    assert out.status == DIVERGED
    assert out.growth_rate > 0
    assert np.all(np.isfinite(out.field.values))


def test_max_sweeps_status(laplacian):
    grid = build_grid(Rectangle(0, 1, 0, 1), 1 / 16)
    out = solve_dirichlet(laplacian, grid, -1.0, 0.0, cfg=SolveConfig(1e-12, 1e-12, max_sweeps=10))
    assert out.status == MAXSWEEPS and out.sweeps == 10


def test_determinism():
    grid = build_grid(Disc(0, 0, 1), 0.1)
    spec = OperatorSpec(0.5, 1.0, 2.0, "pucci_plus")
    a = solve_dirichlet(spec, grid, -1.0, 0.0, cfg=CFG)
    b = solve_dirichlet(spec, grid, -1.0, 0.0, cfg=CFG)
    assert np.array_equal(a.field.values, b.field.values) and a.sweeps == b.sweeps


@pytest.mark.skipif("cython" not in backend.BACKENDS, reason="compiled kernels not built")
@pytest.mark.parametrize("spec", [OperatorSpec(0.0, 1, 1, "weighted_laplacian"),
                                  OperatorSpec(-0.5, 1, 2, "pucci_plus", drift=lambda x, y: (y, -x)),
                                  OperatorSpec(1.0, 1, 3, "pucci_minus", potential=lambda x, y: -x * x)])
def test_backends_agree(spec):
    grid = build_grid(Disc(0, 0, 1), 0.125)
    cfg = SolveConfig(1e-8, 1e-8)
    outs = [solve_dirichlet(spec, grid, -1.0, lambda x, y: 0.1 * y, cfg=cfg, impl=backend.get(name))
            for name in ("cython", "python")]
    assert outs[0].status == outs[1].status
    assert abs(outs[0].sweeps - outs[1].sweeps) <= 1
    assert np.max(np.abs(outs[0].field.values - outs[1].field.values)) < 1e-10


def test_backend_residuals_agree(rng):
    grid = build_grid(Disc(0, 0, 1), 0.1)
    spec = OperatorSpec(0.3, 1, 2, "pucci_plus", drift=lambda x, y: (x, y), potential=lambda x, y: y)
    u = rng.normal(size=grid.shape)
    f = rng.normal(size=grid.shape)
    outs = [backend.residual_array(spec, grid, u, f, 0.2, 0.05, impl=backend.get(name))
            for name in backend.BACKENDS]
    for o in outs[1:]:
        assert np.max(np.abs(o - outs[0])) < 1e-12


def test_comparison_examples(laplacian):
    grid = build_grid(Disc(0, 0, 1), 0.1)
    u = solve_dirichlet(laplacian, grid, 1.0, 0.0, cfg=CFG).field
    v = solve_dirichlet(laplacian, grid, -1.0, 0.0, cfg=CFG).field
    rep = check_comparison(laplacian, grid, u, v, 0.0, 0.0, 1.0, -1.0)
    assert rep.passed and np.all(u.values <= v.values + 1e-12)
    # same problem on both sides, with a tiny artificial gap
    same = check_comparison(laplacian, grid, v, v, 0.0, 0.0, -1.0 + 1e-9, -1.0, res_tol=1e-6)
    assert same.max_violation == pytest.approx(0.0, abs=1e-12)


def test_comparison_detects_swapped_pair(laplacian):
    grid = build_grid(Disc(0, 0, 1), 0.1)
    u = solve_dirichlet(laplacian, grid, 1.0, 0.0, cfg=CFG).field
    v = solve_dirichlet(laplacian, grid, -1.0, 0.0, cfg=CFG).field
    # v is a sub-solution for f = -1 and u a super-solution for f = 1 only in the wrong direction
    with pytest.raises((ComparisonViolation, SpecError)):
        check_comparison(laplacian, grid, v, u, 0.0, 0.0, 1.0, -1.0)


def test_comparison_preconditions(laplacian):
    grid = build_grid(Disc(0, 0, 1), 0.2)
    z = sample_field(grid, 0.0)
    with pytest.raises(SpecError):
        check_comparison(laplacian, grid, z, z, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(SpecError):
        check_comparison(laplacian, grid, z, z, 0.0, 0.0, 1.0, -1.0, lam=1.0)
