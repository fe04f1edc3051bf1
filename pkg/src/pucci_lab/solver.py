"""Dirichlet solver by damped explicit pseudo-time relaxation.

Each sweep is a Jacobi-style map u <- u + dt * R[u] over the interior nodes,
where R[u] = F[u] + h.Du|Du|^alpha + (V + lambda)|u|^alpha u - f. The time
step follows the stability bound of the explicit scheme and is recomputed from
the current iterate at every sweep. A run that blows up is reported as
``Diverged``; the eigenvalue bisection relies on that signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ComparisonViolation, SpecError
from .grid import Grid, ScalarField, sample_field
from .operator import EvalContext, OperatorSpec, residual

CONVERGED, DIVERGED, MAXSWEEPS = "Converged", "Diverged", "MaxSweeps"
_STATUS = {backend.CONVERGED: CONVERGED, backend.DIVERGED: DIVERGED, backend.MAXSWEEPS: MAXSWEEPS}


@dataclass(frozen=True)
class SolveConfig:
    tol_res: float = 1e-8
    tol_step: float = 1e-8
    # the explicit scheme with the cross-derivative stencil is stable up to
    # cfl ~ 0.44; larger values are accepted but may oscillate
    cfl: float = 0.4
    max_sweeps: int = 500_000
    blowup_factor: float = 1e6
    epsilon: float | None = None
    growth_window: int = 200

    def __post_init__(self):
        for name in ("tol_res", "tol_step", "blowup_factor"):
            if not getattr(self, name) > 0:
                raise SpecError(f"{name} must be positive")
        if not 0 < self.cfl <= 1:
            raise SpecError("cfl must lie in (0, 1]")
        if self.max_sweeps < 1 or self.growth_window < 1:
            raise SpecError("max_sweeps and growth_window must be >= 1")
        if self.epsilon is not None and not self.epsilon > 0:
            raise SpecError("epsilon must be positive")

    def eps_for(self, grid: Grid) -> float:
        return self.epsilon if self.epsilon is not None else grid.h


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    field: ScalarField
    status: str
    final_residual: float
    sweeps: int
    last_step: float = math.nan
    growth_rate: float = math.nan
    pseudo_time: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def summary(self) -> dict:
        return {
            "status": self.status,
            "final_residual": self.final_residual,
            "sweeps": self.sweeps,
            "last_step": self.last_step,
            "growth_rate": self.growth_rate,
            "pseudo_time": self.pseudo_time,
        }


def as_field(grid: Grid, data) -> ScalarField:
    if isinstance(data, ScalarField):
        if data.grid.shape != grid.shape:
            raise SpecError("field lives on a different grid")
        return data
    return sample_field(grid, data)


def solve_dirichlet(spec: OperatorSpec, grid: Grid, f, g, lam: float = 0.0,
                    cfg: SolveConfig = SolveConfig(), u0=None, impl=None) -> SolveOutcome:
    """Solve F[u] + h.Du|Du|^alpha + (V + lam)|u|^alpha u = f, u = g on the boundary layer.

    ``f`` and ``g`` may be fields, callables of (x1, x2) or constants. The
    start is the mean boundary value at interior nodes unless ``u0`` is given
    (its boundary values are overwritten by ``g``).
    """
    f = as_field(grid, f)
    g = as_field(grid, g)
    interior, bnd = grid.interior, grid.boundary
    if not interior.any():
        raise SpecError("grid has no interior node")
    g_b = g.values[bnd]
    if not np.all(np.isfinite(g_b)):
        raise SpecError("boundary data must be finite")

    u = np.zeros(grid.shape)
    if u0 is None:
        u[interior] = float(g_b.mean()) if g_b.size else 0.0
    else:
        start = u0.values if isinstance(u0, ScalarField) else np.asarray(u0, float)
        u[interior] = start[interior]
    u[bnd] = g_b

    eps = cfg.eps_for(grid)
    hx, hy, V, has_drift = backend.coefficient_arrays(spec, grid)
    h_inf = float(np.max(np.hypot(hx, hy)))
    V_inf = float(np.max(np.abs(V)))
    f_inf = float(np.max(np.abs(f.values[interior])))
    g_inf = float(np.max(np.abs(g_b))) if g_b.size else 0.0
    blowup = cfg.blowup_factor * (1.0 + g_inf + f_inf ** (1.0 / (1.0 + spec.alpha)))

    iy, ix = backend.interior_index(grid)
    impl = impl or backend.get()
    status, sweeps, rmax, step, growth, t = impl.relax(
        u, iy, ix, np.ascontiguousarray(f.values), hx, hy, V, float(lam), float(spec.alpha),
        float(spec.a), float(spec.A), spec.code, float(eps), float(grid.h), bool(has_drift),
        float(cfg.cfl), h_inf, V_inf, int(cfg.max_sweeps), float(cfg.tol_res), float(cfg.tol_step),
        float(blowup), int(cfg.growth_window),
    )
    status = _STATUS[status]
    if status == DIVERGED or not np.all(np.isfinite(u)):
        # the blown-up iterate is kept for inspection but clipped to stay finite
        u = np.nan_to_num(u, nan=0.0, posinf=np.finfo(float).max, neginf=-np.finfo(float).max)
        status = DIVERGED
    return SolveOutcome(ScalarField(grid, u), status, float(rmax), int(sweeps),
                        float(step), float(growth), float(t))


@dataclass
class ComparisonReport:
    max_violation: float
    worst_node: tuple[int, int] | None
    tolerance: float
    passed: bool
    sub_residual_min: float
    super_residual_max: float
    forcing_gap: float
    boundary_gap: float

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["worst_node"] = list(self.worst_node) if self.worst_node is not None else None
        return d


def check_comparison(spec: OperatorSpec, grid: Grid, u: ScalarField, v: ScalarField,
                     g_u, g_v, f_u, f_v, lam: float = 0.0, tol: float = 1e-6,
                     res_tol: float = 1e-6, epsilon: float | None = None) -> ComparisonReport:
    """Discrete weak comparison: sub-solution u below super-solution v.

    u must satisfy R[u] >= f_u, v must satisfy R[v] <= f_v, with f_v < f_u
    strictly, u <= v on the boundary layer and V + lam <= 0.
    """
    V = spec.potential_on(grid)
    interior = grid.interior
    if np.any(V[interior] + lam > 0):
        raise SpecError("comparison requires V + lambda <= 0 on the grid")
    f_u, f_v = as_field(grid, f_u), as_field(grid, f_v)
    g_u, g_v = as_field(grid, g_u), as_field(grid, g_v)
    gap = float(np.max(f_v.values[interior] - f_u.values[interior]))
    if not gap < 0:
        raise SpecError("comparison requires a strict forcing gap f_v < f_u")
    bnd = grid.boundary
    boundary_gap = float(np.max(g_u.values[bnd] - g_v.values[bnd])) if bnd.any() else -math.inf
    if boundary_gap > tol:
        raise SpecError("comparison requires g_u <= g_v on the boundary")

    ctx = EvalContext(epsilon if epsilon is not None else grid.h, lam)
    r_u = residual(spec, ctx, u, f_u).values[interior]
    r_v = residual(spec, ctx, v, f_v).values[interior]
    sub_min, super_max = float(r_u.min()), float(r_v.max())
    if sub_min < -res_tol or super_max > res_tol:
        raise SpecError(f"inputs are not sub/super-solutions (min R[u]-f_u={sub_min:.3e}, "
                        f"max R[v]-f_v={super_max:.3e})")

    diff = np.where(grid.active, u.values - v.values, -np.inf)
    worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
    violation = float(diff[worst])
    report = ComparisonReport(violation, (int(worst[0]), int(worst[1])), tol, violation <= tol,
                              sub_min, super_max, gap, boundary_gap)
    if not report.passed:
        raise ComparisonViolation(f"u exceeds v by {violation:.3e} at node {worst}",
                                  node=report.worst_node, violation=violation)
    return report
