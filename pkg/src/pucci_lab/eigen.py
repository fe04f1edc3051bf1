"""Principal eigenvalues of the homogeneous operator.

Two independent routes are provided:

* inverse power iteration (``eigen_up``): solve F[w] + ... = -u_k^(1+alpha)
  with zero boundary data and renormalise; the homogeneity of the operator
  turns sup w into the eigenvalue estimate;
* blow-up bisection (``eigen_bisect``): the shifted problem with f = -1 has a
  positive solution below the threshold and blows up above it.

``eigen_down`` obtains the negative-eigenfunction value through the dual
operator G(p, X) = -F(-p, -X).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (BracketInvalid, Diverged, NoConvergence, NotMonotone, NotPositive,
                     SpecError)
from .grid import Grid, ScalarField, StripTruncated, build_grid
from .operator import EvalContext, OperatorSpec, residual
from .solver import CONVERGED, DIVERGED, MAXSWEEPS, SolveConfig, SolveOutcome, as_field, solve_dirichlet

log = logging.getLogger(__name__)

EIGEN_CONFIG = SolveConfig(tol_res=1e-9, tol_step=1e-9)


@dataclass(frozen=True, eq=False)
class EigenResult:
    lam: float
    eigenfunction: ScalarField
    residual_norm: float
    trace: list[float]
    iterations: int
    sweeps: int
    probe_value: float

    def summary(self) -> dict:
        return {
            "lambda": self.lam,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "sweeps": self.sweeps,
            "trace": list(self.trace),
            "probe_value": self.probe_value,
        }


def default_start(grid: Grid) -> ScalarField:
    """Product of half sine waves over the bounding box of the active nodes.

    Positive at every interior node; it is the exact discrete first mode of
    the Laplacian on rectangles.
    """
    act = grid.active
    xs, ys = grid.X[act], grid.Y[act]
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    u = np.sin(np.pi * (grid.X - x0) / (x1 - x0)) * np.sin(np.pi * (grid.Y - y0) / (y1 - y0))
    u = np.where(grid.interior, u, 0.0)
    return ScalarField(grid, u / u[grid.interior].max())


def eigen_residual(spec: OperatorSpec, phi: ScalarField, lam: float, epsilon: float) -> float:
    """max |F[phi] + h.Dphi|Dphi|^alpha + (V + lam)|phi|^alpha phi| over interior nodes."""
    r = residual(spec, EvalContext(epsilon, lam), phi, ScalarField(phi.grid, np.zeros(phi.grid.shape)))
    return float(np.max(np.abs(r.values[phi.grid.interior])))


def eigen_up(spec: OperatorSpec, grid: Grid, cfg: SolveConfig = EIGEN_CONFIG, x0=None,
             tol: float = 1e-6, max_iter: int = 1000, u_init: ScalarField | None = None) -> EigenResult:
    """Principal eigenvalue with positive eigenfunction, by inverse power iteration.

    ``x0`` is a point whose nearest interior node serves as positivity probe
    (default: the node closest to the domain's bounding-box centre).
    """
    interior = grid.interior
    if x0 is None:
        act = grid.active
        x0 = (0.5 * (grid.X[act].min() + grid.X[act].max()), 0.5 * (grid.Y[act].min() + grid.Y[act].max()))
    probe = grid.nearest_interior(x0)
    u_hat = u_init if u_init is not None else default_start(grid)
    if np.any(u_hat.values[interior] <= 0):
        raise NotPositive("starting field must be positive at interior nodes")
    u_hat = u_hat.scaled(1.0 / u_hat.values[interior].max())

    power = 1.0 + spec.alpha
    eps = cfg.eps_for(grid)
    trace: list[float] = []
    sweeps = 0
    w_prev = None
    lam = math.nan
    change = 1e-2
    for it in range(1, max_iter + 1):
        rhs = np.where(interior, -np.abs(u_hat.values) ** power, 0.0)
        # early outer iterations do not need tightly solved inner problems
        loose = max(cfg.tol_res, 1e-2 * change)
        inner = replace(cfg, tol_res=loose, tol_step=max(cfg.tol_step, loose))
        out = solve_dirichlet(spec, grid, ScalarField(grid, rhs), 0.0, 0.0, inner, u0=w_prev)
        sweeps += out.sweeps
        if out.status != CONVERGED:
            raise NoConvergence(f"inner solve {out.status} at iteration {it} "
                                f"(residual {out.final_residual:.3e})")
        w = out.field
        w_int = w.values[interior]
        if np.any(w_int <= 0) or w.values[probe] <= 0:
            raise NotPositive(f"iterate lost positivity at iteration {it}")
        s = float(w_int.max())
        lam = s ** (-power)
        trace.append(lam)
        u_hat = w.scaled(1.0 / s)
        w_prev = w
        log.debug("eigen_up iteration %d: lambda=%.10g sweeps=%d", it, lam, out.sweeps)
        if len(trace) > 1:
            prev_change, change = change, abs(trace[-1] - trace[-2]) / abs(lam)
            # geometric tail estimate of the remaining error in lambda
            ratio = change / prev_change if len(trace) > 2 and prev_change > 0 else 0.0
            remaining = change * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
            if max(change, remaining) <= tol and loose <= cfg.tol_res:
                break
    else:
        raise NoConvergence(f"eigenvalue trace did not settle in {max_iter} iterations: {trace[-3:]}")
    res = eigen_residual(spec, u_hat, lam, eps)
    return EigenResult(lam, u_hat, res, trace, len(trace), sweeps, float(u_hat.values[probe]))


def eigen_down(spec: OperatorSpec, grid: Grid, cfg: SolveConfig = EIGEN_CONFIG, x0=None,
               tol: float = 1e-6, max_iter: int = 1000) -> EigenResult:
    """Principal eigenvalue with negative eigenfunction (normalised to inf = -1)."""
    dual = eigen_up(spec.dual(), grid, cfg, x0, tol, max_iter)
    psi = dual.eigenfunction.scaled(-1.0)
    res = eigen_residual(spec, psi, dual.lam, cfg.eps_for(grid))
    return EigenResult(dual.lam, psi, res, dual.trace, dual.iterations, dual.sweeps, -dual.probe_value)


# -- bisection -------------------------------------------------------------


BISECT_CONFIG = SolveConfig(tol_res=1e-8, tol_step=1e-8, max_sweeps=60_000)


def classify_shift(spec: OperatorSpec, grid: Grid, lam: float, cfg: SolveConfig = BISECT_CONFIG):
    """True when lam lies below the threshold: f = -1, g = 0 gives a positive solution.

    A run that exhausts its sweep budget is classified by the sign of the
    measured residual growth rate.
    """
    out = solve_dirichlet(spec, grid, -1.0, 0.0, lam, cfg)
    if out.status == CONVERGED:
        below = bool(np.all(out.field.values[grid.interior] > 0))
    elif out.status == DIVERGED:
        below = False
    else:
        below = not (out.growth_rate > 0)
    return below, out


@dataclass
class BisectionResult:
    lam: float
    bracket: tuple[float, float]
    trials: list[dict] = field(default_factory=list)

    def __float__(self):
        return self.lam


def eigen_bisect(spec: OperatorSpec, grid: Grid, cfg: SolveConfig = BISECT_CONFIG,
                 lambda_range=(0.0, 1.0), rel_tol: float = 2e-3) -> BisectionResult:
    lo, hi = map(float, lambda_range)
    if not lo < hi:
        raise SpecError("lambda_range must be increasing")
    trials = []

    def trial(lam):
        below, out = classify_shift(spec, grid, lam, cfg)
        trials.append({"lambda": lam, "below": below, **out.summary()})
        return below

    lo_below, hi_below = trial(lo), trial(hi)
    if lo_below == hi_below:
        side = "solvable" if lo_below else "divergent"
        raise BracketInvalid(f"both ends of [{lo}, {hi}] are {side}")
    if not lo_below:
        raise BracketInvalid(f"lower end {lo} is divergent while upper end {hi} is solvable")
    while hi - lo > rel_tol * max(abs(0.5 * (lo + hi)), 1e-12):
        mid = 0.5 * (lo + hi)
        if trial(mid):
            lo = mid
        else:
            hi = mid
    return BisectionResult(0.5 * (lo + hi), (lo, hi), trials)


# -- unbounded strips by exhaustion ------------------------------------------


@dataclass
class ExhaustionResult:
    M: float
    lengths: list[float]
    lambdas: list[float]
    residuals: list[float]
    sweeps: list[int]
    limit: float
    monotone: bool
    alpha: float

    @property
    def product(self) -> float:
        """lambda_inf * M^(2 + alpha)."""
        return self.limit * self.M ** (2.0 + self.alpha)

    def rows(self):
        return [{"L": L, "lambda": lam, "residual": r, "sweeps": s}
                for L, lam, r, s in zip(self.lengths, self.lambdas, self.residuals, self.sweeps)]

    def summary(self) -> dict:
        return {"M": self.M, "limit": self.limit, "product": self.product,
                "monotone": self.monotone, "rows": self.rows()}


def extrapolate_inverse_square(lengths, lambdas) -> float:
    """Least-squares fit lambda(L) = lambda_inf + c / L^2 on the given points."""
    L = np.asarray(lengths, float)
    design = np.column_stack([np.ones_like(L), L ** -2])
    coef, *_ = np.linalg.lstsq(design, np.asarray(lambdas, float), rcond=None)
    return float(coef[0])


def eigen_exhaust(spec: OperatorSpec, M: float, cfg: SolveConfig = EIGEN_CONFIG, schedule=None,
                  h: float | None = None, mono_tol: float = 1e-3, tol: float = 1e-6,
                  epsilon_rule=None) -> ExhaustionResult:
    """Principal eigenvalues of [0, M] x [-L/2, L/2] along an increasing L schedule.

    The default schedule doubles L from 4M to 16M and the default spacing is
    h = M / 16, so that strips of different width are exact rescalings of
    each other on the lattice.
    """
    schedule = list(schedule) if schedule is not None else [4.0 * M, 8.0 * M, 16.0 * M]
    if len(schedule) < 1 or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise SpecError("schedule must be strictly increasing")
    h = h if h is not None else M / 16.0
    lambdas, residuals, sweeps = [], [], []
    for L in schedule:
        grid = build_grid(StripTruncated(M, L), h)
        run_cfg = cfg if epsilon_rule is None else replace(cfg, epsilon=epsilon_rule(grid))
        res = eigen_up(spec, grid, run_cfg, x0=(0.5 * M, 0.0), tol=tol)
        log.info("strip M=%g L=%g: lambda=%.8g", M, L, res.lam)
        lambdas.append(res.lam)
        residuals.append(res.residual_norm)
        sweeps.append(res.sweeps)
    monotone = all(b <= a + mono_tol for a, b in zip(lambdas, lambdas[1:]))
    if not monotone:
        raise NotMonotone(f"eigenvalues increase along the schedule: {lambdas}")
    tail = slice(-3, None) if len(schedule) >= 3 else slice(None)
    limit = extrapolate_inverse_square(schedule[tail], lambdas[tail]) if len(schedule) >= 2 else lambdas[-1]
    return ExhaustionResult(float(M), [float(L) for L in schedule], lambdas, residuals, sweeps,
                            limit, monotone, float(spec.alpha))


# -- below the principal eigenvalue ------------------------------------------


@dataclass(frozen=True, eq=False)
class BelowResult:
    field: ScalarField
    outcome: SolveOutcome
    lam: float
    threshold: float
    sup_ratio: float

    def summary(self) -> dict:
        return {"lambda": self.lam, "threshold": self.threshold, "sup_ratio": self.sup_ratio,
                **self.outcome.summary()}


def solve_below(spec: OperatorSpec, grid: Grid, cfg: SolveConfig = EIGEN_CONFIG, lam: float = 0.0,
                f=-1.0, threshold: float | None = None, margin: float = 0.9) -> BelowResult:
    """Positive solution of the shifted problem with f <= 0 for lam below the threshold.

    ``threshold`` is the principal eigenvalue on ``grid``; it is computed with
    ``eigen_up`` when not supplied. The report records sup v / |f|^(1/(1+alpha)).
    """
    f = as_field(grid, f)
    f_int = f.values[grid.interior]
    if np.any(f_int > 0) or not np.any(f_int < 0):
        raise SpecError("solve_below needs f <= 0 and f not identically zero")
    if threshold is None:
        threshold = eigen_up(spec, grid, cfg).lam
    if lam > margin * threshold:
        raise SpecError(f"lambda={lam} is not below {margin} x threshold {threshold:.6g}")
    out = solve_dirichlet(spec, grid, f, 0.0, lam, cfg)
    if out.status == DIVERGED:
        raise Diverged(f"solve diverged at lambda={lam}")
    if out.status != CONVERGED:
        raise NoConvergence(f"solve did not converge (residual {out.final_residual:.3e})")
    v = out.field
    if np.any(v.values[grid.interior] <= 0):
        raise NotPositive("solution is not positive at every interior node")
    f_inf = float(np.max(np.abs(f_int)))
    ratio = float(v.values[grid.interior].max()) / f_inf ** (1.0 / (1.0 + spec.alpha))
    return BelowResult(v, out, float(lam), float(threshold), ratio)
