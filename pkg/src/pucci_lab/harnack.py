"""Empirical Harnack constants, oscillation decay and Liouville-type trends.

Everything here measures computed solutions: the Harnack ratio sup/inf on an
inner set, its Monte-Carlo maximum over random nonnegative boundary data, the
decay of the oscillation over shrinking balls, and the oscillation of the
solution on a fixed ball as the box around it grows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import InsufficientNodes, NonPositive, PucciLabError, SpecError
from .grid import Disc, DomainSpec, Grid, Rectangle, ScalarField, build_grid, mask_nodes, sample_field
from .operator import OperatorSpec
from .solver import CONVERGED, SolveConfig, solve_dirichlet

log = logging.getLogger(__name__)

HARNACK_CONFIG = SolveConfig(tol_res=1e-9, tol_step=1e-9)


@dataclass
class HarnackReport:
    sup: float
    inf: float
    ratio: float
    k_rhs: float = math.nan
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"sup": self.sup, "inf": self.inf, "ratio": self.ratio, "k_rhs": self.k_rhs, **self.meta}


def harnack_ratio(u: ScalarField, inner: DomainSpec) -> HarnackReport:
    """sup/inf of ``u`` over the active nodes lying in ``inner``."""
    sel = mask_nodes(u.grid, inner)
    if not sel.any():
        raise InsufficientNodes("no grid node lies in the inner set")
    vals = u.values[sel]
    hi, lo = float(vals.max()), float(vals.min())
    if lo <= 0:
        raise NonPositive(f"field is not positive on the inner set (inf = {lo:.3e})")
    return HarnackReport(hi, lo, hi / lo, meta={"inner_nodes": int(sel.sum())})


# -- random data ------------------------------------------------------------


def trig_boundary_family(center=(0.0, 0.0), modes: int = 5, budget: float = 0.95) -> Callable:
    """Random nonnegative trigonometric polynomials in the polar angle about ``center``.

    g = 1 + sum_k (a_k cos k theta + b_k sin k theta) with sum |a_k| + |b_k| <= budget <= 1,
    so g >= 1 - budget >= 0 and g is never identically zero.
    """
    if not 0 <= budget <= 1:
        raise SpecError("budget must lie in [0, 1]")

    def draw(rng: np.random.Generator):
        z = rng.standard_normal(2 * modes)
        z *= rng.uniform(0, budget) / np.sum(np.abs(z))
        k = np.arange(1, modes + 1)

        def g(x1, x2):
            th = np.arctan2(np.asarray(x2) - center[1], np.asarray(x1) - center[0])[..., None]
            return 1.0 + np.sum(z[:modes] * np.cos(k * th) + z[modes:] * np.sin(k * th), axis=-1)

        g.coefficients = z
        return g

    return draw


def bump_rhs_family(center=(0.0, 0.0), radius: float = 0.5, scale: float = 1.0) -> Callable:
    """Random nonpositive bumps -s * max(0, 1 - |x - x_c|^2 / r^2) with s in (0, scale]."""

    def draw(rng: np.random.Generator):
        s = scale * rng.uniform(0.05, 1.0)
        xc = np.asarray(center) + 0.5 * radius * rng.uniform(-1, 1, 2)

        def f(x1, x2):
            d2 = (np.asarray(x1) - xc[0]) ** 2 + (np.asarray(x2) - xc[1]) ** 2
            return -s * np.clip(1.0 - d2 / radius**2, 0.0, None)

        return f

    return draw


def _trial_rng(seed: int, i: int) -> np.random.Generator:
    # per-trial streams: the first n trials are identical whatever the total count
    return np.random.default_rng([seed, i])


def _spec_for(spec_family, rng) -> OperatorSpec:
    return spec_family if isinstance(spec_family, OperatorSpec) else spec_family(rng)


def scaled_config(cfg: SolveConfig, grid: Grid, t: float, alpha: float) -> SolveConfig:
    """Configuration under which the solver iterates of t*u are exactly t times those of u."""
    return replace(cfg, tol_res=cfg.tol_res * t ** (1 + alpha), tol_step=cfg.tol_step * t,
                   epsilon=cfg.eps_for(grid) * t)


def _solve(spec, grid, f, g, cfg):
    out = solve_dirichlet(spec, grid, f, g, 0.0, cfg)
    if out.status != CONVERGED:
        raise PucciLabError(f"solve ended with status {out.status} (residual {out.final_residual:.3e})")
    return out


# -- Monte-Carlo Harnack constant --------------------------------------------


@dataclass
class KReport:
    K: float
    K_half: float
    stable: bool
    trials: int
    failures: int
    seed: int
    rows: list[dict]
    scale_defect: float = math.nan
    kind: str = "harnack"

    @property
    def values(self) -> list[float]:
        key = "ratio" if self.kind == "harnack" else "k_rhs"
        return [r[key] for r in self.rows if r.get("ok")]

    def summary(self) -> dict:
        return {"K": self.K, "K_half": self.K_half, "stable": self.stable, "trials": self.trials,
                "failures": self.failures, "seed": self.seed, "scale_defect": self.scale_defect,
                "kind": self.kind}


def _reduce(rows, key, trials, seed, kind, scale_defect, stability=0.1) -> KReport:
    vals = [r[key] if r.get("ok") else -math.inf for r in rows]
    K = max(vals, default=-math.inf)
    half = vals[: max(1, trials // 2)]
    K_half = max(half, default=-math.inf)
    stable = bool(np.isfinite(K) and np.isfinite(K_half) and (K - K_half) <= stability * K_half)
    failures = sum(not r.get("ok") for r in rows)
    return KReport(K, K_half, stable, trials, failures, seed, rows, scale_defect, kind)


def measure_k(spec_family, boundary_family, outer: DomainSpec, inner: DomainSpec, trials: int = 100,
              cfg: SolveConfig = HARNACK_CONFIG, h: float = 1 / 16, seed: int = 0,
              scale_t: float | None = 2.0) -> KReport:
    """Largest sup/inf ratio on ``inner`` over random nonnegative boundary data.

    Solves F[u] + h.Du|Du|^alpha + V|u|^alpha u = 0 per trial. Trials whose
    solve fails are excluded and counted. With ``scale_t`` set, every trial is
    repeated with data t*g (and matching tolerances) and the largest relative
    change of the ratio is reported as ``scale_defect``.
    """
    if trials < 1:
        raise SpecError("trials must be >= 1")
    grid = build_grid(outer, h)
    if not mask_nodes(grid, inner).any():
        raise InsufficientNodes("inner set holds no grid node")
    rows, defect = [], 0.0
    for i in range(trials):
        rng = _trial_rng(seed, i)
        spec = _spec_for(spec_family, rng)
        g = sample_field(grid, boundary_family(rng))
        try:
            u = _solve(spec, grid, 0.0, g, cfg).field
            rep = harnack_ratio(u, inner)
            row = {"trial": i, "ok": True, "ratio": rep.ratio, "sup": rep.sup, "inf": rep.inf}
            if scale_t is not None:
                ut = _solve(spec, grid, 0.0, g.scaled(scale_t), scaled_config(cfg, grid, scale_t, spec.alpha)).field
                rt = harnack_ratio(ut, inner).ratio
                row["ratio_scaled"] = rt
                defect = max(defect, abs(rt - rep.ratio) / rep.ratio)
        except PucciLabError as exc:
            log.warning("trial %d failed: %s", i, exc)
            row = {"trial": i, "ok": False, "error": str(exc)}
        rows.append(row)
    return _reduce(rows, "ratio", trials, seed, "harnack", defect if scale_t is not None else math.nan)


def k_rhs_value(u: ScalarField, inner: DomainSpec, f_inf: float, alpha: float) -> HarnackReport:
    rep = harnack_ratio(u, inner)
    rep.k_rhs = rep.sup / (rep.inf + f_inf ** (1.0 / (1.0 + alpha)))
    return rep


def measure_k_rhs(spec_family, f_family, outer: DomainSpec, inner: DomainSpec, trials: int = 100,
                  cfg: SolveConfig = HARNACK_CONFIG, h: float = 1 / 16, seed: int = 0,
                  boundary_family=None, scale_ts=(0.5, 2.0, 10.0)) -> KReport:
    """Largest sup / (inf + |f|^(1/(1+alpha))) on ``inner`` over random data.

    Each trial also re-solves with (t^(1+alpha) f, t g) for every t in
    ``scale_ts``; the largest relative change of k_trial is ``scale_defect``.
    """
    if trials < 1:
        raise SpecError("trials must be >= 1")
    grid = build_grid(outer, h)
    x0, x1, y0, y1 = outer.bbox()
    boundary_family = boundary_family or trig_boundary_family(((x0 + x1) / 2, (y0 + y1) / 2))
    rows, defect = [], 0.0
    for i in range(trials):
        rng = _trial_rng(seed, i)
        spec = _spec_for(spec_family, rng)
        V = spec.potential_on(grid)
        if np.any(V[grid.interior] > 0):
            raise SpecError("measure_k_rhs needs V <= 0")
        f = sample_field(grid, f_family(rng))
        g = sample_field(grid, boundary_family(rng))
        f_inf = f.sup_norm("interior")
        try:
            u = _solve(spec, grid, f, g, cfg).field
            rep = k_rhs_value(u, inner, f_inf, spec.alpha)
            row = {"trial": i, "ok": True, "k_rhs": rep.k_rhs, "ratio": rep.ratio, "sup": rep.sup,
                   "inf": rep.inf, "f_inf": f_inf}
            for t in scale_ts:
                ct = scaled_config(cfg, grid, t, spec.alpha)
                ut = _solve(spec, grid, f.scaled(t ** (1 + spec.alpha)), g.scaled(t), ct).field
                kt = k_rhs_value(ut, inner, f_inf * t ** (1 + spec.alpha), spec.alpha).k_rhs
                defect = max(defect, abs(kt - rep.k_rhs) / rep.k_rhs)
        except PucciLabError as exc:
            log.warning("trial %d failed: %s", i, exc)
            row = {"trial": i, "ok": False, "error": str(exc)}
        rows.append(row)
    return _reduce(rows, "k_rhs", trials, seed, "harnack_rhs", defect if scale_ts else math.nan)


# -- oscillation decay ------------------------------------------------------


@dataclass
class OscillationTrace:
    radii: list[float]
    oscillations: list[float]
    beta: float
    r_squared: float
    nodes: list[int]
    min_r_squared: float = 0.9

    @property
    def beta_claimed(self) -> bool:
        """A beta is only asserted when the log-log fit is good enough."""
        return bool(np.isfinite(self.r_squared) and self.r_squared >= self.min_r_squared)

    def to_dict(self) -> dict:
        return {"radii": self.radii, "oscillations": self.oscillations, "beta": self.beta,
                "r_squared": self.r_squared, "nodes": self.nodes, "beta_claimed": self.beta_claimed}


def oscillation_decay(u: ScalarField, center, R0: float, levels: int = 3, ratio: float = 4.0) -> OscillationTrace:
    """osc over B(center, R0 ratio^-j), j < levels, and the log-log slope beta."""
    if levels < 2:
        raise SpecError("need at least two levels for a fit")
    grid = u.grid
    d2 = (grid.X - center[0]) ** 2 + (grid.Y - center[1]) ** 2
    radii, oscs, counts = [], [], []
    for j in range(levels):
        R = R0 * ratio ** (-j)
        sel = grid.active & (d2 <= R * R * (1 + 1e-12))
        n = int(sel.sum())
        if n < 4:
            raise InsufficientNodes(f"ball of radius {R:.4g} holds only {n} node(s)")
        vals = u.values[sel]
        radii.append(R)
        oscs.append(float(vals.max() - vals.min()))
        counts.append(n)
    osc = np.asarray(oscs)
    if np.all(osc > 0):
        x, y = np.log(radii), np.log(osc)
        slope, icpt = np.polyfit(x, y, 1)
        fit = slope * x + icpt
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss_tot if ss_tot > 0 else math.nan
        beta = float(slope)
    else:
        beta, r2 = math.nan, math.nan
    return OscillationTrace(radii, oscs, beta, r2, counts)


# -- Liouville trend --------------------------------------------------------


def angular_pattern(lo: float = 1.0, hi: float = 2.0) -> Callable:
    """Boundary data lo + (hi - lo)(1 + cos theta)/2, the same pattern on every box."""

    def g(x1, x2):
        th = np.arctan2(x2, x1)
        return lo + (hi - lo) * 0.5 * (1.0 + np.cos(th))

    return g


def harmonic_center_bound(L: float, data_osc: float = 1.0, r: float = 1.0) -> float:
    """Upper bound for osc over B(0, r) of a harmonic function in B(0, L/2) with values in an
    interval of length data_osc (Harnack applied from both sides)."""
    R = 0.5 * L
    return data_osc * 2.0 * R * r / (R * R - r * r)


@dataclass
class LiouvilleReport:
    boxes: list[float]
    oscillations: list[float]
    sweeps: list[int]
    non_increasing: bool
    tolerance: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def liouville_probe(spec: OperatorSpec, box_sizes=(4.0, 8.0, 16.0), cfg: SolveConfig = HARNACK_CONFIG,
                    h: float = 0.25, boundary=None, radius: float = 1.0,
                    tol: float | None = None) -> LiouvilleReport:
    """Oscillation over B(0, radius) of F[u] = 0 on [-L/2, L/2]^2 for growing L."""
    if spec.drift is not None or spec.potential is not None or spec.h_inf or spec.V_inf:
        raise SpecError("liouville_probe needs h = V = 0")
    boundary = boundary if boundary is not None else angular_pattern()
    center = Disc(0.0, 0.0, radius)
    oscs, sweeps = [], []
    for L in box_sizes:
        grid = build_grid(Rectangle(-L / 2, L / 2, -L / 2, L / 2), h)
        out = _solve(spec, grid, 0.0, boundary, cfg)
        sel = mask_nodes(grid, center)
        vals = out.field.values[sel]
        oscs.append(float(vals.max() - vals.min()))
        sweeps.append(out.sweeps)
        log.info("box L=%g: centre oscillation %.6g", L, oscs[-1])
    # solver tolerance converted to a value tolerance through the slowest decay rate
    tol = tol if tol is not None else 10 * cfg.tol_res * max(box_sizes) ** 2
    mono = all(b <= a + tol for a, b in zip(oscs, oscs[1:]))
    return LiouvilleReport([float(L) for L in box_sizes], oscs, sweeps, mono, tol)
