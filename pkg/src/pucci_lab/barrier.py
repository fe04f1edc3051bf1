"""Explicit barrier functions and pointwise checks of their differential inequalities.

The ellipse barrier is

    v = (exp(-gamma sigma^2) - exp(-gamma)) / (exp(-gamma/4) - exp(-gamma))

on the part of an ellipse cut off by a line at half the semi-axis. Every
check evaluates closed-form derivatives at low-discrepancy sample points and
reports the smallest margin; nothing here touches a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from .errors import OutsideDomain, SpecError
from .operator import pucci_entries

SQ3 = math.sqrt(3.0)
B_SLOPE = 6.0 * math.sqrt(11.0) / 5.0
C_SLOPE = (SQ3 + 12.0) / 2.0


@dataclass(frozen=True)
class BarrierSpec:
    """Cut ellipse barrier.

    ``b`` is the semi-axis along ``axis`` (the direction normal to the cut),
    ``c`` the other one. The cut region is side * (x[axis] - center[axis]) > b/2
    inside the ellipse.
    """

    center: tuple[float, float]
    b: float
    c: float
    gamma: float
    axis: int = 0
    side: int = 1

    def __post_init__(self):
        if not (self.b > 0 and self.c > 0 and self.gamma > 0):
            raise SpecError("b, c and gamma must be positive")
        if self.axis not in (0, 1) or self.side not in (1, -1):
            raise SpecError("axis must be 0 or 1 and side must be +1 or -1")

    @property
    def semi_axes(self) -> tuple[float, float]:
        """Semi-axes along x1 and x2."""
        return (self.b, self.c) if self.axis == 0 else (self.c, self.b)

    def with_gamma(self, gamma: float) -> "BarrierSpec":
        return BarrierSpec(self.center, self.b, self.c, gamma, self.axis, self.side)

    def mirrored(self) -> "BarrierSpec":
        """Reflection through the line x[axis] = center[axis]."""
        return BarrierSpec(self.center, self.b, self.c, self.gamma, self.axis, -self.side)

    def scaled(self, rho: float) -> "BarrierSpec":
        """The same barrier on the ellipse dilated by rho about the origin."""
        return BarrierSpec((rho * self.center[0], rho * self.center[1]), rho * self.b, rho * self.c,
                           self.gamma, self.axis, self.side)

    def sigma2(self, x1, x2):
        s1, s2 = self.semi_axes
        return ((np.asarray(x1) - self.center[0]) / s1) ** 2 + ((np.asarray(x2) - self.center[1]) / s2) ** 2

    def in_cut(self, x1, x2, tol: float = 1e-12):
        along = (x1, x2)[self.axis] - self.center[self.axis]
        return (self.sigma2(x1, x2) <= 1 + tol) & (self.side * along >= 0.5 * self.b - tol * self.b)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "b": self.b, "c": self.c, "gamma": self.gamma,
                "axis": self.axis, "side": self.side}


# ellipse presets at unit scale; gamma is filled in by ``preset``
_PRESETS = {
    "unit": ((0.0, 0.0), 1.0, 1.0, 0, 1),
    "E1": ((-2.5, SQ3 / 4), 3.0, 0.5, 0, 1),
    "E2": ((2.5, SQ3 / 4), 3.0, 0.5, 0, -1),
    "E3": ((0.0, 1.0 + SQ3 / 2), 2.0 + SQ3 / 2, 0.5, 1, -1),
}
PRESETS = tuple(_PRESETS)


def preset(name: str, gamma: float | None = None, a: float = 1.0, A: float = 1.0, alpha: float = 0.0,
           h_inf: float = 0.0, V_inf: float = 0.0) -> BarrierSpec:
    """Named geometry; gamma defaults to ``gamma_constant`` for the given operator data."""
    try:
        center, b, c, axis, side = _PRESETS[name]
    except KeyError:
        raise SpecError(f"unknown barrier preset {name!r}; choose from {PRESETS}") from None
    if gamma is None:
        gamma = gamma_constant(a, A, alpha, b, c, h_inf, V_inf)
    return BarrierSpec(center, b, c, gamma, axis, side)


def gamma_constant(a: float, A: float, alpha: float, b: float, c: float,
                   h_inf: float = 0.0, V_inf: float = 0.0) -> float:
    """Exponent making the cut-ellipse barrier a strict subsolution for the whole class."""
    if not (0 < a <= A and alpha > -1 and b > 0 and c > 0 and h_inf >= 0 and V_inf >= 0):
        raise SpecError("invalid arguments to gamma_constant")
    k = 1.0 / b**2 + 1.0 / c**2
    m = min(b ** (-alpha), 2.0**alpha * k ** (alpha / 2))
    M = 2.0 ** (1 + alpha) * k ** ((1 + alpha) / 2)
    return max(4.0 * (A + a) / a * (1.0 + b**2 / c**2),
               4.0 * h_inf * M * b**2 / (m * a),
               (4.0 * V_inf * b**2 / (a * m)) ** (1.0 / (2.0 + alpha)))


def _vtilde_ratio(spec: BarrierSpec, s2):
    """(v, vtilde) written relative to exp(-gamma/4) to avoid underflow."""
    g = spec.gamma
    denom = -math.expm1(-0.75 * g)  # 1 - exp(-3 gamma / 4)
    vt = np.exp(-g * (s2 - 0.25)) / denom
    v = (np.exp(-g * (s2 - 0.25)) - math.exp(-0.75 * g)) / denom
    return v, vt


def barrier_arrays(spec: BarrierSpec, x1, x2, relative: bool = False):
    """Vectorised v, gradient (2, n) and Hessian entries (hxx, hxy, hyy).

    With ``relative=True`` everything is divided by vtilde = exp(-gamma sigma^2)/(...),
    which keeps the derivatives of order one for large gamma.
    """
    x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
    s1, s2_ = spec.semi_axes
    bx = (x1 - spec.center[0]) / s1**2
    by = (x2 - spec.center[1]) / s2_**2
    v, vt = _vtilde_ratio(spec, spec.sigma2(x1, x2))
    if relative:
        # v / vtilde = 1 - exp(-gamma (1 - sigma^2))
        v, vt = -np.expm1(-spec.gamma * (1.0 - spec.sigma2(x1, x2))), np.ones_like(vt)
    g2 = 2.0 * spec.gamma
    grad = np.stack([-g2 * bx * vt, -g2 * by * vt])
    hxx = g2 * (g2 * bx * bx - 1.0 / s1**2) * vt
    hxy = g2 * (g2 * bx * by) * vt
    hyy = g2 * (g2 * by * by - 1.0 / s2_**2) * vt
    return v, grad, (hxx, hxy, hyy)


def barrier_eval(spec: BarrierSpec, x) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of the barrier at a point of the closed ellipse."""
    x1, x2 = float(x[0]), float(x[1])
    if spec.sigma2(x1, x2) > 1.0 + 1e-12:
        raise OutsideDomain(f"point {x} lies outside the ellipse")
    v, grad, (hxx, hxy, hyy) = barrier_arrays(spec, x1, x2)
    return float(v), np.array(grad, float), np.array([[hxx, hxy], [hxy, hyy]], float)


# -- sampling ---------------------------------------------------------------


def sobol(n: int, seed: int, d: int = 2) -> np.ndarray:
    """n scrambled Sobol points in [0, 1)^d (n is rounded up to a power of two)."""
    m = max(1, math.ceil(math.log2(max(n, 2))))
    return qmc.Sobol(d=d, scramble=True, seed=seed).random_base2(m)[:n]


def sample_cut(spec: BarrierSpec, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """n low-discrepancy points covering the closed cut region."""
    u = sobol(n, seed)
    s = 0.5 + 0.5 * u[:, 0]  # normalised coordinate along the cut axis, in [1/2, 1]
    t = (2.0 * u[:, 1] - 1.0) * np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    along = spec.center[spec.axis] + spec.side * spec.b * s
    across = spec.center[1 - spec.axis] + spec.c * t
    return (along, across) if spec.axis == 0 else (across, along)


def sample_region(inside, box, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """n low-discrepancy points of the box (x0, x1, y0, y1) satisfying ``inside``."""
    x0, x1, y0, y1 = box
    xs, ys, draw = [], [], 0
    count = 0
    while count < n:
        u = sobol(max(4 * n, 1024), seed + draw)
        px, py = x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]
        keep = inside(px, py)
        xs.append(px[keep])
        ys.append(py[keep])
        count += int(keep.sum())
        draw += 1
        if draw > 50:
            raise SpecError("region is too small to sample")
    return np.concatenate(xs)[:n], np.concatenate(ys)[:n]


# -- Lemma-1 type inequality ------------------------------------------------


@dataclass
class BarrierReport:
    min_residual: float
    passed: bool
    samples: int
    seed: int
    gamma: float
    gamma_formula: float
    worst_point: tuple[float, float]

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["worst_point"] = list(self.worst_point)
        return d

    def __iter__(self):
        # allows ``min_residual, ok = verify_lemma1(...)``
        return iter((self.min_residual, self.passed))


def lemma1_lhs(alpha: float, a: float, A: float, h_inf: float, V_inf: float, spec: BarrierSpec, x1, x2):
    """|Dv|^alpha M^-(D2v) - |h| |Dv|^(1+alpha) - |V| v^(1+alpha) at the given points.

    Every term is homogeneous of degree 1 + alpha in vtilde, so the left side is
    returned divided by vtilde^(1+alpha); the sign is unchanged and large gamma
    does not underflow.
    """
    v, grad, hess = barrier_arrays(spec, x1, x2, relative=True)
    gnorm = np.hypot(grad[0], grad[1])
    worst = pucci_entries(*hess, a, A, "pucci_minus")
    return gnorm**alpha * worst - h_inf * gnorm ** (1 + alpha) - V_inf * np.clip(v, 0, None) ** (1 + alpha)


def verify_lemma1(op_spec, b_spec: BarrierSpec, n_samples: int = 100_000, seed: int = 0,
                  h_inf: float | None = None, V_inf: float | None = None) -> BarrierReport:
    """Strict positivity of the worst-case left side on the cut region.

    The sup-norms default to the declared ``op_spec.h_inf`` and ``op_spec.V_inf``.
    """
    h_inf = op_spec.h_inf if h_inf is None else h_inf
    V_inf = op_spec.V_inf if V_inf is None else V_inf
    x1, x2 = sample_cut(b_spec, n_samples, seed)
    lhs = lemma1_lhs(op_spec.alpha, op_spec.a, op_spec.A, h_inf, V_inf, b_spec, x1, x2)
    k = int(np.argmin(lhs))
    g_formula = gamma_constant(op_spec.a, op_spec.A, op_spec.alpha, b_spec.b, b_spec.c, h_inf, V_inf)
    lo = float(lhs[k])
    return BarrierReport(lo, bool(lo > 0), int(lhs.size), seed, b_spec.gamma, g_formula,
                         (float(x1[k]), float(x2[k])))


# -- strip supersolution ----------------------------------------------------


@dataclass
class StripReport:
    C: float
    passed: bool
    samples: int
    closed_form_min: float
    theta_range: tuple[float, float]

    def __iter__(self):
        return iter((self.C, self.passed))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["theta_range"] = list(self.theta_range)
        return d


def strip_profile(x1, M: float, gamma_exp: float):
    """u = sin^g(theta) with theta = x1 pi / (4M) + pi/8, with u' and u''."""
    k = math.pi / (4.0 * M)
    th = k * np.asarray(x1, float) + math.pi / 8
    s, c = np.sin(th), np.cos(th)
    g = gamma_exp
    u = s**g
    du = g * k * s ** (g - 1) * c
    d2u = g * k * k * s ** (g - 2) * ((g - 1) * c * c - s * s)
    return u, du, d2u


def strip_constant_closed_form(alpha: float, a: float, gamma_exp: float, theta):
    """Pointwise bound on C as a function of theta alone."""
    g = gamma_exp
    s, c = np.sin(theta), np.cos(theta)
    return a * g ** (1 + alpha) * (math.pi / 4) ** (2 + alpha) * c**alpha * (1 - g + g * s * s) / s ** (2 + alpha)


def verify_strip_supersolution(alpha: float, a: float, A: float, M: float, gamma_exp: float,
                               n_samples: int = 100_000, seed: int = 0) -> StripReport:
    """Largest C with F[u] + (C / M^(2+alpha)) u^(1+alpha) <= 0 at every sample of (0, M).

    F is replaced by its upper bound over the class: |u'|^alpha (A (u'')^+ - a (u'')^-).
    """
    if not 0 < gamma_exp < 1:
        raise SpecError("gamma_exp must lie in (0, 1)")
    if not (0 < a <= A and alpha > -1 and M > 0):
        raise SpecError("invalid operator data")
    t = sobol(n_samples, seed, d=1)[:, 0]
    x1 = M * (1e-9 + (1 - 2e-9) * t)
    u, du, d2u = strip_profile(x1, M, gamma_exp)
    F_upper = np.abs(du) ** alpha * np.where(d2u > 0, A * d2u, a * d2u)
    with np.errstate(divide="ignore"):
        bound = -F_upper * M ** (2 + alpha) / u ** (1 + alpha)
    C = float(bound.min())
    th = np.linspace(math.pi / 8, 3 * math.pi / 8, 2001)
    cf = float(strip_constant_closed_form(alpha, a, gamma_exp, th).min())
    return StripReport(C, bool(C > 0), int(x1.size), cf, (math.pi / 8, 3 * math.pi / 8))


# -- sector geometry --------------------------------------------------------


def B1(x1, x2):
    return -np.stack([(x1 + 2.5) / 9.0, 4.0 * (x2 - SQ3 / 4)])


def B2(x1, x2):
    return -np.stack([(x1 - 2.5) / 9.0, 4.0 * (x2 - SQ3 / 4)])


def B3(x1, x2):
    return -np.stack([4.0 * x1, (x2 - 1.0 - SQ3 / 2) / (2.0 + SQ3 / 2) ** 2])


def Cvec(x1, x2, rho0: float = 1.0):
    return np.stack([np.asarray(x1, float), np.asarray(x2, float) + 3.0 * rho0])


def in_E12(x1, x2):
    e1 = (x1 + 2.5) ** 2 / 9.0 + 4.0 * (x2 - SQ3 / 4) ** 2 <= 1.0
    e2 = (x1 - 2.5) ** 2 / 9.0 + 4.0 * (x2 - SQ3 / 4) ** 2 <= 1.0
    return e1 & e2 & (x1 >= -1.0) & (x1 <= 1.0)


def in_E3(x1, x2):
    return (4.0 * x1**2 + ((x2 - 1.0 - SQ3 / 2) / (2.0 + SQ3 / 2)) ** 2 <= 1.0) & (x2 <= SQ3 / 4)


def _cos(u, v):
    return np.sum(u * v, axis=0) / (np.linalg.norm(u, axis=0) * np.linalg.norm(v, axis=0))


@dataclass
class SectorReport:
    delta: float
    passed: bool
    min_cos: float
    min_cos_E12: float
    min_cos_E3: float
    b_slope_max: float
    c_slope_min: float
    b_slope_quoted: float = B_SLOPE
    c_slope_quoted: float = C_SLOPE
    samples: int = 0
    margin: float = 1e-3

    def __iter__(self):
        return iter((self.delta, self.passed))

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_sectors(n_samples: int = 100_000, seed: int = 0, margin: float = 1e-3) -> SectorReport:
    """Angle between the barrier gradients B_i x and the power-barrier direction Cx.

    delta = sqrt(1 + min cos), so that <B_i x, Cx> >= (-1 + delta^2)|B_i x||Cx|.
    Also measures the extremal slopes of the two sectors on E1 n E2.
    """
    x1, x2 = sample_region(in_E12, (-0.5, 0.5, -0.07, 0.94), n_samples, seed)
    # the extremal slopes sit on the boundary: the two corners on x2 = sqrt(3)/4 and
    # the top and bottom points on x1 = 0; include them exactly
    d = math.sqrt(11.0) / 12.0
    x1 = np.concatenate([x1, [-0.5, 0.5, 0.0, 0.0]])
    x2 = np.concatenate([x2, [SQ3 / 4, SQ3 / 4, SQ3 / 4 + d, SQ3 / 4 - d]])
    cvec = Cvec(x1, x2)
    b1, b2 = B1(x1, x2), B2(x1, x2)
    cos12 = float(min(_cos(b1, cvec).min(), _cos(b2, cvec).min()))
    bs = np.concatenate([np.abs(b1[1]) / np.abs(b1[0]), np.abs(b2[1]) / np.abs(b2[0])])
    with np.errstate(divide="ignore"):
        cs = cvec[1] / np.abs(cvec[0])
    # refine the Cx slope along the elliptic arcs near the two tips
    arc = lambda t: (SQ3 / 4 + 3.0 + 0.5 * math.sin(t)) / (3.0 * math.cos(t) - 2.5)
    tip = minimize_scalar(arc, bounds=(-0.6, 0.0), method="bounded", options={"xatol": 1e-12})
    c_min = min(float(cs.min()), float(tip.fun))
    y1, y2 = sample_region(in_E3, (-0.5, 0.5, -1.0, SQ3 / 4), n_samples, seed + 1000)
    cos3 = float(_cos(B3(y1, y2), Cvec(y1, y2)).min())
    min_cos = min(cos12, cos3)
    delta = math.sqrt(max(0.0, 1.0 + min_cos))
    return SectorReport(delta, bool(min_cos > -1.0 + margin), min_cos, cos12, cos3,
                        float(bs.max()), c_min, samples=int(x1.size + y1.size), margin=margin)


# -- power barrier ----------------------------------------------------------


@dataclass(frozen=True)
class PowerBarrierSpec:
    C1: float
    q: float
    anchor: tuple[float, float] = (0.0, -3.0)

    def __post_init__(self):
        if not (self.C1 > 0 and self.q > 1):
            raise SpecError("PowerBarrierSpec needs C1 > 0 and q > 1")

    @staticmethod
    def exponent(alpha: float) -> float:
        return (alpha + 2.0) / (alpha + 1.0)

    @classmethod
    def for_data(cls, alpha: float, a: float, delta: float, f_inf: float = 1.0, rho0: float = 1.0):
        q = cls.exponent(alpha)
        C1 = (f_inf * 2.0 ** (abs(alpha - 2) / 2 + 1) / (delta**alpha * a * q ** (2 + alpha))) ** (1 / (1 + alpha))
        return cls(C1, q, (0.0, -3.0 * rho0))

    def arrays(self, x1, x2):
        """w, gradient (2, n) and Hessian entries."""
        c1 = np.asarray(x1, float) - self.anchor[0]
        c2 = np.asarray(x2, float) - self.anchor[1]
        r2 = c1 * c1 + c2 * c2
        r = np.sqrt(r2)
        q = self.q
        w = self.C1 * r**q
        grad = self.C1 * q * r ** (q - 2) * np.stack([c1, c2])
        pref = self.C1 * q * r ** (q - 4)
        hess = (pref * ((q - 2) * c1 * c1 + r2), pref * (q - 2) * c1 * c2, pref * ((q - 2) * c2 * c2 + r2))
        return w, grad, hess


def power_rho0(alpha: float, a: float, h_inf: float, delta: float) -> float:
    """Radius prescribed for the power barrier: min(1, 2^(-|alpha-2|/2-alpha-1) delta^alpha a q / |h|)."""
    q = PowerBarrierSpec.exponent(alpha)
    if h_inf == 0:
        return 1.0
    return min(1.0, 2.0 ** (-abs(alpha - 2) / 2 - alpha - 1) * delta**alpha * a * q / h_inf)


def power_rho_limit(alpha: float, a: float, h_inf: float, delta: float) -> float:
    """Largest rho-tilde at which the power-barrier inequality holds (|f| = 1)."""
    q = PowerBarrierSpec.exponent(alpha)
    return math.inf if h_inf == 0 else delta**alpha * a * q / (h_inf * 2.0 ** (alpha + 1 + abs(alpha - 2) / 2))


@dataclass
class PowerReport:
    passed: bool
    min_margin: float
    rho0: float
    rho_tilde_max: float
    rho_tilde_limit: float
    C1: float
    q: float
    samples: int
    worst_point: tuple[float, float] = field(default=(math.nan, math.nan))

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["worst_point"] = list(self.worst_point)
        return d


def verify_lem1_power(alpha: float, a: float, h_inf: float, delta: float, n_samples: int = 100_000,
                      seed: int = 0, rho0: float | None = None) -> PowerReport:
    """delta^alpha 2^(-|alpha-2|/2)|Dw|^alpha M^-(D2w) - |h| 2^alpha |Dw|^(1+alpha) >= 1 on rho0 E3.

    |f| is normalised to 1 and rho0 defaults to ``power_rho0``.
    """
    if not (0 < delta <= 1 and a > 0 and h_inf >= 0 and alpha > -1):
        raise SpecError("invalid arguments to verify_lem1_power")
    rho0 = power_rho0(alpha, a, h_inf, delta) if rho0 is None else rho0
    if not 0 < rho0 <= 1:
        raise SpecError("rho0 must lie in (0, 1]")
    spec = PowerBarrierSpec.for_data(alpha, a, delta, 1.0, rho0)
    e3 = preset("E3", gamma=1.0).scaled(rho0)
    x1, x2 = sample_cut(e3, n_samples, seed)
    _, grad, hess = spec.arrays(x1, x2)
    gnorm = np.hypot(grad[0], grad[1])
    # both Hessian eigenvalues are positive, so only a enters M^-
    mminus = pucci_entries(*hess, a, a, "pucci_minus")
    lhs = (delta**alpha * 2.0 ** (-abs(alpha - 2) / 2) * gnorm**alpha * mminus
           - h_inf * 2.0**alpha * gnorm ** (1 + alpha))
    margin = lhs - 1.0
    k = int(np.argmin(margin))
    rt = np.hypot(x1 - spec.anchor[0], x2 - spec.anchor[1])
    # tolerance for rounding in the exact-equality case h = 0
    ok = bool(margin[k] >= -1e-12)
    return PowerReport(ok, float(margin[k]), rho0, float(rt.max()),
                       power_rho_limit(alpha, a, h_inf, delta), spec.C1, spec.q, int(x1.size),
                       (float(x1[k]), float(x2[k])))
