"""Pointwise evaluation of F(Du, D2u) + h.Du|Du|^alpha + (V + lambda)|u|^alpha u - f.

F is one of the constant-coefficient kinds ``pucci_plus``, ``pucci_minus`` or
``weighted_laplacian``, always multiplied by the regularised gradient weight
(|p|^2 + eps^2)^(alpha/2). x-dependence lives only in the drift h, the
potential V and the right-hand side f.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import H1Violation, H2Violation, H5Violation, SpecError
from .grid import Grid, ScalarField

KINDS = ("weighted_laplacian", "pucci_plus", "pucci_minus")
KIND_CODES = {k: i for i, k in enumerate(KINDS)}
_DUAL = {"pucci_plus": "pucci_minus", "pucci_minus": "pucci_plus", "weighted_laplacian": "weighted_laplacian"}


@dataclass(frozen=True)
class OperatorSpec:
    """Operator parameters.

    ``drift`` maps (x1, x2) arrays to a pair (h1, h2); ``potential`` maps them to
    V. ``h_inf`` and ``V_inf`` are the declared sup-norms used by the barrier
    constants; the solver measures the norms on the grid instead.
    """

    alpha: float
    a: float
    A: float
    kind: str = "pucci_plus"
    drift: Callable | None = field(default=None, compare=False)
    potential: Callable | None = field(default=None, compare=False)
    h_inf: float = 0.0
    V_inf: float = 0.0

    def __post_init__(self):
        if not (self.alpha > -1 and math.isfinite(self.alpha)):
            raise SpecError(f"alpha must be > -1, got {self.alpha!r}")
        if not (0 < self.a <= self.A and math.isfinite(self.A)):
            raise SpecError(f"ellipticity bounds need 0 < a <= A, got a={self.a!r}, A={self.A!r}")
        if self.kind not in KINDS:
            raise SpecError(f"unknown operator kind {self.kind!r}")
        if self.kind == "weighted_laplacian" and self.a != self.A:
            raise SpecError("weighted_laplacian requires a == A")
        if self.h_inf < 0 or self.V_inf < 0:
            raise SpecError("sup-norms must be nonnegative")

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    @property
    def sign(self) -> str:
        return "-" if self.kind == "pucci_minus" else "+"

    def dual(self) -> "OperatorSpec":
        """Spec of G(p, X) = -F(-p, -X).

        A negative solution psi of F-equation corresponds to the positive
        solution -psi of the G-equation with the same drift and potential.
        """
        return replace(self, kind=_DUAL[self.kind])

    def drift_on(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        if self.drift is None:
            return np.zeros(grid.shape), np.zeros(grid.shape)
        hx, hy = self.drift(grid.X, grid.Y)
        hx = np.where(grid.active, np.broadcast_to(np.asarray(hx, float), grid.shape), 0.0)
        hy = np.where(grid.active, np.broadcast_to(np.asarray(hy, float), grid.shape), 0.0)
        return hx, hy

    def potential_on(self, grid: Grid) -> np.ndarray:
        if self.potential is None:
            return np.zeros(grid.shape)
        V = np.broadcast_to(np.asarray(self.potential(grid.X, grid.Y), float), grid.shape)
        return np.where(grid.active, V, 0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["drift"] = getattr(self.drift, "source", None) if self.drift is not None else None
        d["potential"] = getattr(self.potential, "source", None) if self.potential is not None else None
        return d


@dataclass(frozen=True)
class EvalContext:
    epsilon: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise SpecError("epsilon must be positive")


def sym_eigs(mxx, mxy, myy):
    """Closed-form eigenvalues (larger, smaller) of [[mxx, mxy], [mxy, myy]]."""
    half_tr = 0.5 * (mxx + myy)
    rad = np.sqrt(0.25 * (mxx - myy) * (mxx - myy) + mxy * mxy)
    return half_tr + rad, half_tr - rad


def pucci_entries(mxx, mxy, myy, a, A, kind):
    """Vectorised F(M) for the three kinds, given the entries of M."""
    if kind == "weighted_laplacian" or kind == 0:
        return a * (mxx + myy)
    e1, e2 = sym_eigs(mxx, mxy, myy)
    if kind in ("pucci_plus", 1):
        up, down = A, a
    else:
        up, down = a, A
    return np.where(e1 > 0, up * e1, down * e1) + np.where(e2 > 0, up * e2, down * e2)


def _entries(M):
    M = np.asarray(M, dtype=float)
    return M[..., 0, 0], 0.5 * (M[..., 0, 1] + M[..., 1, 0]), M[..., 1, 1]


def pucci(M, a: float, A: float, sign: str = "+"):
    """Pucci extremal operator of a symmetric 2x2 matrix.

    sign '+': A * (sum of positive eigenvalues) + a * (sum of negative ones);
    sign '-': the same with a and A swapped.
    """
    if not 0 < a <= A:
        raise SpecError("pucci needs 0 < a <= A")
    kind = "pucci_plus" if sign == "+" else "pucci_minus"
    out = pucci_entries(*_entries(M), a, A, kind)
    return float(out) if np.ndim(out) == 0 else out


def grad_weight(p, alpha: float, epsilon: float):
    """(|p|^2 + eps^2)^(alpha/2); with ``epsilon=0`` this is the bare |p|^alpha."""
    p = np.asarray(p, dtype=float)
    if alpha == 0:
        return 1.0 if p.ndim == 1 else np.ones(p.shape[:-1])
    s = np.sum(p * p, axis=-1) + epsilon * epsilon
    out = s ** (0.5 * alpha)
    return float(out) if np.ndim(out) == 0 else out


def principal_part(spec: OperatorSpec, p, M, epsilon: float):
    """grad_weight(p) * F(M); ``epsilon=0`` gives the unregularised operator."""
    return grad_weight(p, spec.alpha, epsilon) * pucci_entries(*_entries(M), spec.a, spec.A, spec.kind)


def signed_power(u, alpha):
    """|u|^alpha u, finite at u = 0 for every alpha > -1."""
    return np.sign(u) * np.abs(u) ** (1.0 + alpha)


def eval_operator(spec: OperatorSpec, ctx: EvalContext, x, p, M, u_val, f_val) -> float:
    w = grad_weight(p, spec.alpha, ctx.epsilon)
    value = w * pucci_entries(*_entries(M), spec.a, spec.A, spec.kind)
    if spec.drift is not None:
        hx, hy = spec.drift(np.asarray(x[0], float), np.asarray(x[1], float))
        value += (float(hx) * p[0] + float(hy) * p[1]) * w
    V = float(spec.potential(np.asarray(x[0], float), np.asarray(x[1], float))) if spec.potential is not None else 0.0
    value += (V + ctx.lam) * signed_power(float(u_val), spec.alpha)
    return float(value - f_val)


def discrete_derivatives(field: ScalarField, node: tuple[int, int]):
    """Centred gradient and 9-point Hessian at an interior node ``(iy, ix)``."""
    iy, ix = node
    if not field.grid.interior[iy, ix]:
        raise SpecError(f"node {node} is not interior")
    u, h = field.values, field.grid.h
    p = np.array([(u[iy, ix + 1] - u[iy, ix - 1]) / (2 * h), (u[iy + 1, ix] - u[iy - 1, ix]) / (2 * h)])
    mxx = (u[iy, ix + 1] - 2 * u[iy, ix] + u[iy, ix - 1]) / (h * h)
    myy = (u[iy + 1, ix] - 2 * u[iy, ix] + u[iy - 1, ix]) / (h * h)
    mxy = (u[iy + 1, ix + 1] - u[iy + 1, ix - 1] - u[iy - 1, ix + 1] + u[iy - 1, ix - 1]) / (4 * h * h)
    return p, np.array([[mxx, mxy], [mxy, myy]])


def residual(spec: OperatorSpec, ctx: EvalContext, field: ScalarField, rhs: ScalarField) -> ScalarField:
    """Pointwise defect at interior nodes; zero elsewhere."""
    from . import backend

    if rhs.grid is not field.grid and rhs.grid.shape != field.grid.shape:
        raise SpecError("field and rhs must live on the same grid")
    out = backend.residual_array(spec, field.grid, field.values, rhs.values, ctx.lam, ctx.epsilon)
    return ScalarField(field.grid, out)


# -- hypothesis validators -------------------------------------------------


@dataclass
class HypothesisReport:
    hypothesis: str
    kind: str
    alpha: float
    samples: int
    max_defect: float
    tolerance: float
    passed: bool
    checked: bool = True
    witness: dict | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _random_sym(rng, n, scale=3.0):
    mxx, myy = rng.normal(0, scale, n), rng.normal(0, scale, n)
    mxy = rng.normal(0, scale, n)
    M = np.empty((n, 2, 2))
    M[:, 0, 0], M[:, 1, 1], M[:, 0, 1], M[:, 1, 0] = mxx, myy, mxy, mxy
    return M


def _random_p(rng, n):
    direction = rng.normal(size=(n, 2))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * np.exp(rng.uniform(np.log(0.1), np.log(10.0), n))[:, None]


def h1_scale_factor(spec: OperatorSpec, p, X, t: float, mu: float) -> float:
    """Observed F(tp, mu X) / F(p, X) with the unregularised weight."""
    base = principal_part(spec, p, X, 0.0)
    scaled = principal_part(spec, t * np.asarray(p, float), mu * np.asarray(X, float), 0.0)
    return float(scaled / base)


def check_h1(spec: OperatorSpec, samples: int = 1000, seed: int = 0, tol: float = 1e-12) -> HypothesisReport:
    """Sample F(tp, mu X) = |t|^alpha mu F(p, X) at random (p, X, t, mu)."""
    if samples < 1:
        raise SpecError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    p = _random_p(rng, samples)
    X = _random_sym(rng, samples)
    t = rng.uniform(0.2, 5.0, samples) * rng.choice([-1.0, 1.0], samples)
    mu = rng.uniform(0.0, 5.0, samples)
    lhs = principal_part(spec, t[:, None] * p, mu[:, None, None] * X, 0.0)
    factor = np.abs(t) ** spec.alpha * mu
    rhs = factor * principal_part(spec, p, X, 0.0)
    scale = factor * np.linalg.norm(p, axis=1) ** spec.alpha * spec.A * np.linalg.norm(X, axis=(1, 2))
    defect = np.abs(lhs - rhs) / np.maximum(scale, np.finfo(float).tiny)
    i = int(np.argmax(defect))
    witness = {"p": p[i].tolist(), "X": X[i].tolist(), "t": float(t[i]), "mu": float(mu[i])}
    report = HypothesisReport("H1", spec.kind, spec.alpha, samples, float(defect[i]), tol,
                              bool(defect[i] <= tol), witness=witness)
    if not report.passed:
        raise H1Violation(f"(H1) homogeneity defect {defect[i]:.3e} > {tol:g}", witness)
    return report


def check_h2(spec: OperatorSpec, samples: int = 1000, seed: int = 0, tol: float = 1e-10) -> HypothesisReport:
    """Sample a|p|^alpha tr N <= F(p, M + N) - F(p, M) <= A|p|^alpha tr N for N >= 0."""
    if samples < 1:
        raise SpecError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    p = _random_p(rng, samples)
    M = _random_sym(rng, samples)
    G = rng.normal(0, 1.5, (samples, 2, 2))
    N = np.einsum("nki,nkj->nij", G, G)
    diff = principal_part(spec, p, M + N, 0.0) - principal_part(spec, p, M, 0.0)
    w = np.linalg.norm(p, axis=1) ** spec.alpha
    trN = np.trace(N, axis1=1, axis2=2)
    lower, upper = spec.a * w * trN, spec.A * w * trN
    defect = np.maximum(np.maximum(lower - diff, diff - upper), 0.0)
    i = int(np.argmax(defect))
    witness = {"p": p[i].tolist(), "M": M[i].tolist(), "N": N[i].tolist(),
               "difference": float(diff[i]), "bounds": [float(lower[i]), float(upper[i])]}
    report = HypothesisReport("H2", spec.kind, spec.alpha, samples, float(defect[i]), tol,
                              bool(defect[i] <= tol), witness=witness)
    if not report.passed:
        raise H2Violation(f"(H2) ellipticity defect {defect[i]:.3e} > {tol:g}", witness)
    return report


def check_h5(drift: Callable, alpha: float, samples: int = 1000, seed: int = 0,
             box=(-1.0, 1.0, -1.0, 1.0), tol: float = 1e-12) -> HypothesisReport:
    """Sample the monotonicity (h(x) - h(y)).(x - y) <= 0 required when alpha > 0.

    For alpha <= 0 the requirement is Hoelder continuity of order 1 + alpha,
    which sampling cannot certify; the report is returned unchecked.
    """
    if alpha <= 0:
        return HypothesisReport("H5", "drift", alpha, 0, 0.0, tol, True, checked=False,
                                note="alpha <= 0: Hoelder condition accepted on declaration")
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = box
    pts = rng.uniform([x0, y0], [x1, y1], size=(2, samples, 2))
    hx1, hy1 = drift(pts[0, :, 0], pts[0, :, 1])
    hx2, hy2 = drift(pts[1, :, 0], pts[1, :, 1])
    hdiff = np.stack(np.broadcast_arrays(np.asarray(hx1, float) - hx2, np.asarray(hy1, float) - hy2), axis=-1)
    value = np.sum(hdiff * (pts[0] - pts[1]), axis=-1)
    i = int(np.argmax(value))
    witness = {"x": pts[0, i].tolist(), "y": pts[1, i].tolist(), "inner_product": float(value[i])}
    report = HypothesisReport("H5", "drift", alpha, samples, float(max(value[i], 0.0)), tol,
                              bool(value[i] <= tol), witness=witness)
    if not report.passed:
        raise H5Violation(f"(H5) monotonicity fails: {value[i]:.3e} > {tol:g}", witness)
    return report
