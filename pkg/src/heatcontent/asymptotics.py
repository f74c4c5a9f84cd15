"""Small-t coefficient fits and power-law exponents for heat curves."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .content import F, H, HeatCurve, TimeGrid, heat_curve, heat_loss
from .estimate import MONTE_CARLO, SIGMAS, Estimate, mc_mean, seed_sequence
from .geometry import Ball, Box, DisjointUnion, Horn, Shape, ShapeError
from .kernel import u_many

SQRT_COEFF = "sqrt_coeff"
H3_COEFF = "h3_coeff"
POWER_EXPONENT = "power_exponent"


@dataclass
class FitResult:
    coefficient: float
    predicted: float
    relative_error: float
    window: tuple
    residual_norm: float
    model: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _rel(c: float, p: float) -> float:
    return abs(c - p) / abs(p) if p != 0 else abs(c - p)


def _window(curve: HeatCurve, window, min_points: int):
    t = curve.times
    if window is None:
        lo, hi = t[0], t[-1]
    else:
        lo, hi = window
        if lo < t[0] * (1 - 1e-12) or hi > t[-1] * (1 + 1e-12) or not lo < hi:
            raise ValueError("fit window must lie inside the curve's time range")
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if sel.sum() < min_points:
        raise ValueError(f"fit window holds {int(sel.sum())} points; at least {min_points} needed")
    return sel, (float(t[sel][0]), float(t[sel][-1]))


def _loss_values(curve: HeatCurve) -> np.ndarray:
    if curve.quantity == F:
        return curve.array
    if not curve.shape.finite_volume:
        raise ShapeError("heat loss needs finite volume")
    return curve.shape.volume - curve.array


def _ols(x: np.ndarray, y: np.ndarray):
    """Least squares of y on [1, x]; returns intercept, slope, residual norm."""
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(coef[1]), float(np.linalg.norm(A @ coef - y))


def fit_perimeter_coefficient(curve: HeatCurve, window=None, min_points: int = 6) -> FitResult:
    """Intercept of F(t)/√t against √t; predicted π^{-1/2} P(D)."""
    shape = curve.shape
    if not shape.finite_volume:
        raise ShapeError("perimeter fit needs a finite-volume shape")
    P = shape.perimeter
    if not math.isfinite(P):
        raise ShapeError("perimeter fit needs a finite perimeter")
    sel, win = _window(curve, window, min_points)
    t = curve.times[sel]
    y = _loss_values(curve)[sel] / np.sqrt(t)
    c, slope, res = _ols(np.sqrt(t), y)
    pred = P / math.sqrt(math.pi)
    return FitResult(c, pred, _rel(c, pred), win, res, SQRT_COEFF, {"slope": slope})


def h3_predicted(a: float, m: int) -> float:
    """-∫_{∂B} (5/32 (Σk)² + 1/16 Σk²) for the radius-a ball (k_i = 1/a)."""
    P = m * math.pi ** (m / 2) / math.gamma(m / 2 + 1) * a ** (m - 1)
    return -P * (5 * (m - 1) ** 2 / 32 + (m - 1) / 16) / a ** 2


def h3_ball_series(a: float, m: int) -> float:
    """t^{3/2} coefficient of H for a ball from the covariogram expansion.

    |B| - |B ∩ (B + z)| = ω_{m-1} ∫_0^{|z|} (a² - s²/4)^{(m-1)/2} ds, whose
    cubic term integrated against the Gaussian gives (m² - 1) P / (12 √π a²).
    """
    P = m * math.pi ** (m / 2) / math.gamma(m / 2 + 1) * a ** (m - 1)
    return (m * m - 1) * P / (12 * math.sqrt(math.pi) * a * a)


def h3_check_ball(a: float, m: int, curve: HeatCurve, window=None, min_points: int = 6) -> FitResult:
    """Fit (H - |D| + π^{-1/2} P √t) / t^{3/2} against √t and compare."""
    shape = curve.shape
    if not isinstance(shape, Ball):
        raise ShapeError("h3 check is defined for balls only")
    if shape.m != m or abs(shape.radius - a) > 1e-12 * a:
        raise ValueError("curve shape does not match (a, m)")
    sel, win = _window(curve, window, min_points)
    t = curve.times[sel]
    lead = shape.perimeter * np.sqrt(t / math.pi)
    y = (lead - _loss_values(curve)[sel]) / t ** 1.5
    c, slope, res = _ols(np.sqrt(t), y)
    pred = h3_predicted(a, m)
    return FitResult(c, pred, _rel(c, pred), win, res, H3_COEFF,
                     {"slope": slope, "series_value": h3_ball_series(a, m)})


def horn_predicted_exponent(m: int, alpha: float) -> float:
    return ((m - 1) * alpha - 1) / (2 * alpha)


def horn_exponent(horn: Horn, grid: TimeGrid, samples: int = 1 << 20, seed=0,
                  method: str = "quadrature") -> FitResult:
    """Log-log slope of H over the grid against ((m-1)α - 1)/(2α)."""
    if not isinstance(horn, Horn):
        raise ShapeError("horn exponent needs a horn")
    m, a = horn.m, horn.alpha
    if not 1 / (2 * (m - 1)) < a < 1 / (m - 1):
        raise ValueError("horn exponent is asserted only for 1/(2(m-1)) < alpha < 1/(m-1)")
    if len(grid) < 2:
        raise ValueError("need at least two times")
    curve = heat_curve(horn, grid, H, "mc" if method == "mc" else "quadrature", samples, seed)
    t = curve.times
    slope, intercept, res = _loglog(t, curve.array)
    pred = horn_predicted_exponent(m, a)
    rel_err = float(np.max(curve.errors / curve.array))
    return FitResult(slope, pred, _rel(slope, pred), (float(t[0]), float(t[-1])), res, POWER_EXPONENT,
                     {"intercept": intercept, "max_relative_error": rel_err, "s": horn.s})


def _loglog(t, v):
    c, s, res = _ols(np.log(t), np.log(v))
    return s, c, res


# ---------------------------------------------------------------------------
# L^p convergence


def _deterministic_u(shape: Shape) -> bool:
    if isinstance(shape, (Ball, Box)):
        return True
    return isinstance(shape, DisjointUnion) and all(isinstance(m, (Ball, Box)) for m in shape.members)


def lp_distance(shape: Shape, p: float, t: float, samples: int = 1 << 20, seed=0,
                method: str = "auto") -> Estimate:
    """‖u_D(·; t) - 1_D‖_p^p.

    For p = 1 this is 2 F_D(t). Otherwise (or with method="mc") it is a Monte
    Carlo average over the bounding box widened by 12 √t on each side, outside
    of which u is below e^-36.
    """
    if not p >= 1:
        raise ValueError("p must be at least 1")
    if not shape.finite_volume:
        raise ShapeError("L^p check needs finite volume")
    if p == 1 and method in ("auto", "identity"):
        return heat_loss(shape, t, samples, seed).scaled(2.0)
    if method not in ("auto", "mc"):
        raise ValueError(f"unknown method {method!r}")
    if not _deterministic_u(shape):
        raise ShapeError("p > 1 is supported for balls, boxes and unions of them")
    lo, hi = shape.bounding_box()
    pad = 12 * math.sqrt(t)
    lo, hi = np.asarray(lo) - pad, np.asarray(hi) + pad
    vol = float(np.prod(hi - lo))

    def draw(rng, k):
        x = lo + (hi - lo) * rng.random((k, shape.m))
        return np.abs(u_many(shape, x, t) - shape.contains(x)) ** p

    mean, se, n = mc_mean(draw, samples, seed)
    return Estimate(vol * mean, SIGMAS * vol * se, MONTE_CARLO, n)


def lp_convergence_check(shape: Shape, p: float, grid: TimeGrid, samples: int = 1 << 20, seed=0,
                         method: str = "auto") -> list[Estimate]:
    """‖u(·; t) - 1_D‖_p^p along the grid (should decrease to 0 as t ↓ 0)."""
    if not p >= 1:
        raise ValueError("p must be at least 1")
    return [lp_distance(shape, p, t, samples, seed_sequence(seed, i), method) for i, t in enumerate(grid)]


def is_decreasing_to_zero(values: list[Estimate]) -> bool:
    """Non-decreasing in t within combined radii (values listed by increasing t)."""
    return all(b.value + b.error_radius >= a.value - a.error_radius for a, b in zip(values, values[1:]))
