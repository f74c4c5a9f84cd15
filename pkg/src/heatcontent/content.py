"""Heat content H_D(t) and heat loss F_D(t) estimators."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .estimate import MONTE_CARLO, QUADRATURE, SIGMAS, Estimate, mc_mean, seed_sequence
from .geometry import (Ball, Box, DisjointUnion, Horn, Shape, ShapeError,
                       ball_covariogram_deficit, ball_intersection_volume,
                       omega, shape_to_dict, _horn_stratified)
from .kernel import _TAIL, one_minus_u_interval, shell_density, u_interval
from .quadrature import gauss_legendre_panels, quad

H = "H"
F = "F"


# ---------------------------------------------------------------------------
# Time grids and curves


@dataclass(frozen=True)
class TimeGrid:
    times: tuple
    spacing: str = "explicit"

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise ValueError("time grid is empty")
        if any(not t > 0 for t in times):
            raise ValueError("times must be positive")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        if self.spacing not in ("log", "linear", "explicit"):
            raise ValueError(f"unknown spacing {self.spacing!r}")
        object.__setattr__(self, "times", times)

    @classmethod
    def log(cls, tmin: float, tmax: float, points: int) -> "TimeGrid":
        return cls(tuple(np.geomspace(tmin, tmax, points)), "log")

    @classmethod
    def linear(cls, tmin: float, tmax: float, points: int) -> "TimeGrid":
        return cls(tuple(np.linspace(tmin, tmax, points)), "linear")

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(self.times)


@dataclass
class HeatCurve:
    shape: Shape
    grid: TimeGrid
    values: list
    quantity: str = H
    manifest: dict = field(default_factory=dict)

    CSV_HEADER = ("t", "value", "error_radius", "method", "samples")

    def __post_init__(self):
        if self.quantity not in (H, F):
            raise ValueError("quantity must be 'H' or 'F'")
        if len(self.values) != len(self.grid):
            raise ValueError("one estimate per grid time is required")

    @property
    def times(self) -> np.ndarray:
        return np.array(self.grid.times)

    @property
    def array(self) -> np.ndarray:
        return np.array([e.value for e in self.values])

    @property
    def errors(self) -> np.ndarray:
        return np.array([e.error_radius for e in self.values])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for t, e in zip(self.grid.times, self.values):
            w.writerow([_fmt(t), _fmt(e.value), _fmt(e.error_radius), e.method, e.samples])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "shape": shape_to_dict(self.shape),
            "quantity": self.quantity,
            "spacing": self.grid.spacing,
            "rows": [dict(t=t, **e.to_dict()) for t, e in zip(self.grid.times, self.values)],
            "manifest": self.manifest,
        }
        return json.dumps(doc, indent=2, allow_nan=True)

    @classmethod
    def from_csv(cls, text: str, shape: Shape, quantity: str = H) -> "HeatCurve":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != cls.CSV_HEADER:
            raise ValueError("unexpected curve CSV header")
        times, values = [], []
        for row in rows[1:]:
            times.append(float(row[0]))
            values.append(Estimate(float(row[1]), float(row[2]), row[3], int(row[4])))
        return cls(shape, TimeGrid(tuple(times)), values, quantity)


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# Intervals and boxes


def interval_heat_loss(L: float, t: float) -> Estimate:
    """F for (0, L) in R^1 as ∫_0^L (1 - u) dx by adaptive quadrature."""
    sq = math.sqrt(t)
    f = lambda x: one_minus_u_interval(0.0, L, x, t)
    pts = sorted({p for p in (_TAIL * sq, L - _TAIL * sq, L / 2) if 0 < p < L})
    res = quad(f, 0.0, L, epsabs=1e-15, epsrel=1e-13, points=pts)
    return Estimate(res.value, res.error, QUADRATURE)


def _box_combine(lengths, losses):
    """F and its radius for a product set from per-axis losses.

    F_k = A_{k-1} f_k + F_{k-1} (L_k - f_k) with A_k the running volume,
    which keeps every term non-negative.
    """
    A, Fv, err = 1.0, 0.0, 0.0
    for L, est in zip(lengths, losses):
        f, e = est.value, est.error_radius
        err = A * e + err * L + Fv * e
        Fv = A * f + Fv * (L - f)
        A *= L
    return Fv, err


def heat_loss_exact_product(box: Box, t: float) -> Estimate:
    if not isinstance(box, Box):
        raise ShapeError("product path applies to boxes only")
    losses = [interval_heat_loss(L, t) for L in box.lengths]
    Fv, err = _box_combine(box.lengths, losses)
    return Estimate(Fv, err, QUADRATURE)


def heat_content_exact_product(box: Box, t: float) -> Estimate:
    """H for a box as the product of one-dimensional heat contents."""
    if not isinstance(box, Box):
        raise ShapeError("product path applies to boxes only")
    _check_t(t)
    losses = [interval_heat_loss(L, t) for L in box.lengths]
    Hv = 1.0
    upper = 1.0
    for L, est in zip(box.lengths, losses):
        Hv *= L - est.value
        upper *= L - est.value + est.error_radius
    return Estimate(Hv, upper - Hv, QUADRATURE)


def interval_preunkert_loss(L: float, t: float) -> Estimate:
    """∫ over R \\ (0, L) of u_(0,L), which also equals F_(0,L)."""
    sq = math.sqrt(t)
    f = lambda x: u_interval(0.0, L, x, t)
    res = quad(f, L, L + _TAIL * sq, epsabs=1e-16, epsrel=1e-13, points=[L + 4 * sq])
    return Estimate(2 * res.value, 2 * res.error, QUADRATURE)


def heat_loss_preunkert(box: Box, t: float) -> Estimate:
    """F via the cross integral of the kernel over complement x set."""
    if not isinstance(box, Box):
        raise ShapeError("Preunkert path is implemented for boxes only")
    _check_t(t)
    Fv, err = _box_combine(box.lengths, [interval_preunkert_loss(L, t) for L in box.lengths])
    return Estimate(Fv, err, QUADRATURE)


def l2_curve_content(a: float, b: float, t: float) -> Estimate:
    """∫_R u_(a,b)(x; t/2)^2 dx, which equals H_(a,b)(t)."""
    sq = math.sqrt(t)
    f = lambda x: u_interval(a, b, x, t / 2) ** 2
    pts = sorted({e + k * sq for e in (a, b) for k in (-16, -4, -1, 0, 1, 2, 4, 8, 16, 32)
                  if a - _TAIL * sq < e + k * sq < b + _TAIL * sq})
    res = quad(f, a - _TAIL * sq, b + _TAIL * sq, epsabs=1e-15, epsrel=1e-13, points=pts)
    return Estimate(res.value, res.error, QUADRATURE)


# ---------------------------------------------------------------------------
# Balls and unions of balls


def _check_t(t):
    if not t > 0:
        raise ValueError("t must be positive")


def ball_heat_loss_covariogram(ball: Ball, t: float) -> Estimate:
    """F = ∫ p(z; t) (|D| - |D ∩ (D + z)|) dz reduced to a radial integral."""
    _check_t(t)
    a, m = ball.radius, ball.m
    sphere = m * omega(m)
    c = (4 * math.pi * t) ** (-m / 2)
    f = lambda d: c * np.exp(-d * d / (4 * t)) * sphere * d ** (m - 1) * ball_covariogram_deficit(a, d, m)
    sq = math.sqrt(t)
    top = min(2 * a, _TAIL * sq)
    pts = [k * sq for k in (1, 2, 4, 8, 16) if k * sq < top]
    res = quad(f, 0.0, top, epsabs=1e-16, epsrel=1e-13, points=pts)
    far = ball.volume * special.gammaincc(m / 2, a * a / t)
    return Estimate(res.value + far, res.error, QUADRATURE)


def heat_content_quadrature(ball: Ball, t: float) -> Estimate:
    """H for a ball by quadrature, |D| - F with F free of cancellation."""
    if not isinstance(ball, Ball):
        raise ShapeError("quadrature path applies to balls only")
    loss = ball_heat_loss_covariogram(ball, t)
    return Estimate(ball.volume - loss.value, loss.error_radius + 1e-16 * ball.volume, QUADRATURE)


def ball_heat_loss_radial(ball: Ball, t: float) -> Estimate:
    """F = ∫_D (1 - u_D(x; t)) dx over radial shells.

    1 - u at radius r is a noncentral chi-square survival probability, which
    scipy evaluates to near machine precision even deep in the tail.
    """
    from scipy.stats import ncx2

    _check_t(t)
    a, m = ball.radius, ball.m
    sq = math.sqrt(t)
    lo = max(0.0, a - _TAIL * sq)
    sphere = m * omega(m)
    q = a * a / (2 * t)
    f = lambda r: sphere * r ** (m - 1) * ncx2.sf(q, m, np.maximum(r * r / (2 * t), 1e-300))
    pts = [a - k * sq for k in (1, 4, 16) if a - k * sq > lo]
    res = quad(f, lo, a, epsabs=1e-16, epsrel=1e-12, points=pts)
    return Estimate(res.value, res.error + 1e-13 * res.value, QUADRATURE)


def ball_cross_content(b1: Ball, b2: Ball, t: float) -> Estimate:
    """∫_{B1} ∫_{B2} p(x, y; t) dy dx for disjoint balls."""
    _check_t(t)
    m = b1.m
    s = float(np.linalg.norm(b1.c - b2.c))
    top = b1.radius + b2.radius
    lo = max(0.0, s - _TAIL * math.sqrt(t))
    if lo >= top:
        return Estimate(0.0, 0.0, QUADRATURE)
    f = lambda rho: ball_intersection_volume(b1.radius, b2.radius, rho, m) * shell_density(s, rho, t, m)
    res = quad(f, lo, top, epsabs=1e-16, epsrel=1e-12)
    return Estimate(res.value, res.error, QUADRATURE)


def _union_of_balls(shape) -> bool:
    return isinstance(shape, DisjointUnion) and all(isinstance(m, Ball) for m in shape.members)


def _union_ball_loss(shape: DisjointUnion, t: float, radial: bool) -> Estimate:
    per = [(ball_heat_loss_radial if radial else ball_heat_loss_covariogram)(b, t) for b in shape.members]
    value = sum(p.value for p in per)
    err = sum(p.error_radius for p in per)
    for i, a in enumerate(shape.members):
        for b in shape.members[i + 1:]:
            x = ball_cross_content(a, b, t)
            value -= 2 * x.value
            err += 2 * x.error_radius
    return Estimate(value, err, QUADRATURE)


# ---------------------------------------------------------------------------
# Monte Carlo


def _escape_draw(shape: Shape, t: float, inside: bool):
    step = math.sqrt(2 * t)

    def draw(rng, k):
        x = shape.sample(rng, k)
        hit = shape.contains(x + step * rng.standard_normal(x.shape))
        return hit if inside else ~hit

    return draw


def heat_content_mc(shape: Shape, t: float, samples: int = 1 << 20, seed=0) -> Estimate:
    """H = |D| P(x + B(t) in D) for x uniform in D."""
    _check_t(t)
    if not shape.finite_volume:
        raise ShapeError("Monte Carlo heat content needs finite volume; use heat_content_horn")
    if samples < 2:
        raise ValueError("need at least two samples")
    vol = shape.volume
    p, se, n = mc_mean(_escape_draw(shape, t, True), samples, seed)
    return Estimate(vol * p, SIGMAS * vol * se, MONTE_CARLO, n)


def heat_loss_mc(shape: Shape, t: float, samples: int = 1 << 20, seed=0) -> Estimate:
    """F = |D| P(x + B(t) not in D) for x uniform in D."""
    _check_t(t)
    if not shape.finite_volume:
        raise ShapeError("heat loss needs finite volume")
    if samples < 2:
        raise ValueError("need at least two samples")
    vol = shape.volume
    p, se, n = mc_mean(_escape_draw(shape, t, False), samples, seed)
    return Estimate(vol * p, SIGMAS * vol * se, MONTE_CARLO, n)


# ---------------------------------------------------------------------------
# Horns


def _psi(z, t):
    """Even antiderivative-twice of the 1-D kernel: Psi'' = p, Psi(0) = 0."""
    z = np.abs(z)
    return 0.5 * z * special.erf(z / (2 * math.sqrt(t))) + math.sqrt(t / math.pi) * np.expm1(-z * z / (4 * t))


def slab_overlap(a, b, t):
    """∫_0^a ∫_0^b p_1(u - v; t) dv du."""
    return _psi(a, t) + _psi(b, t) - _psi(a - b, t)


@dataclass(frozen=True)
class HornTail:
    """Bracket [lower, upper] for the heat content carried by x > X."""

    X: float
    lower: float
    upper: float


def horn_tail_bracket(horn: Horn, t: float, X: float) -> HornTail:
    """Certified bracket for the part of H with max(x, y) > X.

    Upper: slab overlap <= ab / sqrt(4 pi t) and ab <= (a^2 + b^2) / 2.
    Lower: restrict to x, y > X and use overlap >= ab exp(-w(X)^2/4t) / sqrt(4 pi t).
    """
    m, a, s = horn.m, horn.alpha, horn.s
    k = 2 * (m - 1) * a
    pref = (4 * math.pi * t) ** (-(m - 1) / 2)
    prof = lambda x: (s * np.asarray(x, dtype=float) ** (-a)) ** (2 * (m - 1))
    far = s ** (2 * (m - 1)) * X ** (1 - k) / (k - 1)
    sq = math.sqrt(t)
    lo = max(1.0, X - _TAIL * sq)
    near = quad(lambda x: prof(x) * 0.5 * special.erfc((X - x) / (2 * sq)), lo, X, epsabs=1e-300,
                epsrel=1e-12)
    upper = pref * (far + near.value + near.error)
    wX = s * X ** (-a)
    lower = pref * math.exp(-(m - 1) * wX * wX / (4 * t)) * max(0.0, far - 2 * math.sqrt(t / math.pi) * float(prof(X)))
    return HornTail(X, lower, upper)


def horn_cutoff(horn: Horn, t: float, rtol: float = 1e-5) -> float:
    """X past which the cross-section is thin against sqrt(t)."""
    m, a, s = horn.m, horn.alpha, horn.s
    X_thin = (s * s * (m - 1) / (4 * t * rtol)) ** (1 / (2 * a))
    return max(2.0, 1 + 100 * math.sqrt(t), X_thin)


def _horn_inner_nodes(horn: Horn, x, t, X):
    """Graded Gauss-Legendre nodes in y around each outer node x."""
    sq = math.sqrt(t)
    Z = 13.0 * sq
    slope = horn.alpha * horn.s  # max |w'| on x >= 1
    levels = int(np.clip(math.ceil(math.log2(max(slope, 1.0) * 10)) + 2, 3, 40))
    frac = np.concatenate([[0.0], 2.0 ** -np.arange(levels, -1, -1)])  # 0, 2^-L, ..., 1
    nodes, weights = [], []
    for side in (-1.0, 1.0):
        for f0, f1 in zip(frac[:-1], frac[1:]):
            a = x + side * Z * f0
            b = x + side * Z * f1
            lo = np.clip(np.minimum(a, b), 1.0, X)
            hi = np.clip(np.maximum(a, b), 1.0, X)
            n, w = gauss_legendre_panels(lo, hi, order=12, panels=1)
            nodes.append(n)
            weights.append(w)
    return np.concatenate(nodes, axis=-1), np.concatenate(weights, axis=-1)


def _horn_core(horn: Horn, t: float, X: float, epsrel: float = 1e-10):
    """∫_1^X ∫_1^X p_1(x - y) overlap(w(x), w(y))^(m-1) dy dx."""
    m = horn.m
    sq = math.sqrt(t)
    c1 = (4 * math.pi * t) ** -0.5

    def inner(x):
        yn, yw = _horn_inner_nodes(horn, x, t, X)
        wx = horn.width(x)[:, None]
        wy = horn.width(yn)
        g = slab_overlap(wx, wy, t) ** (m - 1)
        return np.sum(yw * c1 * np.exp(-(x[:, None] - yn) ** 2 / (4 * t)) * g, axis=1)

    f = lambda v: inner(np.exp(v)) * np.exp(v)
    top = math.log(X)
    pts = [math.log(1 + k * sq) for k in (1, 4, 16, 64) if math.log(1 + k * sq) < top]
    res = quad(f, 0.0, top, epsabs=0.0, epsrel=epsrel, points=pts, limit=50_000)
    return res.value, res.error


def heat_content_horn(horn: Horn, t: float, X_max: float | None = None, method: str = "quadrature",
                      samples: int = 1 << 20, seed=0) -> Estimate:
    """H for a horn: truncated integral over x < X_max plus a certified tail.

    The returned value is the truncated integral plus the midpoint of the tail
    bracket; the radius covers the half-width of the bracket and the
    truncated integral's own error.
    """
    if not isinstance(horn, Horn):
        raise ShapeError("horn estimator applies to horns only")
    _check_t(t)
    if not horn.heat_content_finite:
        return Estimate.infinite(QUADRATURE if method == "quadrature" else MONTE_CARLO)
    X = horn_cutoff(horn, t) if X_max is None else float(X_max)
    if X <= 1:
        raise ValueError("X_max must exceed 1")
    tail = horn_tail_bracket(horn, t, X)
    mid = 0.5 * (tail.lower + tail.upper)
    half = 0.5 * (tail.upper - tail.lower)
    if method == "quadrature":
        v, e = _horn_core(horn, t, X)
        return Estimate(v + mid, e + half, QUADRATURE)
    if method == "mc":
        step = math.sqrt(2 * t)
        v, e, n = _horn_stratified(
            horn, X, samples, seed, 32,
            lambda rng, pts: horn.contains(pts + step * rng.standard_normal(pts.shape)))
        return Estimate(v + mid, e + half, MONTE_CARLO, n)
    raise ValueError(f"unknown horn method {method!r}")


# ---------------------------------------------------------------------------
# Dispatchers


def heat_content(shape: Shape, t: float, samples: int = 1 << 20, seed=0, method: str = "auto") -> Estimate:
    """H_D(t) by the best available path (or the one named by ``method``)."""
    _check_t(t)
    if method == "mc":
        if isinstance(shape, Horn):
            return heat_content_horn(shape, t, method="mc", samples=samples, seed=seed)
        return heat_content_mc(shape, t, samples, seed)
    if method == "exact":
        return heat_content_exact_product(shape, t)
    if method == "quadrature":
        if isinstance(shape, Ball):
            return heat_content_quadrature(shape, t)
        if isinstance(shape, Horn):
            return heat_content_horn(shape, t)
        if isinstance(shape, Box):
            return heat_content_exact_product(shape, t)
        if _union_of_balls(shape):
            loss = _union_ball_loss(shape, t, radial=False)
            return Estimate(shape.volume - loss.value, loss.error_radius, QUADRATURE)
        raise ShapeError(f"no quadrature path for {type(shape).__name__}")
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(shape, (Ball, Box, Horn)) or _union_of_balls(shape):
        return heat_content(shape, t, samples, seed, "quadrature")
    return heat_content_mc(shape, t, samples, seed)


def heat_loss(shape: Shape, t: float, samples: int = 1 << 20, seed=0, method: str = "auto") -> Estimate:
    """F_D(t) = ∫_D (1 - u_D(x; t)) dx."""
    _check_t(t)
    if not shape.finite_volume:
        raise ShapeError("heat loss needs finite volume")
    if method == "mc":
        return heat_loss_mc(shape, t, samples, seed)
    if method == "exact":
        return heat_loss_exact_product(shape, t)
    if method == "quadrature":
        if isinstance(shape, Ball):
            return ball_heat_loss_radial(shape, t)
        if isinstance(shape, Box):
            return heat_loss_exact_product(shape, t)
        if _union_of_balls(shape):
            return _union_ball_loss(shape, t, radial=True)
        raise ShapeError(f"no quadrature path for {type(shape).__name__}")
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(shape, (Ball, Box)) or _union_of_balls(shape):
        return heat_loss(shape, t, samples, seed, "quadrature")
    return heat_loss_mc(shape, t, samples, seed)


def heat_curve(shape: Shape, grid: TimeGrid, quantity: str = H, method: str = "auto",
               samples: int = 1 << 20, seed=0) -> HeatCurve:
    """Evaluate H or F on every grid time; MC points get per-index seeds."""
    fn = heat_content if quantity == H else heat_loss
    values = [fn(shape, t, samples, seed_sequence(seed, i), method) for i, t in enumerate(grid.times)]
    return HeatCurve(shape, grid, values, quantity)
