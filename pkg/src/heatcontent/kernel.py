"""Heat kernel and the temperature field u_D(x; t)."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .estimate import MONTE_CARLO, QUADRATURE, SIGMAS, Estimate, mc_mean
from .geometry import Ball, Box, DisjointUnion, Shape, ShapeError, _points
from .quadrature import quad

# Gaussian tails beyond this many multiples of sqrt(t) are below e^-700.
_TAIL = 53.0


def _check_t(t):
    if not t > 0:
        raise ValueError("t must be positive")


def heat_kernel(x, y, t: float):
    """(4 pi t)^(-m/2) exp(-|x - y|^2 / 4t)."""
    _check_t(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = x.shape[-1] if x.ndim else 1
    d2 = np.sum((x - y) ** 2, axis=-1) if x.ndim else (x - y) ** 2
    return (4.0 * math.pi * t) ** (-m / 2) * np.exp(-d2 / (4.0 * t))


def u_interval(a: float, b: float, x, t: float):
    """Temperature at x for the initial indicator of (a, b)."""
    if not a < b:
        raise ValueError("interval needs a < b")
    _check_t(t)
    s = 2.0 * math.sqrt(t)
    x = np.asarray(x, dtype=float)
    return 0.5 * (special.erf((b - x) / s) - special.erf((a - x) / s))


def one_minus_u_interval(a: float, b: float, x, t: float):
    """1 - u_interval, evaluated without cancellation inside (a, b)."""
    _check_t(t)
    s = 2.0 * math.sqrt(t)
    x = np.asarray(x, dtype=float)
    return 0.5 * (special.erfc((b - x) / s) + special.erfc((x - a) / s))


def u_box(box: Box, x, t: float) -> Estimate:
    x, single = _points(x, box.m)
    vals = np.ones(len(x))
    for i in range(box.m):
        vals *= u_interval(box.lo[i], box.hi[i], x[:, i], t)
    if single:
        return Estimate.exact(float(vals[0]))
    return vals


def shell_density(r, rho, t: float, m: int):
    """Kernel mass density at distance rho from a point at distance r.

    Integrating over rho in (0, a) gives u for the radius-a ball centred at
    the origin: the angular integral of the Gaussian over the sphere of
    radius rho is written with a scaled modified Bessel function.
    """
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    nu = m / 2 - 1
    z = r * rho / (2.0 * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        bessel = special.ive(nu, z) * z ** (-nu)
    small = z < 1e-8
    if np.any(small):
        series = 0.5 ** nu / math.gamma(nu + 1) * (1 + z * z / (4 * (nu + 1)))
        bessel = np.where(small, series, bessel)
    pref = (4.0 * math.pi * t) ** (-m / 2) * (2.0 * math.pi) ** (m / 2)
    return pref * rho ** (m - 1) * bessel * np.exp(-(r - rho) ** 2 / (4.0 * t))


def _ball_radial(r: float, a: float, t: float, m: int, outside: bool, epsabs: float):
    sq = math.sqrt(t)
    if r == 0.0:
        v = special.gammaincc(m / 2, a * a / (4 * t)) if outside else special.gammainc(m / 2, a * a / (4 * t))
        return float(v), 1e-16
    f = lambda rho: shell_density(r, rho, t, m)
    if outside:
        lo, hi = a, max(a, r) + _TAIL * sq
    else:
        lo, hi = max(0.0, r - _TAIL * sq), a
        if lo >= hi:
            return 0.0, 0.0
    pts = [p for p in (r - 4 * sq, r, r + 4 * sq) if lo < p < hi]
    res = quad(f, lo, hi, epsabs=epsabs, epsrel=1e-12, points=pts)
    return res.value, res.error


def u_ball(ball: Ball, x, t: float, epsabs: float = 1e-12) -> Estimate:
    """u for a ball by radial quadrature over spherical shells."""
    _check_t(t)
    x, _ = _points(x, ball.m)
    r = float(np.linalg.norm(x[0] - ball.c))
    v, e = _ball_radial(r, ball.radius, t, ball.m, outside=False, epsabs=epsabs)
    return Estimate(v, e, QUADRATURE)


def one_minus_u_ball(ball: Ball, x, t: float, epsabs: float = 1e-13) -> Estimate:
    """1 - u for a ball, integrating the kernel mass outside the ball."""
    _check_t(t)
    x, _ = _points(x, ball.m)
    r = float(np.linalg.norm(x[0] - ball.c))
    v, e = _ball_radial(r, ball.radius, t, ball.m, outside=True, epsabs=epsabs)
    return Estimate(v, e, QUADRATURE)


def u_ball_many(ball: Ball, x, t: float) -> np.ndarray:
    """Vectorised u for a ball via the noncentral chi-square distribution.

    x + sqrt(2t) Z lies in the ball iff a noncentral chi-square variable with
    m degrees of freedom and noncentrality |x - c|^2 / 2t is below a^2 / 2t.
    """
    from scipy.stats import ncx2

    _check_t(t)
    x, single = _points(x, ball.m)
    lam = np.sum((x - ball.c) ** 2, axis=1) / (2 * t)
    q = ball.radius ** 2 / (2 * t)
    central = special.gammainc(ball.m / 2, q / 2) * np.ones_like(lam)
    with np.errstate(all="ignore"):
        vals = np.where(lam > 0, ncx2.cdf(q, ball.m, np.maximum(lam, 1e-300)), central)
    return vals[0] if single else vals


def u_general(shape: Shape, x, t: float, budget: int, seed=0) -> Estimate:
    """Monte Carlo u: mean of 1{x + sqrt(2t) Z in D}."""
    _check_t(t)
    if budget <= 0:
        raise ValueError("Monte Carlo budget must be positive")
    x, _ = _points(x, shape.m)
    x0 = x[0]
    step = math.sqrt(2 * t)
    p, se, n = mc_mean(lambda rng, k: shape.contains(x0 + step * rng.standard_normal((k, shape.m))),
                       budget, seed)
    return Estimate(p, SIGMAS * se, MONTE_CARLO, n)


def u(shape: Shape, x, t: float, budget: int = 1 << 20, seed=0) -> Estimate:
    """u_D(x; t) by the most accurate path available for the shape."""
    if isinstance(shape, Box):
        return u_box(shape, x, t)
    if isinstance(shape, Ball):
        return u_ball(shape, x, t)
    if isinstance(shape, DisjointUnion) and all(isinstance(m, (Ball, Box)) for m in shape.members):
        parts = [u(mem, x, t) for mem in shape.members]
        return Estimate(sum(p.value for p in parts), sum(p.error_radius for p in parts), QUADRATURE)
    return u_general(shape, x, t, budget, seed)


def u_many(shape: Shape, x, t: float) -> np.ndarray:
    """Vectorised deterministic u for balls, boxes and unions of them."""
    x, _ = _points(x, shape.m)
    if isinstance(shape, Box):
        return u_box(shape, x, t)
    if isinstance(shape, Ball):
        return u_ball_many(shape, x, t)
    if isinstance(shape, DisjointUnion):
        return sum(u_many(mem, x, t) for mem in shape.members)
    raise ShapeError(f"no deterministic u for {type(shape).__name__}")


# ---------------------------------------------------------------------------
# Pointwise bounds near the boundary of an R-smooth set


def _lemma_inputs(shape: Shape, x, t):
    _check_t(t)
    R = shape.smoothness_radius
    if not R > 0:
        raise ShapeError("pointwise bounds need an R-smooth set")
    x, _ = _points(x, shape.m)
    if not shape.contains(x[0]):
        raise ValueError("x must lie in D")
    d = float(shape.delta(x[0]))
    if not d < R / 2:
        raise ValueError("pointwise bounds need delta(x) < R/2")
    return d, R


def _normal_tail(d, t):
    # (4 pi t)^(-1/2) ∫_d^∞ exp(-z^2 / 4t) dz
    return 0.5 * special.erfc(d / (2 * math.sqrt(t)))


def lemma_lower_correction(d: float, R: float, t: float, m: int) -> tuple[float, float]:
    """(4pi t)^(-m/2) ∫_{-R}^{d} e^{-z²/4t} ∫_{|y| > ((d-z)R/2)^{1/2}} e^{-|y|²/4t} dy dz.

    The (m-1)-dimensional Gaussian tail over |y| > eta equals
    (4 pi t)^((m-1)/2) Q((m-1)/2, eta^2 / 4t) with Q the regularised upper
    incomplete gamma function.
    """
    k = (m - 1) / 2
    c = (4 * math.pi * t) ** -0.5
    f = lambda z: c * np.exp(-z * z / (4 * t)) * special.gammaincc(k, (d - z) * R / (8 * t))
    lo = max(-R, -_TAIL * math.sqrt(t))
    res = quad(f, lo, d, epsabs=1e-14, points=[0.0] if lo < 0 < d else None)
    return res.value, res.error


def lemma_upper_correction(d: float, R: float, t: float, m: int) -> tuple[float, float]:
    """(4pi t)^(-m/2) ∫_{d}^{d+R} e^{-z²/4t} ∫_{|y| > ((z-d)R)^{1/2}} e^{-|y|²/4t} dy dz."""
    k = (m - 1) / 2
    c = (4 * math.pi * t) ** -0.5
    f = lambda z: c * np.exp(-z * z / (4 * t)) * special.gammaincc(k, (z - d) * R / (4 * t))
    hi = min(d + R, d + _TAIL * math.sqrt(t))
    res = quad(f, d, hi, epsabs=1e-14)
    return res.value, res.error


def u_lower_lemma(shape: Shape, x, t: float) -> float:
    d, R = _lemma_inputs(shape, x, t)
    corr, _ = lemma_lower_correction(d, R, t, shape.m)
    return 1.0 - _normal_tail(d, t) - math.sqrt(2) / 2 * math.exp(-R * R / (8 * t)) - corr


def u_upper_lemma(shape: Shape, x, t: float) -> float:
    d, R = _lemma_inputs(shape, x, t)
    corr, _ = lemma_upper_correction(d, R, t, shape.m)
    return 1.0 - _normal_tail(d, t) + math.sqrt(2) / 2 * math.exp(-R * R / (8 * t)) + corr
