"""Catalog of open sets in R^m and the geometric functionals on them.

Shapes are immutable. Point arguments may be a single point of shape
``(m,)`` or a batch of shape ``(n, m)``; batch calls return arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .estimate import MONTE_CARLO, QUADRATURE, SIGMAS, Estimate, mc_mean
from .quadrature import quad


class ShapeError(ValueError):
    """Invalid shape parameters or shape document."""


def omega(m: int) -> float:
    """Volume of the unit ball in R^m."""
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def _points(x, m):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != m:
        raise ShapeError(f"point dimension {x.shape[-1]} does not match shape dimension {m}")
    return x, single


def _out(values, single):
    return values[0] if single else values


def _unit_ball_sample(rng, n, m):
    z = rng.standard_normal((n, m))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * rng.random((n, 1)) ** (1.0 / m)


def _segment_point_dist(p, q, x):
    """Distance from points x (n, m) to the segment [p, q]."""
    d = q - p
    dd = float(d @ d)
    if dd == 0.0:
        return np.linalg.norm(x - p, axis=-1)
    s = np.clip((x - p) @ d / dd, 0.0, 1.0)
    return np.linalg.norm(x - (p + s[..., None] * d), axis=-1)


def _segment_segment_dist(p1, q1, p2, q2):
    cands = [
        float(_segment_point_dist(p1, q1, p2[None])[0]),
        float(_segment_point_dist(p1, q1, q2[None])[0]),
        float(_segment_point_dist(p2, q2, p1[None])[0]),
        float(_segment_point_dist(p2, q2, q1[None])[0]),
    ]
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, b, c = d1 @ d1, d1 @ d2, d2 @ d2
    det = a * c - b * b
    if det > 1e-14 * a * c and a > 0 and c > 0:
        e, f = d1 @ r, d2 @ r
        s = (b * f - c * e) / det
        u = (a * f - b * e) / det
        if 0 <= s <= 1 and 0 <= u <= 1:
            cands.append(float(np.linalg.norm(p1 + s * d1 - p2 - u * d2)))
    return min(cands)


# ---------------------------------------------------------------------------
# Ball volume pieces


def cap_volume(r, h, m):
    """Volume of the cap of height ``h`` (0 <= h <= 2r) cut from a radius-r ball."""
    r = np.asarray(r, dtype=float)
    h = np.clip(np.asarray(h, dtype=float), 0.0, 2.0 * r)
    full = omega(m) * r ** m
    small = np.minimum(h, 2.0 * r - h)
    arg = np.clip((2.0 * r * small - small * small) / (r * r), 0.0, 1.0)
    v = 0.5 * full * special.betainc((m + 1) / 2, 0.5, arg)
    return np.where(h <= r, v, full - v)


def ball_intersection_volume(r1, r2, d, m):
    """|B(0; r1) ∩ B(d e1; r2)| for centre separation ``d``."""
    r1, r2, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r1, r2, d)))
    out = np.zeros(d.shape)
    inside = d <= np.abs(r1 - r2)
    out[inside] = omega(m) * np.minimum(r1, r2)[inside] ** m
    lens = ~inside & (d < r1 + r2)
    if np.any(lens):
        a, b, s = r1[lens], r2[lens], d[lens]
        x1 = (s * s + a * a - b * b) / (2.0 * s)
        out[lens] = cap_volume(a, a - x1, m) + cap_volume(b, b - (s - x1), m)
    return out


def ball_covariogram(a, d, m):
    """|B ∩ (B + z)| for a radius-a ball and |z| = d."""
    u = np.clip((np.asarray(d, dtype=float) / (2.0 * a)) ** 2, 0.0, 1.0)
    return omega(m) * a ** m * special.betainc((m + 1) / 2, 0.5, 1.0 - u)


def ball_covariogram_deficit(a, d, m):
    """|B| - |B ∩ (B + z)| for |z| = d, without cancellation."""
    u = np.clip((np.asarray(d, dtype=float) / (2.0 * a)) ** 2, 0.0, 1.0)
    return omega(m) * a ** m * special.betainc(0.5, (m + 1) / 2, u)


def _disk_quadrant_area(x, y, R):
    """Area of {|p| < R, p1 < x, p2 < y} for the origin-centred disk."""
    x = np.clip(x, -R, R)
    y = np.clip(y, -R, R)
    c = np.sqrt(np.maximum(R * R - y * y, 0.0))

    def A(s):
        return 0.5 * (s * np.sqrt(np.maximum(R * R - s * s, 0.0)) + R * R * np.arcsin(np.clip(s / R, -1, 1)))

    a_neg = A(-R)
    upper = (A(x) - a_neg) + (A(np.minimum(x, -c)) - a_neg) + y * np.maximum(0.0, np.minimum(x, c) + c) \
        + (A(np.maximum(x, c)) - A(c))
    lower = np.where(x <= -c, 0.0, y * (np.minimum(x, c) + c) + A(np.minimum(x, c)) - A(-c))
    return np.where(y >= 0, upper, lower)


def disk_rectangle_area(centers, R, lo, hi):
    """|B(c; R) ∩ [lo0, hi0] x [lo1, hi1]| for 2-D centres ``c`` (n, 2)."""
    x0 = lo[0] - centers[:, 0]
    x1 = hi[0] - centers[:, 0]
    y0 = lo[1] - centers[:, 1]
    y1 = hi[1] - centers[:, 1]
    G = _disk_quadrant_area
    return np.maximum(G(x1, y1, R) - G(x0, y1, R) - G(x1, y0, R) + G(x0, y0, R), 0.0)


# ---------------------------------------------------------------------------
# Shapes


class Shape:
    m: int

    # Implemented by subclasses: contains, delta, volume, perimeter, diameter,
    # smoothness_radius, component_count, sample, to_dict.

    @property
    def finite_volume(self) -> bool:
        return math.isfinite(self.volume)

    def bounding_box(self):
        raise NotImplementedError

    def mu_exact(self, x: np.ndarray, R: float):
        """Vectorised closed-form μ(x; R), or None when not available."""
        return None


@dataclass(frozen=True, eq=True)
class Ball(Shape):
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) < 1:
            raise ShapeError("ball needs a centre")
        if not self.radius > 0:
            raise ShapeError("ball radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def m(self):
        return len(self.center)

    @property
    def c(self):
        return np.array(self.center)

    def contains(self, x):
        x, single = _points(x, self.m)
        return _out(np.linalg.norm(x - self.c, axis=1) < self.radius, single)

    def delta(self, x):
        x, single = _points(x, self.m)
        return _out(np.maximum(self.radius - np.linalg.norm(x - self.c, axis=1), 0.0), single)

    @property
    def volume(self):
        return omega(self.m) * self.radius ** self.m

    @property
    def perimeter(self):
        return self.m * omega(self.m) * self.radius ** (self.m - 1)

    @property
    def diameter(self):
        return 2.0 * self.radius

    @property
    def smoothness_radius(self):
        return self.radius

    @property
    def component_count(self):
        return 1

    def bounding_box(self):
        return self.c - self.radius, self.c + self.radius

    def sample(self, rng, n):
        return self.c + self.radius * _unit_ball_sample(rng, n, self.m)

    def mu_exact(self, x, R):
        d = np.linalg.norm(np.atleast_2d(x) - self.c, axis=1)
        return ball_intersection_volume(self.radius, R, d, self.m)

    def scaled(self, c: float) -> "Ball":
        return Ball(tuple(c * v for v in self.center), c * self.radius)

    def to_dict(self):
        return {"kind": "ball", "m": self.m, "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True, eq=True)
class Box(Shape):
    lengths: tuple
    corner: tuple = None

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        if not lengths or any(not v > 0 for v in lengths):
            raise ShapeError("box side lengths must be positive")
        corner = (0.0,) * len(lengths) if self.corner is None else tuple(float(v) for v in self.corner)
        if len(corner) != len(lengths):
            raise ShapeError("box corner and lengths differ in dimension")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "corner", corner)

    @property
    def m(self):
        return len(self.lengths)

    @property
    def lo(self):
        return np.array(self.corner)

    @property
    def hi(self):
        return np.array(self.corner) + np.array(self.lengths)

    def contains(self, x):
        x, single = _points(x, self.m)
        return _out(np.all((x > self.lo) & (x < self.hi), axis=1), single)

    def delta(self, x):
        x, single = _points(x, self.m)
        d = np.minimum(x - self.lo, self.hi - x).min(axis=1)
        return _out(np.maximum(d, 0.0), single)

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    @property
    def perimeter(self):
        if self.m == 1:
            return 2.0
        L = np.array(self.lengths)
        return float(sum(2.0 * np.prod(np.delete(L, i)) for i in range(self.m)))

    @property
    def diameter(self):
        return float(np.linalg.norm(self.lengths))

    @property
    def smoothness_radius(self):
        # Corners admit no interior tangent ball; an interval is (L/2)-smooth.
        return self.lengths[0] / 2.0 if self.m == 1 else 0.0

    @property
    def component_count(self):
        return 1

    def bounding_box(self):
        return self.lo, self.hi

    def sample(self, rng, n):
        return self.lo + rng.random((n, self.m)) * np.array(self.lengths)

    def mu_exact(self, x, R):
        x = np.atleast_2d(x)
        if self.m == 1:
            return np.maximum(np.minimum(x[:, 0] + R, self.hi[0]) - np.maximum(x[:, 0] - R, self.lo[0]), 0.0)
        if self.m == 2:
            return disk_rectangle_area(x, R, self.lo, self.hi)
        return None

    def scaled(self, c: float) -> "Box":
        return Box(tuple(c * v for v in self.lengths), tuple(c * v for v in self.corner))

    def to_dict(self):
        return {"kind": "box", "m": self.m, "lengths": list(self.lengths), "corner": list(self.corner)}


@dataclass(frozen=True, eq=True)
class Stadium(Shape):
    """Open R-neighbourhood of the segment [start, end].

    A zero-length segment yields a ``Ball``.
    """

    start: tuple
    end: tuple
    radius: float

    def __new__(cls, start=None, end=None, radius=None):
        if start is not None and end is not None and \
                tuple(float(v) for v in start) == tuple(float(v) for v in end):
            return Ball(start, radius)
        return super().__new__(cls)

    def __post_init__(self):
        start = tuple(float(v) for v in self.start)
        end = tuple(float(v) for v in self.end)
        if len(start) != len(end) or len(start) < 2:
            raise ShapeError("stadium endpoints must share a dimension >= 2")
        if not self.radius > 0:
            raise ShapeError("stadium radius must be positive")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def m(self):
        return len(self.start)

    @property
    def p(self):
        return np.array(self.start)

    @property
    def q(self):
        return np.array(self.end)

    @property
    def length(self):
        return float(np.linalg.norm(self.q - self.p))

    def contains(self, x):
        x, single = _points(x, self.m)
        return _out(_segment_point_dist(self.p, self.q, x) < self.radius, single)

    def delta(self, x):
        x, single = _points(x, self.m)
        return _out(np.maximum(self.radius - _segment_point_dist(self.p, self.q, x), 0.0), single)

    @property
    def volume(self):
        m, R = self.m, self.radius
        return omega(m) * R ** m + omega(m - 1) * R ** (m - 1) * self.length

    @property
    def perimeter(self):
        m, R = self.m, self.radius
        return m * omega(m) * R ** (m - 1) + (m - 1) * omega(m - 1) * R ** (m - 2) * self.length

    @property
    def diameter(self):
        return self.length + 2.0 * self.radius

    @property
    def smoothness_radius(self):
        return self.radius

    @property
    def component_count(self):
        return 1

    def bounding_box(self):
        return np.minimum(self.p, self.q) - self.radius, np.maximum(self.p, self.q) + self.radius

    def sample(self, rng, n):
        lo, hi = self.bounding_box()
        out = np.empty((0, self.m))
        while len(out) < n:
            k = 2 * (n - len(out)) + 64
            cand = lo + rng.random((k, self.m)) * (hi - lo)
            out = np.vstack([out, cand[self.contains(cand)]])
        return out[:n]

    def scaled(self, c: float) -> "Stadium":
        return Stadium(tuple(c * v for v in self.start), tuple(c * v for v in self.end), c * self.radius)

    def to_dict(self):
        return {"kind": "stadium", "m": self.m, "start": list(self.start), "end": list(self.end),
                "radius": self.radius}


@dataclass(frozen=True, eq=True)
class Horn(Shape):
    """{(x, x') : x > 1, x' in x^-alpha (0, s)^(m-1)}."""

    m: int
    alpha: float
    s: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ShapeError("horn dimension must be an integer >= 2")
        if not self.alpha > 0 or not self.s > 0:
            raise ShapeError("horn alpha and s must be positive")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "s", float(self.s))

    def width(self, x):
        return self.s * np.asarray(x, dtype=float) ** (-self.alpha)

    @property
    def heat_content_finite(self) -> bool:
        return self.alpha > 1.0 / (2 * (self.m - 1))

    def contains(self, x):
        x, single = _points(x, self.m)
        x1 = x[:, 0]
        ok = x1 > 1.0
        w = self.width(np.where(ok, x1, 1.0))
        ok &= np.all((x[:, 1:] > 0) & (x[:, 1:] < w[:, None]), axis=1)
        return _out(ok, single)

    def _curve_distance(self, x0, y0):
        """Distance from (x0, y0), below the profile, to the profile's epigraph."""
        a, s = self.alpha, self.s
        w0 = s * x0 ** (-a)
        lo = x0.copy()
        hi = x0 + np.maximum(w0 - y0, 0.0)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            w = s * mid ** (-a)
            dw = -a * w / mid
            g = (mid - x0) + (w - y0) * dw
            neg = g < 0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
            if np.all(hi - lo <= 1e-12):
                break
        xi = 0.5 * (lo + hi)
        return np.hypot(xi - x0, s * xi ** (-a) - y0)

    def delta(self, x):
        x, single = _points(x, self.m)
        inside = self.contains(x)
        d = np.zeros(len(x))
        if np.any(inside):
            xi = x[inside]
            best = np.minimum(xi[:, 0] - 1.0, xi[:, 1:].min(axis=1))
            for i in range(1, self.m):
                best = np.minimum(best, self._curve_distance(xi[:, 0], xi[:, i]))
            d[inside] = best
        return _out(d, single)

    @property
    def volume(self):
        k = (self.m - 1) * self.alpha
        if k <= 1:
            return math.inf
        return self.s ** (self.m - 1) / (k - 1)

    def truncated_volume(self, X: float, x0: float = 1.0) -> float:
        k = (self.m - 1) * self.alpha
        c = self.s ** (self.m - 1)
        if abs(k - 1) < 1e-14:
            return c * math.log(X / x0)
        return c * (X ** (1 - k) - x0 ** (1 - k)) / (1 - k)

    @property
    def perimeter(self):
        m, a, s = self.m, self.alpha, self.s
        if (m - 2) * a <= 1:
            return math.inf
        flat = s ** (m - 2) / ((m - 2) * a - 1)
        # x = 1/u maps (1, inf) to (0, 1); integrand gains u^-2.
        curved = quad(lambda u: (s * u ** a) ** (m - 2) * np.sqrt(1 + (a * s * u ** (a + 1)) ** 2) / u ** 2,
                      1e-300, 1.0, epsabs=1e-12).value
        return s ** (m - 1) + (m - 1) * (flat + curved)

    @property
    def diameter(self):
        return math.inf

    @property
    def smoothness_radius(self):
        return 0.0

    @property
    def component_count(self):
        return 1

    def bounding_box(self):
        lo = np.zeros(self.m)
        lo[0] = 1.0
        hi = np.full(self.m, self.s)
        hi[0] = math.inf
        return lo, hi

    def sample_truncated(self, rng, n, x0: float, x1: float):
        """Uniform points of the horn with x in (x0, x1)."""
        k = (self.m - 1) * self.alpha
        u = rng.random(n)
        if abs(k - 1) < 1e-14:
            xs = x0 * (x1 / x0) ** u
        else:
            e = 1 - k
            xs = (x0 ** e + u * (x1 ** e - x0 ** e)) ** (1 / e)
        w = self.width(xs)
        rest = rng.random((n, self.m - 1)) * w[:, None]
        return np.column_stack([xs, rest])

    def sample(self, rng, n):
        raise ShapeError("infinite-volume horn cannot be sampled uniformly; use sample_truncated")

    def to_dict(self):
        return {"kind": "horn", "m": self.m, "alpha": self.alpha, "s": self.s}


@dataclass(frozen=True, eq=True)
class DisjointUnion(Shape):
    members: tuple

    def __post_init__(self):
        flat = []
        for mem in self.members:
            if isinstance(mem, DisjointUnion):
                flat.extend(mem.members)
            else:
                flat.append(mem)
        if not flat:
            raise ShapeError("union needs at least one member")
        if any(isinstance(mem, Horn) for mem in flat):
            raise ShapeError("horns cannot be union members")
        dims = {mem.m for mem in flat}
        if len(dims) != 1:
            raise ShapeError("union members must share a dimension")
        object.__setattr__(self, "members", tuple(flat))
        if self.min_gap() <= 0:
            raise ShapeError("union members must have disjoint closures")

    @property
    def m(self):
        return self.members[0].m

    def min_gap(self) -> float:
        gaps = [closure_distance(a, b) for i, a in enumerate(self.members) for b in self.members[i + 1:]]
        return min(gaps) if gaps else math.inf

    def _member_index(self, x):
        idx = np.full(len(x), -1)
        for i, mem in enumerate(self.members):
            idx[mem.contains(x)] = i
        return idx

    def contains(self, x):
        x, single = _points(x, self.m)
        return _out(self._member_index(x) >= 0, single)

    def delta(self, x):
        x, single = _points(x, self.m)
        d = np.zeros(len(x))
        for mem in self.members:
            d = np.maximum(d, mem.delta(x))
        return _out(d, single)

    @property
    def volume(self):
        return float(sum(mem.volume for mem in self.members))

    @property
    def perimeter(self):
        return float(sum(mem.perimeter for mem in self.members))

    @property
    def diameter(self):
        best = max(mem.diameter for mem in self.members)
        for a in self.members:
            for b in self.members:
                if a is b:
                    continue
                # Farthest-point distance between members.
                best = max(best, _farthest(a, b))
        return best

    @property
    def smoothness_radius(self):
        r = min(mem.smoothness_radius for mem in self.members)
        return min(r, 0.5 * self.min_gap())

    @property
    def component_count(self):
        return sum(mem.component_count for mem in self.members)

    def bounding_box(self):
        boxes = [mem.bounding_box() for mem in self.members]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def sample(self, rng, n):
        vols = np.array([mem.volume for mem in self.members])
        counts = rng.multinomial(n, vols / vols.sum())
        parts = [mem.sample(rng, int(k)) for mem, k in zip(self.members, counts) if k > 0]
        pts = np.vstack(parts)
        return pts[rng.permutation(n)]

    def mu_exact(self, x, R):
        total = np.zeros(len(np.atleast_2d(x)))
        for mem in self.members:
            v = mem.mu_exact(x, R)
            if v is None:
                return None
            total += v
        return total

    def scaled(self, c: float) -> "DisjointUnion":
        return DisjointUnion(tuple(mem.scaled(c) for mem in self.members))

    def to_dict(self):
        return {"kind": "union", "m": self.m, "members": [mem.to_dict() for mem in self.members]}


def _round_core(shape):
    if isinstance(shape, Ball):
        return shape.c, shape.c, shape.radius
    if isinstance(shape, Stadium):
        return shape.p, shape.q, shape.radius
    return None


def _farthest(a, b) -> float:
    ra, rb = _round_core(a), _round_core(b)
    if ra is not None and rb is not None:
        return max(np.linalg.norm(u - v) for u in ra[:2] for v in rb[:2]) + ra[2] + rb[2]
    # Bounding-box corners give an upper bound; exact for boxes.
    la, ha = a.bounding_box()
    lb, hb = b.bounding_box()
    span = np.maximum(np.abs(ha - lb), np.abs(hb - la))
    return float(np.linalg.norm(span))


def _point_box_dist(x, lo, hi):
    return np.linalg.norm(np.maximum(np.maximum(lo - x, x - hi), 0.0), axis=-1)


def closure_distance(a: Shape, b: Shape) -> float:
    """Distance between the closures of two bounded catalog shapes."""
    ra, rb = _round_core(a), _round_core(b)
    if ra is not None and rb is not None:
        return _segment_segment_dist(ra[0], ra[1], rb[0], rb[1]) - ra[2] - rb[2]
    if isinstance(a, Box) and isinstance(b, Box):
        gap = np.maximum(np.maximum(b.lo - a.hi, a.lo - b.hi), 0.0)
        if np.all(gap == 0):
            # Overlapping or touching projections on every axis.
            return -1.0 if np.all((a.lo < b.hi) & (b.lo < a.hi)) else 0.0
        return float(np.linalg.norm(gap))
    if isinstance(b, Box):
        a, b = b, a
        ra, rb = rb, ra
    if isinstance(a, Box) and rb is not None:
        p, q, r = rb
        res = optimize.minimize_scalar(
            lambda s: float(_point_box_dist(p + s * (q - p), a.lo, a.hi)),
            bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
        ends = min(float(_point_box_dist(p, a.lo, a.hi)), float(_point_box_dist(q, a.lo, a.hi)))
        return min(float(res.fun), ends) - r
    raise ShapeError(f"cannot separate {type(a).__name__} and {type(b).__name__}")


# ---------------------------------------------------------------------------
# Module-level operations


def contains(shape: Shape, x):
    return shape.contains(x)


def delta(shape: Shape, x):
    """Distance to the complement; 0 outside the set."""
    return shape.delta(x)


def _ball_uniform(rng, x, R, n):
    return x + R * _unit_ball_sample(rng, n, len(x))


def mu(shape: Shape, x, R: float, budget: int = 1 << 16, seed=0) -> Estimate:
    """|B(x; R) ∩ D|."""
    if not R > 0:
        raise ValueError("R must be positive")
    x = np.asarray(x, dtype=float)
    _points(x, shape.m)
    full = omega(shape.m) * R ** shape.m
    exact = shape.mu_exact(x[None], R)
    if exact is not None:
        return Estimate.exact(float(exact[0]))
    if shape.contains(x) and shape.delta(x) >= R:
        return Estimate.exact(full)
    if budget <= 0:
        raise ValueError("Monte Carlo budget must be positive")
    p, se, n = mc_mean(lambda rng, k: shape.contains(_ball_uniform(rng, x, R, k)), budget, seed)
    return Estimate(full * p, SIGMAS * full * se, MONTE_CARLO, n)


def nu(shape: Shape, x, R: float, budget: int = 1 << 16, seed=0) -> Estimate:
    """|B(x; R) \\ D|; requires finite volume."""
    if not shape.finite_volume:
        raise ShapeError("nu is defined for finite-volume sets only")
    est = mu(shape, x, R, budget, seed)
    full = omega(shape.m) * R ** shape.m
    return Estimate(full - est.value, est.error_radius, est.method, est.samples)


def _box_cov_integral(L, R, complement=False):
    """∫_{|z|<R} prod (L_i - |z_i|)_+ dz, or of (|D| - prod ...) if complement."""
    L = list(L)
    vol = float(np.prod(L))

    def g1(l, h):
        h = np.minimum(h, l)
        return 2.0 * (l * h - 0.5 * h * h)

    def inner(Ls, h):
        # ∫_{|z|<h, z in R^k} prod (L - |z|)_+ for vectorised radius h.
        h = np.asarray(h, dtype=float)
        if len(Ls) == 1:
            return g1(Ls[0], h)
        head, rest = Ls[0], Ls[1:]
        out = np.empty(h.shape)
        for idx, hv in np.ndenumerate(h):
            if hv <= 0:
                out[idx] = 0.0
                continue
            f = lambda z: (head - z) * inner(rest, np.sqrt(np.maximum(hv * hv - z * z, 0.0)))
            top = min(hv, head)
            pts = [p for p in [*rest] if p < hv]
            pts = [math.sqrt(hv * hv - p * p) for p in pts]
            out[idx] = 2.0 * quad(f, 0.0, top, epsabs=1e-14, points=pts).value
        return out

    if len(L) == 1:
        val = float(g1(L[0], R))
        return ((vol * 2 * R - val) if complement else val), 0.0
    head, rest = L[0], L[1:]
    m = len(L)

    def f(z):
        h = np.sqrt(np.maximum(R * R - z * z, 0.0))
        cov = np.maximum(head - z, 0.0) * inner(rest, h)
        if not complement:
            return cov
        ball_slice = omega(m - 1) * h ** (m - 1)
        return vol * ball_slice - cov

    pts = [head] if head < R else []
    pts += [math.sqrt(R * R - p * p) for p in rest if p < R]
    res = quad(f, 0.0, R, epsabs=1e-13, epsrel=1e-13, points=pts)
    return 2.0 * res.value, 2.0 * res.error


def _ball_cov_integral(a, R, m, complement=False):
    top = min(R, 2 * a) if not complement else R
    sphere = m * omega(m)
    if complement:
        f = lambda d: ball_covariogram_deficit(a, d, m) * sphere * d ** (m - 1)
    else:
        f = lambda d: ball_covariogram(a, d, m) * sphere * d ** (m - 1)
    pts = [2 * a] if 2 * a < top else []
    res = quad(f, 0.0, top, epsabs=1e-14, epsrel=1e-13, points=pts)
    return res.value, res.error


def horn_mu_tail_bound(horn: Horn, R: float, X: float) -> float:
    """Upper bound for the μ-integral over the part of the horn with x > X.

    Uses μ(x; R) <= 2R |(x - R)^-alpha Σ| for x >= 1 + R.
    """
    m, a, s = horn.m, horn.alpha, horn.s
    k = 2 * (m - 1) * a
    if X < 1 + R:
        raise ValueError("tail bound needs X >= 1 + R")
    return 2.0 * R * s ** (2 * (m - 1)) * (X - R) ** (1 - k) / (k - 1)


def _horn_mu_integral(horn: Horn, R: float, budget: int, seed, X=None, strata: int = 32):
    if not horn.heat_content_finite:
        return Estimate.infinite()
    if X is None:
        X = _horn_mu_cutoff(horn, R)
    vals, errs, n_total = _horn_stratified(
        horn, X, budget, seed, strata,
        lambda rng, pts: omega(horn.m) * R ** horn.m * horn.contains(
            pts + R * _unit_ball_sample(rng, len(pts), horn.m)))
    tail = horn_mu_tail_bound(horn, R, X)
    return Estimate(vals + 0.5 * tail, errs + 0.5 * tail, MONTE_CARLO, n_total)


def _horn_mu_cutoff(horn: Horn, R: float, rtol: float = 1e-3) -> float:
    # Crude size of the integral: the slab 1 < x < 2 contributes about
    # min(|B_R|, 2R s^(m-1)) per unit volume.
    m = horn.m
    scale = horn.truncated_volume(2.0) * min(omega(m) * R ** m, 2 * R * horn.s ** (m - 1))
    X = max(4.0, 2 * (1 + R))
    while horn_mu_tail_bound(horn, R, X) > rtol * scale and X < 1e15:
        X *= 4.0
    return X


def _horn_stratified(horn: Horn, X: float, budget: int, seed, strata: int, integrand):
    """Stratified Monte Carlo of ∫_{1<x<X} integrand over the horn.

    Strata are geometric slices in x; samples are allocated in proportion
    to slice volume.
    """
    from .estimate import round_samples, seed_sequence

    n = round_samples(budget)
    edges = np.geomspace(1.0, X, strata + 1)
    vols = np.array([horn.truncated_volume(b, a) for a, b in zip(edges[:-1], edges[1:])])
    alloc = np.maximum(np.floor(n * vols / vols.sum()).astype(int), 2)
    total = 0.0
    var = 0.0
    used = 0
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        k = int(alloc[i])
        child = seed_sequence(seed, 7, i)

        def draw(rng, kk, a=a, b=b):
            pts = horn.sample_truncated(rng, kk, a, b)
            return integrand(rng, pts)

        mean, se, used_k = mc_mean(draw, k, child)
        total += vols[i] * mean
        var += (vols[i] * se) ** 2
        used += used_k
    return total, SIGMAS * math.sqrt(var), used


def _finite_mc_integral(shape: Shape, budget: int, seed, point_value):
    vol = shape.volume

    def draw(rng, k):
        pts = shape.sample(rng, k)
        return point_value(rng, pts)

    mean, se, n = mc_mean(draw, budget, seed)
    return Estimate(vol * mean, SIGMAS * vol * se, MONTE_CARLO, n)


def _mu_point_sampler(shape: Shape, R: float):
    full = omega(shape.m) * R ** shape.m
    probe = shape.mu_exact(np.zeros((1, shape.m)), R)

    def value(rng, pts):
        if probe is not None:
            return shape.mu_exact(pts, R)
        # One uniform point in B(x; R) per x: unbiased for μ(x; R).
        return full * shape.contains(pts + R * _unit_ball_sample(rng, len(pts), shape.m))

    return value


def _all_balls(shape):
    return isinstance(shape, Ball) or (
        isinstance(shape, DisjointUnion) and all(isinstance(m, Ball) for m in shape.members))


def mu_integral(shape: Shape, R: float, budget: int = 1 << 20, seed=0, method: str = "auto") -> Estimate:
    """∫_D μ_D(x; R) dx."""
    if not R > 0:
        raise ValueError("R must be positive")
    if budget <= 0:
        raise ValueError("budget must be positive")
    if isinstance(shape, Horn):
        return _horn_mu_integral(shape, R, budget, seed)
    if method == "auto":
        if isinstance(shape, Ball):
            v, e = _ball_cov_integral(shape.radius, R, shape.m)
            return Estimate(v, e, QUADRATURE)
        if isinstance(shape, Box):
            v, e = _box_cov_integral(shape.lengths, R)
            return Estimate(v, e, QUADRATURE)
        if _all_balls(shape) and shape.min_gap() >= R:
            parts = [mu_integral(b, R, budget, seed) for b in shape.members]
            return Estimate(sum(p.value for p in parts), sum(p.error_radius for p in parts), QUADRATURE)
        method = "mc"
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    return _finite_mc_integral(shape, budget, seed, _mu_point_sampler(shape, R))


def nu_integral(shape: Shape, R: float, budget: int = 1 << 20, seed=0, method: str = "auto") -> Estimate:
    """∫_D ν_D(x; R) dx; finite-volume sets only."""
    if not shape.finite_volume:
        raise ShapeError("nu_integral requires finite volume")
    if not R > 0:
        raise ValueError("R must be positive")
    if budget <= 0:
        raise ValueError("budget must be positive")
    full = omega(shape.m) * R ** shape.m
    if method == "auto":
        if isinstance(shape, Ball):
            v, e = _ball_cov_integral(shape.radius, R, shape.m, complement=True)
            return Estimate(v, e, QUADRATURE)
        if isinstance(shape, Box):
            v, e = _box_cov_integral(shape.lengths, R, complement=True)
            return Estimate(v, e, QUADRATURE)
        if _all_balls(shape) and shape.min_gap() >= R:
            parts = [nu_integral(b, R, budget, seed) for b in shape.members]
            return Estimate(sum(p.value for p in parts), sum(p.error_radius for p in parts), QUADRATURE)
        method = "mc"
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    mu_value = _mu_point_sampler(shape, R)
    return _finite_mc_integral(shape, budget, seed, lambda rng, pts: full - mu_value(rng, pts))


@dataclass(frozen=True)
class GeoSummary:
    volume: float
    perimeter: float
    diameter: float
    smoothness_radius: float
    component_count: int
    dimension: int


def geo_summary(shape: Shape) -> GeoSummary:
    return GeoSummary(shape.volume, shape.perimeter, shape.diameter, shape.smoothness_radius,
                      shape.component_count, shape.m)


@dataclass(frozen=True)
class ParallelSet:
    """D_r = {x in D : δ(x) > r}."""

    base: Shape
    depth: float

    def __post_init__(self):
        if not self.depth >= 0:
            raise ShapeError("parallel-set depth must be non-negative")

    def contains(self, x):
        x, single = _points(x, self.base.m)
        return _out(self.base.contains(x) & (self.base.delta(x) > self.depth), single)


def parallel_perimeter(shape: Shape, r: float) -> float:
    """H^{m-1}(∂D_r) for balls, stadiums and unions of them."""
    if isinstance(shape, DisjointUnion):
        if not 0 <= r < shape.smoothness_radius:
            raise ShapeError("r must lie in [0, smoothness_radius)")
        return float(sum(parallel_perimeter(mem, r) for mem in shape.members))
    if not isinstance(shape, (Ball, Stadium)):
        raise ShapeError(f"parallel perimeter not available for {type(shape).__name__}")
    if not 0 <= r < shape.smoothness_radius:
        raise ShapeError("r must lie in [0, smoothness_radius)")
    if isinstance(shape, Ball):
        return Ball(shape.center, shape.radius - r).perimeter
    return Stadium(shape.start, shape.end, shape.radius - r).perimeter


# ---------------------------------------------------------------------------
# JSON documents


def shape_from_dict(doc: dict) -> Shape:
    if not isinstance(doc, dict):
        raise ShapeError("shape document must be a JSON object")
    kind = doc.get("kind")
    m = doc.get("m")
    if not isinstance(m, int) or m < 1:
        raise ShapeError("'m' must be a positive integer")

    def vec(key, default=None):
        v = doc.get(key, default)
        if v is None:
            raise ShapeError(f"{kind}: missing '{key}'")
        if not isinstance(v, (list, tuple)) or len(v) != m:
            raise ShapeError(f"{kind}: '{key}' must be a list of {m} numbers")
        return tuple(float(c) for c in v)

    def num(key, default=None):
        v = doc.get(key, default)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ShapeError(f"{kind}: '{key}' must be a number")
        return float(v)

    if kind == "ball":
        return Ball(vec("center", [0.0] * m), num("radius"))
    if kind == "box":
        return Box(vec("lengths"), vec("corner", [0.0] * m))
    if kind == "stadium":
        shp = Stadium(vec("start"), vec("end"), num("radius"))
        return shp
    if kind == "horn":
        return Horn(m, num("alpha"), num("s", 1.0))
    if kind == "union":
        members = doc.get("members")
        if not isinstance(members, list) or not members:
            raise ShapeError("union: 'members' must be a non-empty list")
        shapes = [shape_from_dict(d) for d in members]
        if any(s.m != m for s in shapes):
            raise ShapeError("union: member dimension differs from 'm'")
        return DisjointUnion(tuple(shapes))
    raise ShapeError(f"unknown shape kind {kind!r}")


def shape_to_dict(shape: Shape) -> dict:
    return shape.to_dict()
