"""Adaptive Gauss-Kronrod (G7/K15) quadrature on finite intervals.

The integrand is called with a 1-D numpy array of nodes and must return an
array of the same shape, so each panel costs a single vectorised call.
Error estimates follow the QUADPACK heuristic. When the subdivision cap is
hit the accumulated error estimate is returned as-is (``converged`` is then
False) instead of a silently truncated value.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Kronrod 15-point abscissae (positive half, descending) and weights.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
# Gauss 7-point weights on the odd Kronrod nodes (1, 3, 5, 7).
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WEIGHTS_K = np.concatenate([_WK[:-1], _WK[::-1]])
_WEIGHTS_G = np.zeros(15)
_WEIGHTS_G[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])

_EPS = np.finfo(float).eps
HARD_LIMIT = 1_000_000


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    intervals: int
    converged: bool


def _gk15(f: Callable[[np.ndarray], np.ndarray], a: float, b: float):
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    fx = np.asarray(f(center + half * _NODES), dtype=float)
    resk = float(np.dot(_WEIGHTS_K, fx)) * half
    resg = float(np.dot(_WEIGHTS_G, fx)) * half
    reskh = resk / (2.0 * half) if half != 0 else 0.0
    resabs = float(np.dot(_WEIGHTS_K, np.abs(fx))) * abs(half)
    resasc = float(np.dot(_WEIGHTS_K, np.abs(fx - reskh))) * abs(half)
    err = abs(resk - resg)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50.0 * _EPS):
        err = max(50.0 * _EPS * resabs, err)
    return resk, err


def quad(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, *,
         epsabs: float = 1e-12, epsrel: float = 0.0,
         points: Sequence[float] | None = None,
         limit: int = 20_000) -> QuadResult:
    """Integrate ``f`` over ``[a, b]``.

    ``points`` are interior breakpoints (kinks, peaks) used for the initial
    partition. Subdivision stops once the summed error estimate is below
    ``max(epsabs, epsrel * |I|)`` or after ``limit`` panels (at most
    ``HARD_LIMIT``).
    """
    if b < a:
        r = quad(f, b, a, epsabs=epsabs, epsrel=epsrel, points=points, limit=limit)
        return QuadResult(-r.value, r.error, r.intervals, r.converged)
    if a == b:
        return QuadResult(0.0, 0.0, 0, True)
    limit = min(int(limit), HARD_LIMIT)

    edges = [a]
    if points is not None:
        edges.extend(sorted(float(p) for p in points if a < p < b))
    edges.append(b)

    heap = []
    total = 0.0
    total_err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        val, err = _gk15(f, lo, hi)
        heapq.heappush(heap, (-err, lo, hi, val))
        total += val
        total_err += err

    n = len(heap)
    while total_err > max(epsabs, epsrel * abs(total)) and n < limit:
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            # Panel cannot be split further in floating point.
            heapq.heappush(heap, (neg_err, lo, hi, val))
            break
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err
        n += 1

    # Re-sum to shed drift from the running updates.
    total = float(sum(item[3] for item in heap))
    total_err = float(sum(-item[0] for item in heap))
    converged = total_err <= max(epsabs, epsrel * abs(total))
    return QuadResult(total, total_err, len(heap), converged)


def gauss_legendre_panels(lo: np.ndarray, hi: np.ndarray, order: int = 20,
                          panels: int = 8):
    """Fixed composite Gauss-Legendre nodes/weights for many intervals at once.

    ``lo`` and ``hi`` are broadcastable arrays; returns ``(nodes, weights)``
    with a trailing axis of length ``order * panels``.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    width = (hi - lo) / panels
    k = np.arange(panels)
    starts = lo + width * k  # (..., panels)
    nodes = starts[..., :, None] + 0.5 * width[..., None] * (x + 1.0)
    weights = 0.5 * width[..., None] * w * np.ones_like(nodes)
    shape = nodes.shape[:-2] + (order * panels,)
    return nodes.reshape(shape), weights.reshape(shape)
