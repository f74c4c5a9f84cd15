import math

import numpy as np
import pytest

from heatcontent.estimate import (CLOSED_FORM, MONTE_CARLO, QUADRATURE, Estimate, combine_method,
                                  mc_mean, round_samples, seed_sequence)
from heatcontent.quadrature import gauss_legendre_panels, quad


def test_quad_polynomial_and_gaussian():
    r = quad(lambda x: x ** 5 - 2 * x, 0.0, 2.0)
    assert r.converged and r.value == pytest.approx(64 / 6 - 4, abs=1e-13)
    g = quad(lambda x: np.exp(-x * x), -30.0, 30.0, epsabs=1e-14, points=[0.0])
    assert g.value == pytest.approx(math.sqrt(math.pi), abs=1e-13)


def test_quad_reversed_and_empty():
    assert quad(np.sin, 1.0, 0.0).value == pytest.approx(-(1 - math.cos(1.0)), abs=1e-14)
    r = quad(np.sin, 2.0, 2.0)
    assert r.value == 0.0 and r.intervals == 0


def test_quad_breakpoints_catch_narrow_spike():
    f = lambda x: np.exp(-((x - 0.3) / 1e-5) ** 2)
    exact = 1e-5 * math.sqrt(math.pi)
    # Gauss-Kronrod never samples panel ends, so the spike has to be bracketed.
    assert quad(f, 0.0, 1.0, points=[0.3 - 1e-4, 0.3 + 1e-4]).value == pytest.approx(exact, rel=1e-10)


def test_quad_kink_error_estimate_is_honest():
    r = quad(lambda x: np.abs(x - 1 / 3), 0.0, 1.0, epsabs=1e-12)
    assert abs(r.value - 5 / 18) <= max(r.error, 1e-15)


def test_quad_reports_nonconvergence_at_limit():
    r = quad(lambda x: np.sin(1 / x), 1e-6, 1.0, epsabs=1e-15, limit=10)
    assert not r.converged and r.intervals <= 10


def test_gauss_legendre_panels_vectorised():
    n, w = gauss_legendre_panels(np.array([0.0, 1.0]), np.array([1.0, 3.0]), order=6, panels=3)
    assert n.shape == w.shape == (2, 18)
    assert np.sum(w * n ** 3, axis=1) == pytest.approx([0.25, (81 - 1) / 4])


def test_estimate_coercion_and_validation():
    e = Estimate(np.float64(1.5), np.float32(0.25), QUADRATURE, np.int64(3))
    assert type(e.value) is float and type(e.error_radius) is float and type(e.samples) is int
    assert (e.lo, e.hi) == (1.25, 1.75)
    with pytest.raises(ValueError):
        Estimate(1.0, -1.0, QUADRATURE)
    with pytest.raises(ValueError):
        Estimate(1.0, 0.0, "guess")


def test_estimate_exact_infinite_scaled():
    assert Estimate.exact(2.0).error_radius == pytest.approx(2e-13)
    inf = Estimate.infinite()
    assert inf.is_infinite and inf.error_radius == 0.0
    s = Estimate(1.0, 0.1, MONTE_CARLO, 8).scaled(-2.0)
    assert (s.value, s.error_radius, s.samples) == (-2.0, 0.2, 8)
    assert set(s.to_dict()) == {"value", "error_radius", "method", "samples"}


def test_combine_method_prefers_weakest():
    assert combine_method(CLOSED_FORM, QUADRATURE) == QUADRATURE
    assert combine_method(QUADRATURE, MONTE_CARLO) == MONTE_CARLO
    assert combine_method(CLOSED_FORM) == CLOSED_FORM


@pytest.mark.parametrize("n,expected", [(1, 1), (2, 2), (3, 4), (1000, 1024), (1 << 20, 1 << 20)])
def test_round_samples(n, expected):
    assert round_samples(n) == expected


def test_round_samples_rejects_nonpositive():
    with pytest.raises(ValueError):
        round_samples(0)


def test_seed_sequence_keys_are_distinct_and_stable():
    a = seed_sequence(7, 1).generate_state(4)
    assert np.array_equal(a, seed_sequence(7, 1).generate_state(4))
    assert not np.array_equal(a, seed_sequence(7, 2).generate_state(4))
    nested = seed_sequence(seed_sequence(7, 1), 3)
    assert tuple(nested.spawn_key) == (1, 3)


def test_mc_mean_reproducible_and_calibrated():
    draw = lambda rng, k: rng.random(k)
    m1 = mc_mean(draw, 200_000, 3)
    assert m1 == mc_mean(draw, 200_000, 3)
    mean, se, n = m1
    assert n == 1 << 18
    assert abs(mean - 0.5) < 4 * se
    assert se == pytest.approx(math.sqrt(1 / 12 / n), rel=0.02)
