
import numpy as np
import pytest
from scipy import integrate

from heatcontent.geometry import Ball, Box, DisjointUnion, Stadium
from heatcontent.kernel import (heat_kernel, lemma_lower_correction, lemma_upper_correction,
                                one_minus_u_ball, one_minus_u_interval, shell_density, u, u_ball,
                                u_ball_many, u_box, u_general, u_interval, u_lower_lemma, u_many,
                                u_upper_lemma)

DISK = Ball((0.0, 0.0), 1.0)


def test_heat_kernel_normalised_1d_and_2d():
    t = 0.05
    one = integrate.quad(lambda y: heat_kernel(np.array([0.3]), np.array([y]), t), -5, 5)[0]
    assert one == pytest.approx(1.0, abs=1e-12)
    g = np.linspace(-3, 3, 1201)
    X, Y = np.meshgrid(g, g)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    vals = heat_kernel(pts, np.zeros(2), t)
    assert np.sum(vals) * (g[1] - g[0]) ** 2 == pytest.approx(1.0, rel=1e-9)


def test_heat_kernel_rejects_bad_time():
    with pytest.raises(ValueError):
        heat_kernel(np.zeros(2), np.zeros(2), 0.0)


def test_u_interval_and_complement():
    x = np.linspace(-0.5, 1.5, 41)
    a = u_interval(0.0, 1.0, x, 0.01)
    b = one_minus_u_interval(0.0, 1.0, x, 0.01)
    assert a + b == pytest.approx(np.ones_like(x), abs=1e-15)
    assert u_interval(0.0, 1.0, 0.0, 1e-4) == pytest.approx(0.5, abs=1e-12)
    # deep inside, the complement keeps full relative precision
    assert one_minus_u_interval(0.0, 1.0, 0.5, 1e-3) > 0


def test_u_box_is_product():
    box = Box((1.0, 2.0))
    x = np.array([0.2, 1.9])
    expected = u_interval(0, 1, 0.2, 0.01) * u_interval(0, 2, 1.9, 0.01)
    assert u_box(box, x, 0.01).value == pytest.approx(expected, rel=1e-14)


def test_shell_density_integrates_to_one():
    for m in (1, 2, 3, 4):
        tot = integrate.quad(lambda rho: shell_density(0.7, rho, 0.02, m), 0, 3, points=[0.7], limit=200)[0]
        assert tot == pytest.approx(1.0, abs=1e-10)


def test_ball_routes_agree():
    for m in (2, 3):
        ball = Ball((0.0,) * m, 1.0)
        for r in (0.0, 0.4, 0.95, 1.0, 1.2):
            x = np.zeros(m)
            x[0] = r
            a = u_ball(ball, x, 0.01)
            b = one_minus_u_ball(ball, x, 0.01)
            c = float(u_ball_many(ball, x, 0.01))
            assert a.value + b.value == pytest.approx(1.0, abs=1e-11)
            assert c == pytest.approx(a.value, abs=1e-11)


def test_u_ball_matches_monte_carlo():
    x = np.array([0.9, 0.1])
    det = u_ball(DISK, x, 0.02)
    mc = u_general(DISK, x, 0.02, 1 << 18, seed=4)
    assert abs(det.value - mc.value) <= mc.error_radius + det.error_radius


def test_u_dispatch_and_union():
    two = DisjointUnion((DISK, Ball((5.0, 0.0), 1.0)))
    x = np.array([[1.0, 0.0], [4.0, 0.0], [2.5, 0.0]])
    many = u_many(two, x, 0.5)
    single = [u(two, p, 0.5).value for p in x]
    assert many == pytest.approx(single, abs=1e-10)
    assert many[0] == pytest.approx(many[1], abs=1e-12)
    assert u(Stadium((0, 0), (1, 0), 0.5), np.array([0.5, 0.0]), 0.01, budget=1 << 12).method == "monte_carlo"


def test_lemma_corrections_small_and_nonnegative():
    for d in (0.0, 0.1, 0.3):
        lo, elo = lemma_lower_correction(d, 1.0, 1e-2, 2)
        hi, ehi = lemma_upper_correction(d, 1.0, 1e-2, 2)
        assert lo >= 0 and hi >= 0 and elo < 1e-12 and ehi < 1e-12


def test_lemma_bounds_bracket_u():
    for x in ([0.8, 0.0], [0.0, -0.6], [0.99, 0.0]):
        x = np.array(x)
        val = float(u_ball_many(DISK, x, 1e-3))
        assert u_lower_lemma(DISK, x, 1e-3) <= val <= u_upper_lemma(DISK, x, 1e-3)


def test_lemma_preconditions():
    with pytest.raises(ValueError):
        u_lower_lemma(DISK, np.array([0.2, 0.0]), 1e-3)  # delta >= R/2
    with pytest.raises(ValueError):
        u_upper_lemma(DISK, np.array([1.5, 0.0]), 1e-3)  # outside
