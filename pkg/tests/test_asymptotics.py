import json
import math

import pytest

from heatcontent.asymptotics import (fit_perimeter_coefficient, h3_ball_series, h3_check_ball,
                                     h3_predicted, horn_exponent, horn_predicted_exponent,
                                     is_decreasing_to_zero, lp_convergence_check, lp_distance)
from heatcontent.content import F, H, TimeGrid, heat_curve, heat_loss
from heatcontent.estimate import Estimate
from heatcontent.geometry import Ball, Box, Horn, ShapeError, Stadium

DISK = Ball((0.0, 0.0), 1.0)


def test_perimeter_fit_from_H_and_F_curves():
    grid = TimeGrid.log(1e-6, 1e-3, 12)
    for q in (H, F):
        fit = fit_perimeter_coefficient(heat_curve(DISK, grid, q))
        assert fit.relative_error < 1e-4
    square = fit_perimeter_coefficient(heat_curve(Box((1.0, 1.0)), grid, F))
    assert square.coefficient == pytest.approx(4 / math.sqrt(math.pi), rel=1e-4)


def test_fit_window_validation():
    curve = heat_curve(DISK, TimeGrid.log(1e-4, 1e-2, 8), F)
    with pytest.raises(ValueError):
        fit_perimeter_coefficient(curve, window=(1e-5, 1e-3))
    with pytest.raises(ValueError):
        fit_perimeter_coefficient(curve, window=(1e-4, 2e-4))
    fit = fit_perimeter_coefficient(curve, window=(1e-4, 1e-3), min_points=2)
    assert fit.window[0] == pytest.approx(1e-4)
    assert json.loads(fit.to_json())["model"] == "sqrt_coeff"


def test_h3_formulas():
    assert h3_predicted(1.0, 2) == pytest.approx(-7 * math.pi / 16)
    assert h3_predicted(1.0, 3) == pytest.approx(-3 * math.pi)
    assert h3_ball_series(1.0, 2) == pytest.approx(math.sqrt(math.pi) / 2)
    assert h3_ball_series(1.0, 3) == pytest.approx(8 * math.sqrt(math.pi) / 3)


@pytest.mark.parametrize("m", [2, 3])
def test_h3_series_matches_numerics(m):
    ball = Ball((0.0,) * m, 1.0)
    fit = h3_check_ball(1.0, m, heat_curve(ball, TimeGrid.log(1e-5, 1e-3, 16), F))
    assert fit.coefficient == pytest.approx(h3_ball_series(1.0, m), rel=1e-3)


def test_h3_check_rejects():
    curve = heat_curve(Box((1.0, 1.0)), TimeGrid.log(1e-4, 1e-3, 6), F)
    with pytest.raises(ShapeError):
        h3_check_ball(1.0, 2, curve)
    with pytest.raises(ValueError):
        h3_check_ball(2.0, 2, heat_curve(DISK, TimeGrid.log(1e-4, 1e-3, 6), F))


def test_horn_exponent_range_and_prediction():
    assert horn_predicted_exponent(2, 0.75) == pytest.approx(-1 / 6)
    with pytest.raises(ValueError):
        horn_exponent(Horn(2, 0.4), TimeGrid.log(1e-3, 1e-1, 4))
    with pytest.raises(ShapeError):
        horn_exponent(DISK, TimeGrid.log(1e-3, 1e-1, 4))
    fit = horn_exponent(Horn(2, 0.75, 1e4), TimeGrid.log(1e-3, 1e-1, 5))
    assert abs(fit.coefficient + 1 / 6) < 0.01 and fit.details["s"] == 1e4


def test_lp_distance_paths():
    t = 1e-2
    twice = heat_loss(DISK, t).value * 2
    assert lp_distance(DISK, 1, t).value == pytest.approx(twice)
    mc = lp_distance(DISK, 1, t, samples=1 << 18, seed=1, method="mc")
    assert abs(mc.value - twice) <= mc.error_radius
    p2 = lp_distance(Box((1.0, 1.0)), 2, t, samples=1 << 18, seed=1)
    assert 0 < p2.value < twice
    with pytest.raises(ShapeError):
        lp_distance(Stadium((0, 0), (1, 0), 0.5), 2, t)
    with pytest.raises(ValueError):
        lp_distance(DISK, 0.5, t)


def test_lp_convergence():
    vals = lp_convergence_check(DISK, 2, TimeGrid.log(1e-4, 1e-1, 4), samples=1 << 16)
    assert is_decreasing_to_zero(vals)
    assert not is_decreasing_to_zero([Estimate(1.0, 0.0, "quadrature"), Estimate(0.5, 0.1, "quadrature")])
