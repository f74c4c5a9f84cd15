import json
import math

import pytest

from heatcontent.bounds import (BoundReport, Constants, delta_gauss_integral, diameter_bound,
                                format_table, lemma_probe_points, lemma_tail_term, main_theorem_constant,
                                pointwise_solution_bounds, report_sort_key, verify_geometric_props,
                                verify_main_theorem, verify_mu_sandwich, verify_nu_sandwich,
                                verify_pointwise_lemmas, verify_subadditivity, verify_time_scaling,
                                verify_trivial_bounds)
from heatcontent.estimate import Estimate
from heatcontent.geometry import Ball, Box, DisjointUnion, Horn, ShapeError, Stadium

DISK = Ball((0.0, 0.0), 1.0)


def test_constants_m2():
    k = Constants.for_dimension(2)
    base = 1 / (4 * math.pi)
    assert k.c1 == pytest.approx(math.exp(-4) * base)
    assert k.c2 == pytest.approx(base / (1 - 4 * math.exp(-3)))
    assert k.d1 == pytest.approx(math.exp(-8) * base)
    assert k.d2 == pytest.approx(base / (1 - 4 * math.exp(-4)))
    assert main_theorem_constant(2) == 128
    with pytest.raises(ValueError):
        Constants.for_dimension(0)


def test_report_verdicts():
    r = BoundReport("x", 0.1, 1.0, Estimate(0.99, 0.02, "monte_carlo"), 2.0)
    assert r.passed and r.marginal and not r.strict
    r = BoundReport("x", 0.1, 1.0, Estimate(0.95, 0.02, "monte_carlo"), 2.0, lower_radius=0.02)
    assert not r.passed
    r = BoundReport("x", 0.1, 1.0, Estimate(1.5, 0.0, "quadrature"), 2.0)
    assert r.strict and not r.marginal


def test_report_infinite_case_and_json():
    r = BoundReport("mu_sandwich", 0.1, math.inf, Estimate.infinite(), math.inf)
    assert r.passed and r.slack_lower == 0.0
    d = json.loads(r.to_json())
    assert d["value"] == "inf" and d["pass"] is True


def test_sort_and_table():
    a = BoundReport("b", 0.2, 0.0, Estimate.exact(1.0), 2.0)
    b = BoundReport("a", (0.1, 0.3), 0.0, Estimate.exact(3.0), 2.0)
    c = BoundReport("b", None, 0.0, Estimate.exact(1.0), 2.0)
    assert sorted([a, b, c], key=report_sort_key)[0] is b
    table = format_table([a, b])
    assert "FAIL" in table and "pass" in table and table.splitlines()[0].startswith("name")


def test_main_theorem_disk_and_3ball():
    assert verify_main_theorem(DISK, 1e-3).strict
    assert verify_main_theorem(Ball((0.0, 0.0, 0.0), 1.0), 1e-2).strict
    with pytest.raises(ShapeError):
        verify_main_theorem(Box((1.0, 1.0)), 1e-3)


def test_mu_sandwich_cases():
    assert verify_mu_sandwich(DISK, 1e-2).strict
    r = verify_mu_sandwich(Horn(2, 0.4), 1e-2)
    assert r.passed and r.details["dichotomy"] == "infinite/infinite"
    r = verify_mu_sandwich(Horn(2, 0.75), 1e-2, samples=1 << 16)
    assert r.passed and "dichotomy" not in r.details


def test_nu_sandwich_and_trivial_bounds():
    for shape in (DISK, Box((1.0, 1.0))):
        assert verify_nu_sandwich(shape, 1e-2, samples=1 << 16).passed
        assert verify_trivial_bounds(shape, 1e-2, samples=1 << 16).passed


def test_delta_gauss_integral_paths_agree():
    q = delta_gauss_integral(DISK, 1e-2)
    mc = delta_gauss_integral(Stadium((0.0, 0.0), (1e-9, 0.0), 1.0), 1e-2, samples=1 << 18, seed=1)
    assert abs(q.value - mc.value) <= q.error_radius + mc.error_radius + 1e-8


def test_time_scaling_and_subadditivity():
    assert verify_time_scaling(DISK, 1e-3, 1e-2).strict
    with pytest.raises(ValueError):
        verify_time_scaling(DISK, 1e-2, 1e-3)
    r = verify_subadditivity(DISK, 1e-3, 2e-3)
    assert r.strict and r.t == (1e-3, 2e-3)


def test_geometric_props_stadium():
    reps = {r.name: r for r in verify_geometric_props(Stadium((0, 0), (3, 0), 1.0))}
    assert set(reps) == {"component_count", "diameter_bound", "parallel_pinch", "perimeter_bound"}
    assert reps["diameter_bound"].details["equality"]
    assert not reps["perimeter_bound"].details["equality"]
    assert all(r.passed for r in reps.values())
    assert diameter_bound(math.pi, 1.0, 2) == pytest.approx(2.0)


def test_geometric_props_union_uses_components():
    two = DisjointUnion((DISK, Ball((5.0, 0.0), 1.0)))
    reps = {r.name: r for r in verify_geometric_props(two, r_points=5)}
    assert reps["component_count"].value == 2 and reps["component_count"].upper == pytest.approx(2.0)
    assert reps["parallel_pinch"].details["checked"] == 10


def test_lemma_probes():
    pts = lemma_probe_points(DISK, 200, seed=3)
    d = DISK.delta(pts)
    assert (d > 0).all() and (d < 0.5).all()
    reps = verify_pointwise_lemmas(DISK, 1e-2, 10, seed=3)
    assert len(reps) == 10 and all(r.passed for r in reps)
    assert pointwise_solution_bounds is verify_pointwise_lemmas
    assert lemma_tail_term(0.0, 1e-2) == 0.5
    with pytest.raises(ShapeError):
        verify_pointwise_lemmas(Box((1.0, 1.0)), 1e-2)
