import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grandcanon import geometry as g

BALL = g.Ball(np.zeros(3), 1.0)
CUBE = g.Box.cube(3, 2.0)
OCTA = g.Polytope.cross_polytope(3, 1.0)


def cube_as_polytope(side=2.0):
    n = np.vstack([np.eye(3), -np.eye(3)])
    return g.Polytope(n, np.full(6, side / 2))


@pytest.mark.parametrize("d, expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3), (4, math.pi**2 / 2)])
def test_unit_ball_volume(d, expected):
    assert g.unit_ball_volume(d) == pytest.approx(expected, rel=1e-14)


def test_exact_measures():
    assert g.volume(BALL) == pytest.approx(4.18879020, rel=1e-8)
    assert g.surface_area(BALL) == pytest.approx(4 * math.pi, rel=1e-14)
    assert g.volume(CUBE) == 8.0
    assert g.surface_area(CUBE) == 24.0
    assert g.surface_area(OCTA) == pytest.approx(4 * math.sqrt(3), rel=1e-10)
    assert g.inradius(OCTA) == pytest.approx(1 / math.sqrt(3), rel=1e-9)
    assert g.inradius(CUBE) == 1.0


def test_polytope_volume_is_monte_carlo():
    est = g.volume(OCTA, n_samples=400_000, seed=11)
    assert isinstance(est, g.McEstimate)
    assert abs(est.mean - 4 / 3) <= 4 * est.stderr


def test_cube_polytope_area_matches_box():
    assert g.surface_area(cube_as_polytope()) == pytest.approx(24.0, rel=1e-10)


def test_unbounded_polytope_rejected():
    with pytest.raises(ValueError, match="unbounded body"):
        g.Polytope(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]), np.ones(3))


def test_steiner_examples():
    assert g.steiner_outer_volume(BALL, 0.1) == pytest.approx(1.38649, abs=1e-5)
    eps = 0.05
    cube = 24 * eps + 6 * math.pi * eps**2 + 4 * math.pi / 3 * eps**3
    assert g.steiner_outer_volume(CUBE, eps) == pytest.approx(cube, rel=1e-14)
    assert cube == pytest.approx(1.24765, abs=1e-5)


@pytest.mark.parametrize("r, eps", [(1.0, 0.1), (2.5, 0.3), (0.7, 1.9)])
def test_ball_steiner_equals_volume_difference(r, eps):
    ball = g.Ball(np.zeros(3), r)
    diff = g.volume(g.Ball(np.zeros(3), r + eps)) - g.volume(ball)
    assert g.steiner_coefficients(ball).outer_volume(eps) == pytest.approx(diff, rel=1e-12)
    assert g.steiner_outer_volume(ball, eps) == pytest.approx(diff, rel=1e-12)


def test_box_steiner_in_two_dimensions():
    # Rectangle a x b: area + perimeter eps + pi eps^2.
    rect = g.Box(np.zeros(2), np.array([3.0, 1.0]))
    assert g.steiner_outer_volume(rect, 0.5) == pytest.approx(8 * 0.5 + math.pi * 0.25, rel=1e-14)


def test_steiner_refuses_polytope():
    with pytest.raises(ValueError, match="no closed Steiner form; use Monte Carlo"):
        g.steiner_outer_volume(OCTA, 0.1)


def test_corridor_closed_forms():
    assert g.exact_corridor_volume(g.CorridorSpec(BALL, 0.1)) == pytest.approx(2.52166, abs=1e-5)
    box = g.exact_corridor_volume(g.CorridorSpec(CUBE, 0.05))
    assert box == pytest.approx(8 - 1.9**3 + 1.24765, abs=1e-5)
    assert g.exact_corridor_volume(g.CorridorSpec(BALL, 0.0)) == 0.0
    with pytest.raises(ValueError, match="corridor swallows body"):
        g.ball_corridor_volume(1.0, 1.0, 3)


def test_corridor_spec_requires_delta_below_inradius():
    with pytest.raises(ValueError, match="inradius"):
        g.CorridorSpec(BALL, 1.0)
    with pytest.raises(ValueError):
        g.CorridorSpec(CUBE, -0.1)


def test_box_boundary_distance_examples():
    assert g.boundary_distance([0.9, 0.0, 0.0], CUBE) == pytest.approx(0.1)
    assert g.boundary_distance([1.0, 1.0, 1.0], CUBE) == pytest.approx(0.0)
    assert g.boundary_distance([2.0, 2.0, 1.0], CUBE) == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize("body", [BALL, CUBE, OCTA, g.random_polytope(3, 10, 5)], ids=["ball", "box", "octa", "random"])
def test_in_corridor_matches_boundary_distance(body):
    rng = np.random.default_rng(1)
    lo, hi = g.bounding_box(body)
    pts = lo - 0.3 + (hi - lo + 0.6) * rng.random((10_000, 3))
    delta = 0.4 * g.inradius(body)
    spec = g.CorridorSpec(body, delta)
    np.testing.assert_array_equal(g.in_corridor(pts, spec), g.boundary_distance(pts, body) < delta)


def test_polytope_distance_matches_box_distance():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-2.5, 2.5, size=(2000, 3))
    np.testing.assert_allclose(
        g.boundary_distance(pts, cube_as_polytope()), g.boundary_distance(pts, CUBE), atol=1e-9
    )


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_outside_distance_at_least_largest_violation(x):
    x = np.array(x)
    body = g.random_polytope(3, 9, 8)
    viol = np.max(x @ body.normals.T - body.offsets)
    dist = g.boundary_distance(x, body)
    assert dist >= max(viol, 0.0) - 1e-9
    if viol <= 0:
        # Inside: the distance is the smallest facet slack.
        assert dist == pytest.approx(-viol, abs=1e-12)


def test_projection_is_feasible_and_idempotent():
    body = g.random_polytope(3, 12, 3)
    rng = np.random.default_rng(0)
    pts = rng.normal(scale=4, size=(500, 3))
    proj = g.project_onto_polytope(pts, body)
    assert np.all(proj @ body.normals.T - body.offsets <= 1e-9)
    np.testing.assert_allclose(g.project_onto_polytope(proj, body), proj, atol=1e-9)


def test_random_polytope_is_deterministic():
    a, b = g.random_polytope(3, 12, 99), g.random_polytope(3, 12, 99)
    np.testing.assert_array_equal(a.normals, b.normals)
    assert g.inradius(a) >= 1.5 - 1e-9


def test_polytope_bbox_contains_vertices():
    body = g.random_polytope(3, 12, 4)
    v = g.polytope_vertices(body)
    lo, hi = g.bounding_box(body)
    assert np.all(v >= lo - 1e-9) and np.all(v <= hi + 1e-9)
    np.testing.assert_allclose(v.min(axis=0), lo, atol=1e-8)


class TestMonteCarlo:
    def test_example_values(self):
        spec = g.CorridorSpec(BALL, 0.1)
        est = g.mc_corridor_volume(spec, g.default_bounding(spec), 1_000_000, 5)
        assert abs(est.mean - 2.52166) <= 3 * est.stderr
        spec = g.CorridorSpec(CUBE, 0.05)
        est = g.mc_corridor_volume(spec, g.default_bounding(spec), 1_000_000, 6)
        assert abs(est.mean - 2.3887) <= 3 * est.stderr

    def test_deterministic_and_schedule_independent(self):
        spec = g.CorridorSpec(OCTA, 0.1)
        box = g.default_bounding(spec)
        a = g.mc_corridor_volume(spec, box, 200_000, 42)
        b = g.mc_corridor_volume(spec, box, 200_000, 42, workers=3)
        assert a == b

    def test_rejects_bad_inputs(self):
        spec = g.CorridorSpec(BALL, 0.1)
        with pytest.raises(ValueError):
            g.mc_corridor_volume(spec, g.default_bounding(spec), 0, 1)
        with pytest.raises(ValueError, match="dilated"):
            g.mc_corridor_volume(spec, g.Box.cube(3, 2.0), 1000, 1)

    def test_four_sigma_coverage(self):
        spec = g.CorridorSpec(BALL, 0.1)
        box = g.default_bounding(spec)
        exact = g.exact_corridor_volume(spec)
        hits = sum(
            abs(e.mean - exact) <= 4 * e.stderr
            for e in (g.mc_corridor_volume(spec, box, 100_000, s) for s in range(100))
        )
        assert hits >= 99

    def test_monotone_in_delta(self):
        deltas = [0.02, 0.05, 0.1, 0.2]
        exact = [g.exact_corridor_volume(g.CorridorSpec(CUBE, d)) for d in deltas]
        assert exact == sorted(exact)
        est = []
        for k, d in enumerate(deltas):
            spec = g.CorridorSpec(OCTA, d * g.inradius(OCTA))
            est.append(g.mc_corridor_volume(spec, g.default_bounding(spec, 0.2), 200_000, k))
        for a, b in zip(est, est[1:]):
            assert b.mean >= a.mean - 3 * math.hypot(a.stderr, b.stderr)

    def test_outer_shell(self):
        est = g.mc_outer_shell_volume(CUBE, 0.05, 1_000_000, 77)
        assert abs(est.mean - 1.24765) <= 4 * est.stderr


def test_exact_bounds_hold_for_closed_forms():
    for body in (BALL, CUBE):
        for delta in np.linspace(0.001, 0.9, 12):
            spec = g.CorridorSpec(body, float(delta))
            rep = g.check_volume_bounds(spec, g.McEstimate(g.exact_corridor_volume(spec), 0.0, 1, 0))
            assert rep.exact_passed and rep.passed
            assert rep.constant_source == "steiner"


def test_conservative_constant_for_polytope():
    c, source = g.quadratic_constant(OCTA, 0.1)
    assert source == "conservative"
    assert c == pytest.approx(3 * 4 * math.sqrt(3))


def test_bound_report_csv(tmp_path):
    spec = g.CorridorSpec(BALL, 0.05)
    rep = g.check_volume_bounds(spec, g.McEstimate(g.exact_corridor_volume(spec), 0.01, 10, 0), "unit-ball")
    path = tmp_path / "b.csv"
    g.write_bound_reports_csv(path, [rep])
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(g.BoundReport.CSV_FIELDS)
    assert lines[1].startswith("unit-ball,3,0.05,") and lines[1].endswith("PASS")
