import warnings

import numpy as np
import pytest

from grandcanon import geometry as g
from grandcanon import stvr

BIG_BALL = g.Ball(np.zeros(3), 10.0)


def scenario(**kw):
    kw.setdefault("seed", 2024)
    return stvr.StvrScenario.around(BIG_BALL, 1.0, **kw)


def brute_cross(ps, pr, delta):
    d = np.linalg.norm(ps[:, None, :] - pr[None, :, :], axis=2)
    close = d < delta
    return int(close.sum()), int(close.any(axis=1).sum() + close.any(axis=0).sum())


def brute_internal(p, delta):
    d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=2)
    return int(np.count_nonzero(np.triu(d < delta, k=1)))


class TestScenario:
    def test_body_must_fit_in_box(self):
        with pytest.raises(ValueError, match="strictly inside"):
            stvr.StvrScenario(BIG_BALL, g.Box.cube(3, 20.0))

    def test_warns_for_small_systems(self):
        with pytest.warns(UserWarning, match="small"):
            stvr.StvrScenario.around(g.Ball(np.zeros(3), 1.0), 0.5, density=1.0)

    def test_kappa(self):
        assert scenario().kappa == pytest.approx(0.3)


class TestSampling:
    def test_deterministic(self):
        a = stvr.sample_configuration(scenario(), 3)
        b = stvr.sample_configuration(scenario(), 3)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_zero_density_gives_empty_lists(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ps, pr = stvr.sample_configuration(scenario(density=0.0), 0)
        assert len(ps) == 0 and len(pr) == 0

    def test_split_by_membership(self):
        ps, pr = stvr.sample_configuration(scenario(), 0)
        assert np.all(g.contains(ps, BIG_BALL))
        assert not np.any(g.contains(pr, BIG_BALL))

    def test_poisson_mean(self):
        sc = scenario()
        counts = [len(stvr.sample_configuration(sc, t)[0]) for t in range(100)]
        assert abs(np.mean(counts) - 4188.8) <= 194


class TestEnergies:
    def test_cross_examples(self):
        ps = np.array([[9.975, 0.0, 0.0]])
        pr = np.array([[10.025, 0.0, 0.0]])
        assert tuple(stvr.cross_energy(ps, pr, 0.1, 2.5)[:2]) == (2.5, 2)
        assert tuple(stvr.cross_energy(ps, pr, 0.01, 2.5)[:2]) == (0.0, 0)
        with pytest.raises(ValueError):
            stvr.cross_energy(ps, pr, 0.0, 1.0)

    def test_internal_examples(self):
        assert stvr.internal_energy(np.zeros((1, 3)), 1.0, 1.0) == 0
        tri = np.array([[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]], dtype=float)
        assert stvr.internal_energy(tri, 1.0, 0.5) == 1.5

    def test_against_double_loop(self):
        ps, pr = stvr.sample_configuration(scenario(), 1)
        shell = np.linalg.norm(pr, axis=1) < 11.0  # only the near reservoir can interact
        for delta in (0.4, 0.8):
            ce = stvr.cross_energy(ps, pr, delta, 1.0, BIG_BALL)
            pairs, distinct = brute_cross(ps, pr[shell], delta)
            assert (ce.energy, ce.n_interacting, ce.n_pairs) == (pairs, distinct, pairs)
            assert ce.corridor_violations == 0
        sub = ps[:1500]
        assert stvr.internal_energy(sub, 1.0, 1.0) == brute_internal(sub, 1.0)


class TestFit:
    def test_exact_power_laws(self):
        d = np.array([0.1, 0.2, 0.4, 0.8])
        fit = stvr.fit_power_law(d, 3.0 * d**2)
        assert fit.exponent == pytest.approx(2.0, abs=1e-10)
        assert fit.prefactor == pytest.approx(3.0, rel=1e-10)
        assert stvr.fit_power_law(d, d**4).exponent == pytest.approx(4.0, abs=1e-10)

    def test_noisy(self):
        rng = np.random.default_rng(0)
        d = np.geomspace(0.05, 1.0, 20)
        fit = stvr.fit_power_law(d, 0.7 * d**2 * (1 + 0.01 * rng.standard_normal(20)))
        assert abs(fit.exponent - 2.0) <= 0.05

    def test_nonpositive_points_dropped(self):
        d = [0.1, 0.2, 0.4, 0.8]
        fit = stvr.fit_power_law(d, [0.0, 0.04, 0.16, 0.64])
        assert fit.n_points == 3 and fit.exponent == pytest.approx(2.0)
        with pytest.raises(ValueError, match="at least 3"):
            stvr.fit_power_law(d, [0.0, -1.0, 0.16, 0.64])


@pytest.fixture(scope="module")
def report():
    return stvr.ratio_scan(scenario(), [0.1, 0.2, 0.4, 0.8], trials=32)


class TestRatioScan:
    def test_rows_sorted_and_nonnegative(self, report):
        assert [r.delta for r in report.rows] == [0.1, 0.2, 0.4, 0.8]
        assert all(r.ratio >= 0 for r in report.rows)
        assert report.trials_used == 32

    def test_corridor_assertion(self, report):
        assert report.corridor_violations == 0

    def test_density_constancy(self, report):
        assert all(report.density_constancy())

    def test_envelope(self, report):
        for r in report.rows:
            assert r.passed, r
            assert r.c1 <= r.c2

    def test_exponent(self, report):
        assert report.fit.exponent >= 1.8
        # Squared corridor fraction carries ~delta^2; the pair coefficient the rest.
        assert report.fraction_fit.exponent == pytest.approx(2.0, abs=0.05)
        assert report.fit.exponent == pytest.approx(
            report.fraction_fit.exponent + report.coefficient_fit.exponent, abs=1e-9
        )

    def test_density_does_not_change_exponent(self, report):
        doubled = stvr.ratio_scan(scenario(density=2.0), [0.1, 0.2, 0.4, 0.8], trials=32)
        assert abs(doubled.fit.exponent - report.fit.exponent) <= 0.1

    def test_csv(self, report, tmp_path):
        path = tmp_path / "s.csv"
        report.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "delta,n_int_mean,e_int_mean,e_s_mean,ratio,ratio_stderr,envelope_lower,envelope_upper,pass"
        assert len(lines) == 5

    def test_schedule_independent(self, report):
        again = stvr.ratio_scan(scenario(), [0.1, 0.2, 0.4, 0.8], trials=32, workers=3)
        assert [r.ratio for r in again.rows] == [r.ratio for r in report.rows]


def test_doubling_delta_scales_ratio_by_sixteen():
    # Cross pairs grow like delta^4 at fixed internal range.
    rep = stvr.ratio_scan(scenario(seed=7), [0.2, 0.4], trials=256)
    assert rep.rows[1].ratio / rep.rows[0].ratio == pytest.approx(16.0, rel=0.25)


def test_zero_cross_coupling_gives_zero_ratio():
    rep = stvr.ratio_scan(scenario(v0=0.0), [0.2, 0.4, 0.8], trials=4)
    assert all(r.ratio == 0.0 for r in rep.rows)
    assert rep.fit is None and rep.notes


def test_single_delta_has_no_fit():
    rep = stvr.ratio_scan(scenario(), [0.3], trials=4)
    assert rep.fit is None and len(rep.rows) == 1


def test_scan_validation():
    with pytest.raises(ValueError, match="ascending"):
        stvr.ratio_scan(scenario(), [0.4, 0.2], trials=2)
    with pytest.raises(ValueError, match="clearance"):
        stvr.ratio_scan(scenario(), [0.2, 1.0], trials=2)


def test_trials_without_internal_energy_are_dropped():
    small = g.Ball(np.zeros(3), 2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sc = stvr.StvrScenario.around(small, 1.0, density=0.5, delta_S=0.2, seed=3)
    with pytest.warns(UserWarning, match="dropped"):
        rep = stvr.ratio_scan(sc, [0.1, 0.2, 0.3], trials=40)
    assert 0 < rep.trials_used < 40
