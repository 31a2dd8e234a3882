"""Classical-configuration experiment for the surface-to-volume ratio argument.

Particles are placed as a homogeneous Poisson process in a box ``Omega``
that contains the open-system region ``Omega_S``; the rest of the box is the
reservoir region. Interactions are hard cutoffs:

* system-reservoir pairs closer than ``delta`` contribute ``v0`` each,
* system-system pairs closer than ``delta_S`` contribute ``w0`` each.

The ratio of the two pair sums is the surrogate for the ratio of expected
interaction energy to expected (shifted) system energy. The internal range
``delta_S`` stays fixed while ``delta`` is swept.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from grandcanon import geometry, kernels
from grandcanon.geometry import Box, CorridorSpec
from grandcanon.seeding import derive_seed, generator


@dataclass(frozen=True)
class StvrScenario:
    body_S: geometry.ConvexBody
    box_Omega: Box
    density: float = 1.0
    delta_S: float = 1.0
    v0: float = 1.0
    w0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.density < 0:
            raise ValueError("density must be nonnegative")
        if self.delta_S <= 0:
            raise ValueError("delta_S must be positive")
        if self.w0 <= 0:
            raise ValueError("w0 must be positive")
        if self.clearance <= 0:
            raise ValueError("body_S must lie strictly inside box_Omega")
        expected = self.density * self.volume_S
        if 0 < expected < 50:
            warnings.warn(f"expected system particle number {expected:.1f} is small", stacklevel=2)

    @classmethod
    def around(cls, body, clearance, **kwargs):
        """Scenario whose box extends ``clearance`` beyond the body on every side."""
        lo, hi = geometry.bounding_box(body)
        return cls(body, Box(lo - clearance, hi + clearance), **kwargs)

    @property
    def clearance(self):
        lo, hi = geometry.bounding_box(self.body_S)
        return float(min(np.min(lo - self.box_Omega.lo), np.min(self.box_Omega.hi - hi)))

    @property
    def volume_S(self):
        return float(geometry.volume(self.body_S, seed=derive_seed(self.seed, "volume")))

    @property
    def area_S(self):
        return geometry.surface_area(self.body_S)

    @property
    def kappa(self):
        """Surface-to-volume ratio of the system region."""
        return self.area_S / self.volume_S


def sample_configuration(scenario, trial=0):
    """Poisson configuration for one trial, split into system and reservoir points.

    Points are drawn uniformly in the box with a Poisson total count; points
    inside the body go to S, the rest to R. This yields independent Poisson
    processes of the same density in both regions.
    """
    rng = generator(scenario.seed, trial)
    box = scenario.box_Omega
    n = rng.poisson(scenario.density * geometry.volume(box)) if scenario.density > 0 else 0
    pts = box.lo + (box.hi - box.lo) * rng.random((n, box.dim))
    inside = np.atleast_1d(geometry.contains(pts, scenario.body_S)) if n else np.zeros(0, bool)
    return pts[inside], pts[~inside]


class CrossEnergy(NamedTuple):
    energy: float
    n_interacting: int
    n_pairs: int
    corridor_violations: int


def cross_energy(points_S, points_R, delta, v0, body=None):
    """``v0`` times the number of S-R pairs closer than ``delta``.

    ``n_interacting`` counts distinct particles taking part in such a pair.
    With ``body`` given, each of them is checked to lie in the corridor of
    half-width ``delta``; the number of failures is returned.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    n_pairs, fs, fr = kernels.cross_pairs(points_S, points_R, delta)
    violations = 0
    if body is not None and n_pairs:
        involved = np.vstack([np.asarray(points_S)[fs], np.asarray(points_R)[fr]])
        dist = np.atleast_1d(geometry.boundary_distance(involved, body))
        violations = int(np.count_nonzero(dist >= delta))
    return CrossEnergy(v0 * n_pairs, int(fs.sum() + fr.sum()), int(n_pairs), violations)


def internal_energy(points_S, delta_S, w0):
    """``w0`` times the number of S-S pairs closer than ``delta_S``."""
    return w0 * kernels.internal_pairs(points_S, delta_S)


class PowerLawFit(NamedTuple):
    exponent: float
    prefactor: float
    r2: float
    n_points: int


def fit_power_law(x, y):
    """Least squares on ``log y = log c + p log x``; nonpositive points dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 3:
        raise ValueError("need at least 3 positive points for a power-law fit")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    p, logc = np.polyfit(lx, ly, 1)
    resid = ly - (p * lx + logc)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(p), float(math.exp(logc)), float(r2), int(keep.sum()))


@dataclass
class StvrRow:
    delta: float
    corridor_volume: float
    n_int_mean: float
    n_int_stderr: float
    n_interacting_mean: float
    e_int_mean: float
    e_s_mean: float
    ratio: float
    ratio_stderr: float
    e_int_min: float
    e_int_max: float
    e_s_min: float
    e_s_max: float
    c1: float
    c2: float
    envelope_lower: float
    envelope_upper: float
    corridor_violations: int

    @property
    def corridor_density(self):
        return self.n_int_mean / self.corridor_volume

    @property
    def corridor_density_stderr(self):
        return self.n_int_stderr / self.corridor_volume

    @property
    def passed(self):
        three = 3 * self.ratio_stderr
        return self.envelope_lower - three <= self.ratio <= self.envelope_upper + three


@dataclass
class StvrReport:
    scenario: StvrScenario
    rows: list
    trials_used: int
    n_s_mean: float
    fit: PowerLawFit | None = None
    fraction_fit: PowerLawFit | None = None
    coefficient_fit: PowerLawFit | None = None
    notes: list = field(default_factory=list)

    CSV_FIELDS = (
        "delta", "n_int_mean", "e_int_mean", "e_s_mean", "ratio", "ratio_stderr",
        "envelope_lower", "envelope_upper", "pass",
    )

    @property
    def corridor_violations(self):
        return sum(r.corridor_violations for r in self.rows)

    def density_constancy(self, n_sigma=3.0):
        """Per-row ``|corridor density - density| <= n_sigma * stderr``."""
        rho = self.scenario.density
        return [abs(r.corridor_density - rho) <= n_sigma * r.corridor_density_stderr for r in self.rows]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.CSV_FIELDS)
            for r in self.rows:
                w.writerow([
                    repr(r.delta), repr(r.n_int_mean), repr(r.e_int_mean), repr(r.e_s_mean),
                    repr(r.ratio), repr(r.ratio_stderr), repr(r.envelope_lower),
                    repr(r.envelope_upper), "PASS" if r.passed else "FAIL",
                ])


def _stderr(a):
    return float(np.std(a, ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0


def _pair_energy(e, n):
    # Mean energy per unordered pair; undefined below two particles.
    pairs = n * (n - 1) / 2.0
    return np.where(pairs > 0, e / np.maximum(pairs, 1.0), np.nan)


def _corridor_volume(scenario, delta):
    spec = CorridorSpec(scenario.body_S, delta)
    exact = geometry.exact_corridor_volume(spec)
    if exact is not None:
        return exact
    est = geometry.mc_corridor_volume(
        spec, geometry.default_bounding(spec), 400_000, derive_seed(scenario.seed, "corridor", delta)
    )
    return est.mean


def _run_trial(scenario, deltas, trial):
    ps, pr = sample_configuration(scenario, trial)
    e_s = internal_energy(ps, scenario.delta_S, scenario.w0)
    both = np.vstack([ps, pr]) if len(pr) else ps
    dist = np.atleast_1d(geometry.boundary_distance(both, scenario.body_S)) if len(both) else np.zeros(0)
    out = []
    for delta in deltas:
        ce = cross_energy(ps, pr, delta, scenario.v0, scenario.body_S)
        out.append((int(np.count_nonzero(dist < delta)), ce))
    return len(ps), e_s, out


def ratio_scan(scenario, deltas, trials=32, workers=1):
    """Sweep the cutoff ``delta`` and measure the energy ratio with its envelope.

    For each delta the corridor occupation ``N_int`` (particles within
    ``delta`` of the boundary) is recorded alongside the pair energies. The
    envelope constants use trial-level extrema of the mean energy per pair:

    ``C1 = (n_int/n_S)^2 E_int^< / E_S^>``, ``C2 = (n_int/n_S)^2 E_int^> / E_S^<``

    with lower envelope ``C1 (delta kappa)^2`` and upper envelope
    ``C2 (2 delta kappa + c delta^2)^2``, ``c`` the quadratic corridor constant
    over the system volume.
    """
    deltas = [float(d) for d in deltas]
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly ascending")
    if deltas and deltas[-1] >= scenario.clearance:
        raise ValueError("largest delta must stay below the box clearance")
    for delta in deltas:
        CorridorSpec(scenario.body_S, delta)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda t: _run_trial(scenario, deltas, t), range(trials)))
    else:
        results = [_run_trial(scenario, deltas, t) for t in range(trials)]

    notes = []
    kept = [r for r in results if r[1] > 0]
    if len(kept) < len(results):
        msg = f"dropped {len(results) - len(kept)} trial(s) with zero internal energy"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    if not kept:
        raise ValueError("no trial had nonzero internal energy; ratio undefined")

    n_s = np.array([r[0] for r in kept], dtype=float)
    e_s = np.array([r[1] for r in kept], dtype=float)
    v_s = scenario.volume_S
    kappa = scenario.area_S / v_s
    density_s = n_s.mean() / v_s
    e_s_pair = _pair_energy(e_s, n_s)

    rows = []
    for k, delta in enumerate(deltas):
        n_corr = np.array([r[2][k][0] for r in kept], dtype=float)
        ce = [r[2][k][1] for r in kept]
        e_int = np.array([c.energy for c in ce], dtype=float)
        ratios = e_int / e_s
        vol = _corridor_volume(scenario, delta)
        e_int_pair = _pair_energy(e_int, n_corr)
        n_int_density = n_corr.mean() / vol
        scale = (n_int_density / density_s) ** 2 if density_s > 0 else float("nan")
        e_lo, e_hi = float(np.nanmin(e_int_pair)), float(np.nanmax(e_int_pair))
        s_lo, s_hi = float(np.nanmin(e_s_pair)), float(np.nanmax(e_s_pair))
        c1 = scale * e_lo / s_hi
        c2 = scale * e_hi / s_lo
        c_quad = geometry.quadratic_constant(scenario.body_S, delta)[0] / v_s
        rows.append(StvrRow(
            delta=delta,
            corridor_volume=vol,
            n_int_mean=float(n_corr.mean()),
            n_int_stderr=_stderr(n_corr),
            n_interacting_mean=float(np.mean([c.n_interacting for c in ce])),
            e_int_mean=float(e_int.mean()),
            e_s_mean=float(e_s.mean()),
            ratio=float(ratios.mean()),
            ratio_stderr=_stderr(ratios),
            e_int_min=e_lo, e_int_max=e_hi, e_s_min=s_lo, e_s_max=s_hi,
            c1=c1, c2=c2,
            envelope_lower=c1 * (delta * kappa) ** 2,
            envelope_upper=c2 * (2 * delta * kappa + c_quad * delta**2) ** 2,
            corridor_violations=sum(c.corridor_violations for c in ce),
        ))

    report = StvrReport(scenario, rows, len(kept), float(n_s.mean()), notes=notes)
    if len(rows) >= 3:
        d = [r.delta for r in rows]
        fraction = [(r.corridor_volume / v_s) ** 2 for r in rows]
        try:
            report.fit = fit_power_law(d, [r.ratio for r in rows])
            report.coefficient_fit = fit_power_law(d, [r.ratio / f for r, f in zip(rows, fraction)])
        except ValueError as exc:
            notes.append(f"ratio fit unavailable: {exc}")
        report.fraction_fit = fit_power_law(d, fraction)
    return report
