"""Convex regions, interaction corridors and their volumes.

A corridor of half-width ``delta`` around a convex body K is the set of points
whose Euclidean distance to the boundary of K is smaller than ``delta``. It
splits into an outer shell ``K_delta \\ K`` and an inner shell inside K. The
outer shell is governed by the Steiner polynomial of K; the inner shell is
bounded by ``delta * area(boundary)``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection

from grandcanon import kernels
from grandcanon.seeding import generator

PROJECTION_TOL = 1e-10
PROJECTION_MAX_SWEEPS = 10_000
MC_BLOCK_SIZE = 1 << 16


def unit_ball_volume(d):
    """Volume of the d-dimensional Euclidean unit ball."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


# ---------------------------------------------------------------------------
# Bodies
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        object.__setattr__(self, "center", c)
        if c.size < 2:
            raise ValueError("bodies must live in dimension d >= 2")
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("box corners have different dimensions")
        if lo.size < 2:
            raise ValueError("bodies must live in dimension d >= 2")
        if not np.all(lo < hi):
            raise ValueError("box requires lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, d, side, center=None):
        c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        return cls(c - side / 2, c + side / 2)

    @property
    def dim(self):
        return self.lo.size

    @property
    def sides(self):
        return self.hi - self.lo


@dataclass(frozen=True, eq=False)
class Polytope:
    """Bounded H-polytope ``{x : normals @ x <= offsets}``.

    Normals are rescaled to unit length on construction. Boundedness and a
    nonempty interior are checked with linear programs; the Chebyshev centre
    and radius (the inradius) are cached.
    """

    normals: np.ndarray
    offsets: np.ndarray
    chebyshev_center: np.ndarray = field(init=False, repr=False)
    inradius: float = field(init=False, repr=False)
    bbox: tuple = field(init=False, repr=False)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = np.asarray(self.offsets, dtype=float).reshape(-1)
        if a.shape[0] != b.size:
            raise ValueError("need one offset per facet normal")
        d = a.shape[1]
        if d < 2:
            raise ValueError("bodies must live in dimension d >= 2")
        norms = np.linalg.norm(a, axis=1)
        if np.any(norms == 0):
            raise ValueError("facet normals must be nonzero")
        a = a / norms[:, None]
        b = b / norms
        object.__setattr__(self, "normals", a)
        object.__setattr__(self, "offsets", b)

        lo, hi = np.empty(d), np.empty(d)
        for k in range(d):
            for sign, store in ((1.0, lo), (-1.0, hi)):
                c = np.zeros(d)
                c[k] = sign
                res = linprog(c, A_ub=a, b_ub=b, bounds=[(None, None)] * d, method="highs")
                if res.status == 3:
                    raise ValueError("unbounded body")
                if res.status != 0:
                    raise ValueError(f"polytope is empty or degenerate ({res.message})")
                store[k] = res.x[k]
        object.__setattr__(self, "bbox", (lo, hi))

        # Chebyshev ball: maximise r subject to a_i . x + r <= b_i.
        c = np.zeros(d + 1)
        c[-1] = -1.0
        res = linprog(
            c,
            A_ub=np.hstack([a, np.ones((a.shape[0], 1))]),
            b_ub=b,
            bounds=[(None, None)] * d + [(0, None)],
            method="highs",
        )
        if res.status != 0 or res.x[-1] <= 1e-12:
            raise ValueError("polytope has empty interior")
        object.__setattr__(self, "chebyshev_center", res.x[:d])
        object.__setattr__(self, "inradius", float(res.x[-1]))

    @classmethod
    def cross_polytope(cls, d, radius=1.0):
        """The l1 ball ``|x|_1 <= radius``."""
        signs = np.array(list(np.ndindex(*(2,) * d)), dtype=float) * 2 - 1
        return cls(signs, np.full(len(signs), radius))

    @property
    def dim(self):
        return self.normals.shape[1]


ConvexBody = Ball | Box | Polytope


def random_polytope(d, n_facets, seed, offset_range=(1.5, 2.5)):
    """Random bounded polytope containing the ball of radius ``offset_range[0]``."""
    rng = generator(seed)
    while True:
        normals = rng.standard_normal((n_facets, d))
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        offsets = rng.uniform(*offset_range, size=n_facets)
        try:
            return Polytope(normals, offsets)
        except ValueError:
            continue


# ---------------------------------------------------------------------------
# Exact measures
# ---------------------------------------------------------------------------


def inradius(body):
    if isinstance(body, Ball):
        return body.radius
    if isinstance(body, Box):
        return float(np.min(body.sides)) / 2
    return body.inradius


def bounding_box(body):
    """Tight axis-aligned bounding box ``(lo, hi)``."""
    if isinstance(body, Ball):
        return body.center - body.radius, body.center + body.radius
    if isinstance(body, Box):
        return body.lo.copy(), body.hi.copy()
    lo, hi = body.bbox
    return lo.copy(), hi.copy()


def _elementary_symmetric(values, k):
    return float(sum(math.prod(c) for c in combinations(values, k)))


def polytope_vertices(body):
    """Vertices of a polytope via half-space intersection (duplicates merged)."""
    hs = HalfspaceIntersection(
        np.hstack([body.normals, -body.offsets[:, None]]), body.chebyshev_center
    )
    pts = hs.intersections
    scale = max(1.0, float(np.max(np.abs(pts))))
    keys = np.round(pts / (scale * 1e-9)).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return pts[np.sort(idx)]


def volume(body, n_samples=400_000, seed=0):
    """Lebesgue measure of ``body``.

    Exact for balls and boxes. A polytope gets a Monte Carlo estimate, returned
    as an :class:`McEstimate` so callers can tell it is approximate.
    """
    if isinstance(body, Ball):
        return unit_ball_volume(body.dim) * body.radius**body.dim
    if isinstance(body, Box):
        return float(np.prod(body.sides))
    lo, hi = bounding_box(body)
    return _mc_indicator(lambda p: contains(p, body), Box(lo, hi), n_samples, seed)


def surface_area(body):
    """(d-1)-dimensional measure of the boundary."""
    d = body.dim
    if isinstance(body, Ball):
        return d * unit_ball_volume(d) * body.radius ** (d - 1)
    if isinstance(body, Box):
        return 2.0 * _elementary_symmetric(body.sides, d - 1)
    if d > 3:
        raise ValueError("unsupported facet-area dimension")
    verts = polytope_vertices(body)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(verts))))
    total = 0.0
    for a, b in zip(body.normals, body.offsets):
        on = verts[np.abs(verts @ a - b) <= tol]
        if len(on) < d:
            continue
        if d == 2:
            total += max(np.linalg.norm(p - q) for p, q in combinations(on, 2))
            continue
        # Orthonormal frame of the facet plane.
        u = np.linalg.svd(a[None, :])[2][1:]
        flat = (on - on.mean(axis=0)) @ u.T
        try:
            total += ConvexHull(flat).volume
        except Exception:  # collinear facet points: zero area
            pass
    return total


def steiner_coefficients(body):
    """Exact Steiner-polynomial coefficients for balls and boxes.

    ``vol(A + eps B) = volume + area eps + sum_j higher[j-2] eps^j + omega_d eps^d``
    with ``higher`` running over j = 2 .. d-1.
    """
    d = body.dim
    omega = unit_ball_volume(d)
    if isinstance(body, Ball):
        r = body.radius
        higher = [math.comb(d, j) * omega * r ** (d - j) for j in range(2, d)]
    elif isinstance(body, Box):
        # A k-ball orthant sweeps each (d-k)-face: coefficient omega_k e_{d-k}(sides).
        higher = [unit_ball_volume(j) * _elementary_symmetric(body.sides, d - j) for j in range(2, d)]
    else:
        raise ValueError("no closed Steiner form; use Monte Carlo")
    return SteinerCoefficients(volume(body), surface_area(body), higher, omega)


@dataclass(frozen=True)
class SteinerCoefficients:
    volume: float
    area: float
    higher: list
    unit_ball_volume: float

    def terms(self):
        """Coefficients of eps^1 .. eps^d."""
        return [self.area, *self.higher, self.unit_ball_volume]

    def outer_volume(self, eps):
        return sum(c * eps**j for j, c in enumerate(self.terms(), start=1))


def steiner_outer_volume(body, eps):
    """``vol(body + eps B^d) - vol(body)``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if isinstance(body, Ball):
        d, r = body.dim, body.radius
        return unit_ball_volume(d) * ((r + eps) ** d - r**d)
    return steiner_coefficients(body).outer_volume(eps)


def ball_corridor_volume(R, delta, d):
    """Exact volume of ``B(0, R + delta) minus B(0, R - delta)`` in dimension d.

    Evaluated through the odd-power binomial sum, which avoids cancellation.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta >= R:
        raise ValueError("corridor swallows body")
    odd = sum(math.comb(d, k) * R ** (d - k) * delta**k for k in range(1, d + 1, 2))
    return 2.0 * unit_ball_volume(d) * odd


def exact_corridor_volume(spec):
    """Closed-form corridor volume, or ``None`` for polytopes."""
    body, delta = spec.body, spec.delta
    if isinstance(body, Ball):
        return ball_corridor_volume(body.radius, delta, body.dim)
    if isinstance(body, Box):
        inner = volume(body) - float(np.prod(body.sides - 2 * delta))
        return inner + steiner_outer_volume(body, delta)
    return None


# ---------------------------------------------------------------------------
# Distances and membership
# ---------------------------------------------------------------------------


def _as_points(x, d):
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != d:
        raise ValueError(f"points have dimension {pts.shape[1]}, body has {d}")
    return pts, single


def contains(x, body):
    """Membership in the open body; vectorized over rows of ``x``."""
    pts, single = _as_points(x, body.dim)
    if isinstance(body, Ball):
        inside = np.sum((pts - body.center) ** 2, axis=1) < body.radius**2
    elif isinstance(body, Box):
        inside = np.all((pts > body.lo) & (pts < body.hi), axis=1)
    else:
        inside = np.all(pts @ body.normals.T < body.offsets, axis=1)
    return bool(inside[0]) if single else inside


def project_onto_polytope(x, body):
    """Euclidean projection onto a polytope (Dykstra, tolerance 1e-10)."""
    pts, single = _as_points(x, body.dim)
    proj, _ = kernels.project_polytope(
        pts, body.normals, body.offsets, PROJECTION_TOL, PROJECTION_MAX_SWEEPS
    )
    return proj[0] if single else proj


def _polytope_boundary_distance(pts, body, cap=np.inf):
    slack = body.offsets - pts @ body.normals.T
    out = np.empty(len(pts))
    inside = np.all(slack >= 0, axis=1)
    # Inside a convex polytope the nearest boundary point lies on a facet plane.
    out[inside] = np.min(slack[inside], axis=1)
    violation = -np.min(slack[~inside], axis=1) if (~inside).any() else np.empty(0)
    outside = np.flatnonzero(~inside)
    # The largest violated facet gives a lower bound on the distance to the set.
    far = violation >= cap
    out[outside[far]] = violation[far]
    near = outside[~far]
    if near.size:
        proj, _ = kernels.project_polytope(
            pts[near], body.normals, body.offsets, PROJECTION_TOL, PROJECTION_MAX_SWEEPS
        )
        out[near] = np.linalg.norm(pts[near] - proj, axis=1)
    return out


def boundary_distance(x, body):
    """Euclidean distance from each point to the boundary of ``body``."""
    pts, single = _as_points(x, body.dim)
    if isinstance(body, Ball):
        out = np.abs(np.linalg.norm(pts - body.center, axis=1) - body.radius)
    elif isinstance(body, Box):
        below, above = body.lo - pts, pts - body.hi
        outside_gap = np.maximum(np.maximum(below, above), 0.0)
        inside = np.all((below <= 0) & (above <= 0), axis=1)
        out = np.linalg.norm(outside_gap, axis=1)
        out[inside] = np.min(np.minimum(-below[inside], -above[inside]), axis=1)
    else:
        out = _polytope_boundary_distance(pts, body)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class CorridorSpec:
    """A body and the half-width of the corridor around its boundary."""

    body: ConvexBody
    delta: float

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        r_in = inradius(self.body)
        if self.delta >= r_in:
            raise ValueError(f"delta={self.delta} must be smaller than the inradius {r_in}")


def in_corridor(x, spec):
    """True where the boundary distance is strictly below ``spec.delta``."""
    pts, single = _as_points(x, spec.body.dim)
    if isinstance(spec.body, Polytope):
        dist = _polytope_boundary_distance(pts, spec.body, cap=spec.delta)
    else:
        dist = np.atleast_1d(boundary_distance(pts, spec.body))
    hit = dist < spec.delta
    return bool(hit[0]) if single else hit


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int

    def __float__(self):
        return float(self.mean)


def _mc_indicator(indicator, bounding, n_samples, seed, block_size=MC_BLOCK_SIZE, workers=1):
    """Uniform hit-or-miss estimate of the measure of ``{indicator}`` in ``bounding``.

    Samples are drawn in fixed-size blocks, block ``k`` from stream
    ``(seed, k)``, so the estimate is identical for any ``workers``.
    """
    n_samples = int(n_samples)
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    lo, hi = bounding.lo, bounding.hi
    sizes = [min(block_size, n_samples - s) for s in range(0, n_samples, block_size)]

    def block(k):
        rng = generator(seed, k)
        pts = lo + (hi - lo) * rng.random((sizes[k], lo.size))
        return int(np.count_nonzero(indicator(pts)))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            hits = sum(pool.map(block, range(len(sizes))))
    else:
        hits = sum(block(k) for k in range(len(sizes)))

    box_vol = float(np.prod(hi - lo))
    p = hits / n_samples
    stderr = box_vol * math.sqrt(p * (1 - p) / (n_samples - 1)) if n_samples > 1 else 0.0
    return McEstimate(box_vol * p, stderr, n_samples, int(seed))


def mc_corridor_volume(spec, bounding, n_samples, seed, workers=1):
    """Hit-or-miss estimate of the corridor volume inside ``bounding``."""
    lo, hi = bounding_box(spec.body)
    slack = 1e-12 * max(1.0, float(np.max(np.abs(bounding.hi - bounding.lo))))
    if np.any(bounding.lo > lo - spec.delta + slack) or np.any(bounding.hi < hi + spec.delta - slack):
        raise ValueError("bounding box must contain the body dilated by delta")
    return _mc_indicator(lambda p: in_corridor(p, spec), bounding, n_samples, seed, workers=workers)


def mc_outer_shell_volume(body, eps, n_samples, seed, workers=1):
    """Hit-or-miss estimate of ``vol(body + eps B) - vol(body)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    lo, hi = bounding_box(body)

    def shell(p):
        return ~np.atleast_1d(contains(p, body)) & (np.atleast_1d(boundary_distance(p, body)) <= eps)

    return _mc_indicator(shell, Box(lo - eps, hi + eps), n_samples, seed, workers=workers)


def default_bounding(spec, margin=0.0):
    """Smallest axis-aligned box holding the body dilated by ``delta``."""
    lo, hi = bounding_box(spec.body)
    pad = spec.delta + margin
    return Box(lo - pad, hi + pad)


# ---------------------------------------------------------------------------
# Corridor volume bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    body_id: str
    d: int
    delta: float
    mc_mean: float
    mc_stderr: float
    exact: float | None
    lower_bound: float
    upper_bound: float
    quadratic_constant: float
    constant_source: str
    passed: bool
    exact_passed: bool | None

    CSV_FIELDS = (
        "body_id", "d", "delta", "mc_mean", "mc_stderr", "exact",
        "lower_bound", "upper_bound", "pass",
    )

    def csv_row(self):
        return [
            self.body_id, self.d, repr(self.delta), repr(self.mc_mean), repr(self.mc_stderr),
            "" if self.exact is None else repr(self.exact),
            repr(self.lower_bound), repr(self.upper_bound), "PASS" if self.passed else "FAIL",
        ]


def quadratic_constant(body, delta):
    """Constant C of the ``C delta^2`` correction in the upper corridor bound.

    Exact Steiner coefficients give ``C = sum_{j>=2} c_j delta^(j-2)``, which
    makes the bound rigorous for every delta. Otherwise the conservative
    ``d * area`` is used.
    """
    try:
        coef = steiner_coefficients(body)
    except ValueError:
        return body.dim * surface_area(body), "conservative"
    return sum(c * delta ** (j - 2) for j, c in enumerate(coef.terms(), start=1) if j >= 2), "steiner"


def check_volume_bounds(spec, mc, body_id=""):
    """Compare a corridor estimate against ``delta area <= vol <= 2 delta area + C delta^2``.

    Failure is reported, never raised.
    """
    body, delta = spec.body, spec.delta
    area = surface_area(body)
    c, source = quadratic_constant(body, delta)
    lower = delta * area
    upper = 2 * delta * area + c * delta**2
    exact = exact_corridor_volume(spec)
    three_sigma = 3 * mc.stderr
    passed = lower - three_sigma <= mc.mean <= upper + three_sigma
    exact_passed = None
    if exact is not None:
        rel = 1e-12 * max(1.0, upper)
        exact_passed = lower - rel <= exact <= upper + rel
    return BoundReport(
        body_id or type(body).__name__.lower(), body.dim, float(delta), mc.mean, mc.stderr,
        exact, lower, upper, c, source, bool(passed), exact_passed,
    )


def write_bound_reports_csv(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BoundReport.CSV_FIELDS)
        for r in reports:
            w.writerow(r.csv_row())
