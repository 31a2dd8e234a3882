"""Reservoir energy curves and the first-order reduction to ``H - mu N``.

The reservoir enters only through its energy as a function of its particle
number, ``E_R(N_R)``. With ``N_S = <N>`` particles in the open system and
``N`` in total, the total energy is ``<H> + E_R(N - N_S)``. Expanding
``E_R`` to first order around ``N`` leaves ``E_R(N) + <H - mu N>``; the
residual of that expansion is what :func:`residual_scan` measures.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from grandcanon.fock import BlockOperator, number_operator
from grandcanon.states import DensityOperator, expectation
from grandcanon.stvr import fit_power_law

RESIDUAL_FLOOR = 1e-14
SMALL_EPSILON = 0.2


class _Curve:
    domain = (-math.inf, math.inf)

    def __call__(self, n):
        lo, hi = self.domain
        n_arr = np.asarray(n, dtype=float)
        if np.any(n_arr < lo) or np.any(n_arr > hi):
            raise ValueError(f"particle number outside the curve domain [{lo}, {hi}]")
        return self._eval(n)

    def shifted(self, c):
        return _ShiftedCurve(self, c)


@dataclass(frozen=True)
class LinearCurve(_Curve):
    """``E_R(n) = a n``."""

    a: float

    def _eval(self, n):
        return self.a * n


@dataclass(frozen=True)
class QuadraticCurve(_Curve):
    """``E_R(n) = a n + b n**2``."""

    a: float
    b: float

    def _eval(self, n):
        # Horner form keeps dyadic inputs exact.
        return (self.a + self.b * n) * n


class TabulatedCurve(_Curve):
    """Cubic spline through ``(n_values, e_values)``; defined only on the grid span."""

    def __init__(self, n_values, e_values):
        n = np.asarray(n_values, dtype=float)
        e = np.asarray(e_values, dtype=float)
        if n.ndim != 1 or n.shape != e.shape or len(n) < 4:
            raise ValueError("need at least 4 matching samples")
        if np.any(np.diff(n) <= 0):
            raise ValueError("tabulated grid must be strictly increasing")
        self.n_values = n
        self.e_values = e
        self.domain = (float(n[0]), float(n[-1]))
        self._spline = CubicSpline(n, e)

    @classmethod
    def from_function(cls, f, n_values):
        n = np.asarray(n_values, dtype=float)
        return cls(n, [f(x) for x in n])

    def _eval(self, n):
        out = self._spline(n)
        return float(out) if np.ndim(out) == 0 else out


class _ShiftedCurve(_Curve):
    def __init__(self, base, c):
        self.base = base
        self.c = c
        self.domain = base.domain

    def _eval(self, n):
        return self.base(n) + self.c


def chemical_potential(curve, N, h=1):
    """Central difference ``(E_R(N+h) - E_R(N-h)) / (2h)``."""
    if h <= 0:
        raise ValueError("step must be positive")
    return (curve(N + h) - curve(N - h)) / (2 * h)


def taylor_remainder(curve, N, N_S, h=1):
    """``|E_R(N - N_S) - E_R(N) + mu N_S|`` with ``mu`` from :func:`chemical_potential`."""
    if N_S >= N:
        raise ValueError("N_S must be smaller than N")
    if N_S == 0:
        return 0.0
    mu = chemical_potential(curve, N, h)
    return abs(curve(N - N_S) - curve(N) + mu * N_S)


def _check_state(H, rho):
    if not isinstance(H, BlockOperator):
        raise TypeError("H must be a BlockOperator")
    if not isinstance(rho, DensityOperator):
        raise TypeError("state must be a DensityOperator")
    if rho.dim != H.spec.total_dim:
        raise ValueError(f"state dimension {rho.dim} does not match Fock dimension {H.spec.total_dim}")


def total_energy_surrogate(H, rho_S, curve, N, Nop=None):
    """``(E_T, N_S)`` with ``E_T = <H> + E_R(N - N_S)`` and ``N_S = <N>``."""
    _check_state(H, rho_S)
    Nop = number_operator(H.spec) if Nop is None else Nop
    e_t, n_s, _ = _energies(H.to_dense(), Nop.to_dense(), rho_S, curve, N)
    return e_t, n_s


def _energies(dense_h, dense_n, rho, curve, N):
    n_s = expectation(dense_n, rho).value
    if n_s >= N:
        raise ValueError(f"system larger than total: <N> = {n_s} >= {N}")
    e_h = expectation(dense_h, rho).value
    return e_h + curve(N - n_s), n_s, e_h


@dataclass(frozen=True)
class EpsilonRow:
    epsilon: float
    e_total: float
    e_eff: float
    residual: float


@dataclass
class EpsilonScan:
    rows: list
    mu: float
    N_total: int
    step: float
    fit: object = None
    exact: bool = False
    notes: list = field(default_factory=list)

    @property
    def slope(self):
        return self.fit.exponent if self.fit is not None else None

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", "e_total", "e_eff", "residual"])
            for r in self.rows:
                w.writerow([repr(r.epsilon), repr(r.e_total), repr(r.e_eff), repr(r.residual)])

    def summary(self):
        lines = [f"mu={self.mu!r}", f"N_total={self.N_total}", f"step={self.step!r}"]
        if self.exact:
            lines += ["slope=exact", "r2=exact"]
        elif self.fit is None:
            lines += ["slope=none", "r2=none"]
        else:
            lines += [f"slope={self.fit.exponent!r}", f"r2={self.fit.r2!r}"]
        return "\n".join(lines) + "\n"


def residual_scan(H, Nop, curve, N_total, states, h=1):
    """Residual ``|E_T - E_R(N) - (<H> - mu <N>)|`` against ``epsilon = <N>/N``.

    Rows are sorted by epsilon. Residuals below ``1e-14`` are left out of the
    log-log fit; if every residual is that small the fit is marked exact.
    """
    mu = chemical_potential(curve, N_total, h)
    e_ref = curve(N_total)
    dense_h, dense_n = H.to_dense(), Nop.to_dense()
    rows = []
    for rho in states:
        _check_state(H, rho)
        e_t, n_s, e_h = _energies(dense_h, dense_n, rho, curve, N_total)
        e_eff = e_h - mu * n_s
        rows.append(EpsilonRow(n_s / N_total, e_t, e_eff, abs(e_t - e_ref - e_eff)))
    rows.sort(key=lambda r: r.epsilon)
    scan = EpsilonScan(rows, mu, N_total, h)
    if any(r.epsilon > SMALL_EPSILON for r in rows):
        msg = f"epsilon above {SMALL_EPSILON}: the open system is not small"
        warnings.warn(msg, stacklevel=2)
        scan.notes.append(msg)
    usable = [r for r in rows if r.residual >= RESIDUAL_FLOOR and r.epsilon > 0]
    if rows and not usable:
        scan.exact = True
    elif len(usable) >= 3:
        scan.fit = fit_power_law([r.epsilon for r in usable], [r.residual for r in usable])
    else:
        scan.notes.append("fewer than 3 residuals above the floor; no fit")
    return scan


def sector_state(spec, n):
    """Maximally mixed state on sector ``n``; ``<N> = n`` exactly."""
    w = np.zeros(spec.total_dim)
    off, dim = spec.offsets[n], spec.sector_dim(n)
    w[off:off + dim] = 1.0 / dim
    return DensityOperator(w, np.eye(spec.total_dim))
